from .optim import NadamState, NonFiniteGradient, nadam_step
from .train import (TrainResult, TrainingDiverged, loss_and_grads, make_targets, objective,
                    predict_image, seeded_init, train)
from .unet import (ParamStore, UNetConfig, assign_classes, backward, check_params, forward,
                   init_params, zero_params)

__all__ = [
    "NadamState", "NonFiniteGradient", "nadam_step",
    "TrainResult", "TrainingDiverged", "loss_and_grads", "make_targets", "objective",
    "predict_image", "seeded_init", "train",
    "ParamStore", "UNetConfig", "assign_classes", "backward", "check_params", "forward",
    "init_params", "zero_params",
]
