"""Conventional vs fuzzy training on synthetic scenes across annotation-noise levels.

For every noise level the training masks come from jittered annotations,
while evaluation always uses the clean masks and their fuzzified version.
The report has two tables: classification metrics against the clean hard
masks, and regression metrics against the clean fuzzy ground truth.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io
from .config import PipelineConfig
from .fuzzify import fuzzify_mask
from .geometry import rasterize
from .metrics import MetricsReport, confusion, regression_metrics
from .model import assign_classes, predict_image, train
from .synth import generate_dataset, scene_geotransform

RUN_LABELS = {
    "conventional": "Conventional (hard GT, BCE)",
    "bce-paper": "Fuzzy BCE (-y log p)",
    "bce-full": "Fuzzy BCE (full)",
    "mse": "Fuzzy MSE",
    "cosine": "Fuzzy Cosine",
}


@dataclass
class SceneSet:
    images: np.ndarray
    clean_masks: np.ndarray
    noisy_masks: np.ndarray


def build_scenes(cfg: PipelineConfig, jitter: float, count: int, seed: int) -> SceneSet:
    spec = cfg.scene_spec(jitter)
    gt = scene_geotransform(spec)
    scenes = generate_dataset(spec, count, seed)
    size = cfg.scene_size
    return SceneSet(
        images=np.stack([s[0] for s in scenes]),
        clean_masks=np.stack([rasterize(s[1], gt, size, size) for s in scenes]),
        noisy_masks=np.stack([rasterize(s[2], gt, size, size) for s in scenes]),
    )


def _fuzzy(cfg: PipelineConfig, masks: np.ndarray) -> np.ndarray:
    spec = cfg.kernel_spec()
    return np.stack([fuzzify_mask(m, spec, cfg.padding) for m in masks])


def run_experiment(cfg: PipelineConfig, out_dir: str | Path | None = None) -> dict:
    unet = cfg.unet_config()
    if unet.out_channels not in (1, 2):
        raise ValueError("the experiment runs the binary task only (classes = 2)")
    seeds = np.random.SeedSequence(cfg.seed).generate_state(2 * len(cfg.noise_levels) + 1, dtype=np.uint32)
    runs = ["conventional"] + list(cfg.experiment_losses)
    levels = []
    for li, jitter in enumerate(cfg.noise_levels):
        train_set = build_scenes(cfg, jitter, cfg.n_train, int(seeds[2 * li]))
        test_set = build_scenes(cfg, jitter, cfg.n_test, int(seeds[2 * li + 1]))
        test_fuzzy = _fuzzy(cfg, test_set.clean_masks)
        noisy_fuzzy = _fuzzy(cfg, train_set.noisy_masks)
        results = {}
        for run in runs:
            targets = train_set.noisy_masks if run == "conventional" else noisy_fuzzy
            loss = "bce-full" if run == "conventional" else run
            fit = train(train_set.images, targets, unet, loss=loss, epochs=cfg.experiment_epochs,
                        seed=int(seeds[-1]), batch_size=cfg.batch_size, lr=cfg.lr,
                        lr_decay=cfg.lr_decay, max_steps=cfg.max_steps or None)
            probs = np.stack([predict_image(unet, fit.params, img, cfg.scene_size)
                              for img in test_set.images])
            labels = assign_classes(probs, cfg.threshold)
            report = MetricsReport(confusion(labels, test_set.clean_masks, 2),
                                   regression_metrics(probs[..., -1], test_fuzzy))
            results[run] = {"metrics": report.as_dict(), "history": fit.history}
            if out_dir is not None:
                maps = Path(out_dir) / "maps" / f"noise_{jitter:g}"
                maps.mkdir(parents=True, exist_ok=True)
                io.write_heatmap_png(maps / f"{run}_prob.png", probs[0, ..., -1])
                io.write_mask_png(maps / f"{run}_seg.png", labels[0])
                io.write_fzm(maps / f"{run}_prob.fzm", probs[0, ..., -1].astype(np.float32))
        if out_dir is not None:
            maps = Path(out_dir) / "maps" / f"noise_{jitter:g}"
            io.write_rgb(maps / "image.png", test_set.images[0])
            io.write_mask_png(maps / "clean_gt.png", test_set.clean_masks[0])
            io.write_heatmap_png(maps / "clean_fuzzy_gt.png", test_fuzzy[0])
        levels.append({"jitter_px": float(jitter), "runs": results})
    return {
        "settings": {
            "seed": cfg.seed, "sigma_px": cfg.sigma_px, "kernel": cfg.kernel_variant,
            "kernel_norm": cfg.kernel_norm, "scene_size": cfg.scene_size,
            "n_train": cfg.n_train, "n_test": cfg.n_test, "epochs": cfg.experiment_epochs,
            "lr": cfg.lr, "batch_size": cfg.batch_size, "depth": cfg.depth,
            "base_channels": cfg.base_channels, "runs": runs,
        },
        "levels": levels,
    }


def _pct(x: float) -> str:
    return f"{100 * x:6.2f}"


def render_report(result: dict) -> str:
    s = result["settings"]
    runs = s["runs"]
    out = [
        "# Conventional vs fuzzy training on synthetic scenes",
        "",
        f"seed={s['seed']} sigma_px={s['sigma_px']:g} kernel={s['kernel']}/{s['kernel_norm']} "
        f"scene={s['scene_size']}px train={s['n_train']} test={s['n_test']} "
        f"epochs={s['epochs']} lr={s['lr']:g} batch={s['batch_size']} "
        f"unet=depth{s['depth']}/base{s['base_channels']}",
        "",
        "## Table A - classification metrics vs clean hard GT (all values in %)",
        "",
        "| noise (px) | training | Background | Plants | OA | Kappa | F1 |",
        "|---|---|---|---|---|---|---|",
    ]
    for level in result["levels"]:
        for run in runs:
            m = level["runs"][run]["metrics"]
            bg, fg = m["acc_per_class"]
            out.append(f"| {level['jitter_px']:g} | {RUN_LABELS[run]} | {_pct(bg)} | {_pct(fg)} | "
                       f"{_pct(m['oa'])} | {_pct(m['kappa'])} | {_pct(m['f1_fg'])} |")
    out += [
        "",
        "## Table B - regression metrics vs clean fuzzy GT (MSE lower is better)",
        "",
        "| noise (px) | metric | " + " | ".join(RUN_LABELS[r] for r in runs) + " |",
        "|---|---|" + "---|" * len(runs),
    ]
    for level in result["levels"]:
        for key, name in (("mse", "MSE"), ("cosine_sim", "Cosine Sim.")):
            vals = " | ".join(f"{level['runs'][r]['metrics'][key]:.4f}" for r in runs)
            out.append(f"| {level['jitter_px']:g} | {name} | {vals} |")
    out += ["", "## Direction of effect (MSE vs clean fuzzy GT)", ""]
    for level in result["levels"]:
        conv = level["runs"]["conventional"]["metrics"]["mse"]
        fuzzy = [r for r in runs if r != "conventional"]
        if not fuzzy:
            continue
        best = min(fuzzy, key=lambda r: level["runs"][r]["metrics"]["mse"])
        best_mse = level["runs"][best]["metrics"]["mse"]
        verdict = "fuzzy better" if best_mse < conv else "conventional better or equal"
        out.append(f"- noise {level['jitter_px']:g} px: conventional {conv:.4f}, "
                   f"best fuzzy {RUN_LABELS[best]} {best_mse:.4f} -> {verdict}")
    return "\n".join(out) + "\n"


def write_experiment(cfg: PipelineConfig, out_dir: str | Path) -> dict:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    result = run_experiment(cfg, out_dir)
    (out_dir / "experiment_report.md").write_text(render_report(result), encoding="utf-8")
    (out_dir / "experiment_report.json").write_text(
        json.dumps(result, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return result
