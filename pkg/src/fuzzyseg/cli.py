"""``fuzzyseg`` command-line front end.

Failures exit with status 1 and print one JSON object on stderr, e.g.::

    {"command": "train", "error": "FileNotFoundError", "message": "..."}
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from contextlib import nullcontext
from pathlib import Path

import numpy as np

from . import io
from .config import PipelineConfig, load_config
from .experiment import write_experiment
from .fuzzify import fuzzify_mask
from .geometry import rasterize, read_annotations_csv
from .metrics import MetricsReport, confusion, regression_metrics
from .model import UNetConfig, assign_classes, check_params, predict_image, train, zero_params
from .tiling import extract_patches

log = logging.getLogger("fuzzyseg")


def _stems(directory: str | Path, suffix: str) -> list[Path]:
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"directory not found: {directory}")
    files = sorted(p for p in directory.iterdir() if p.suffix.lower() == suffix)
    if not files:
        raise FileNotFoundError(f"no *{suffix} files in {directory}")
    return files


def _image_size(cfg: PipelineConfig, stem: str) -> tuple[int, int]:
    for ext in (".png", ".jpg", ".jpeg", ".tif", ".tiff"):
        path = Path(cfg.image_dir) / f"{stem}{ext}"
        if path.exists():
            h, w = io.read_rgb(path).shape[:2]
            return h, w
    raise FileNotFoundError(f"no image for {stem!r} in {cfg.image_dir}")


def cmd_rasterize(cfg: PipelineConfig) -> list[Path]:
    out = Path(cfg.mask_dir)
    out.mkdir(parents=True, exist_ok=True)
    gt = cfg.geo_transform()
    written = []
    for csv_path in _stems(cfg.annotation_dir, ".csv"):
        h, w = _image_size(cfg, csv_path.stem)
        mask = rasterize(read_annotations_csv(csv_path), gt, h, w)
        target = out / f"{csv_path.stem}.png"
        io.write_mask_png(target, mask, cfg.classes)
        written.append(target)
    return written


def cmd_fuzzify(cfg: PipelineConfig) -> list[Path]:
    out = Path(cfg.fuzzy_dir)
    out.mkdir(parents=True, exist_ok=True)
    spec = cfg.kernel_spec()
    written = []
    for mask_path in _stems(cfg.mask_dir, ".png"):
        mask = io.read_mask_png(mask_path, cfg.classes)
        target = out / f"{mask_path.stem}.fzm"
        io.write_fzm(target, fuzzify_mask(mask, spec, cfg.padding).astype(np.float32))
        written.append(target)
    return written


def _load_target(cfg: PipelineConfig, stem: str) -> np.ndarray:
    mask_path = Path(cfg.mask_dir) / f"{stem}.png"
    if cfg.target == "hard":
        return io.read_mask_png(mask_path, cfg.classes)
    fzm = Path(cfg.fuzzy_dir) / f"{stem}.fzm"
    if fzm.exists():
        return io.read_fzm(fzm).astype(np.float64)
    return fuzzify_mask(io.read_mask_png(mask_path, cfg.classes), cfg.kernel_spec(), cfg.padding)


def cmd_train(cfg: PipelineConfig) -> Path:
    unet = cfg.unet_config()
    grid = cfg.tile_grid()
    images, targets = [], []
    for img_path in _stems(cfg.image_dir, ".png"):
        image = io.read_rgb(img_path)
        target = _load_target(cfg, img_path.stem)
        if target.shape[:2] != image.shape[:2]:
            raise ValueError(f"{img_path.stem}: target {target.shape} does not match image {image.shape}")
        images += [p for p, _, _ in extract_patches(image, grid)]
        targets += [p for p, _, _ in extract_patches(target, grid)]
    fit = train(np.stack(images), np.stack(targets), unet, loss=cfg.loss, epochs=cfg.epochs,
                seed=cfg.seed, batch_size=cfg.batch_size, lr=cfg.lr, lr_decay=cfg.lr_decay,
                max_steps=cfg.max_steps or None)
    ckpt = cfg.checkpoint_path()
    ckpt.parent.mkdir(parents=True, exist_ok=True)
    io.write_checkpoint(ckpt, unet.to_dict(), fit.params)
    with open(Path(cfg.output_dir) / "loss_history.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "loss"])
        writer.writerows((i, repr(v)) for i, v in enumerate(fit.history))
    return ckpt


def load_model(path: str | Path):
    raw_cfg, params = io.read_checkpoint(path)
    unet = UNetConfig.from_dict(raw_cfg)
    store = zero_params(unet)
    store.update(params)
    check_params(unet, store)
    return unet, store


def cmd_predict(cfg: PipelineConfig) -> list[Path]:
    unet, params = load_model(cfg.checkpoint_path())
    out = Path(cfg.prediction_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for img_path in _stems(cfg.image_dir, ".png"):
        probs = predict_image(unet, params, io.read_rgb(img_path), cfg.patch)
        stem = img_path.stem
        io.write_fzm(out / f"{stem}.fzm", probs.astype(np.float32))
        io.write_heatmap_png(out / f"{stem}_prob.png", probs[..., -1])
        io.write_mask_png(out / f"{stem}_seg.png", assign_classes(probs, cfg.threshold),
                          max(cfg.classes, 2))
        written.append(out / f"{stem}.fzm")
    return written


def cmd_evaluate(cfg: PipelineConfig) -> MetricsReport:
    cm = None
    preds, fuzzies = [], []
    for fzm in _stems(cfg.prediction_dir, ".fzm"):
        probs = io.read_fzm(fzm, squeeze=False).astype(np.float64)
        mask = io.read_mask_png(Path(cfg.mask_dir) / f"{fzm.stem}.png", cfg.classes)
        labels = assign_classes(probs, cfg.threshold)
        part = confusion(labels, mask, cfg.classes)
        cm = part if cm is None else cm + part
        if cfg.classes == 2:
            preds.append(probs[..., -1].ravel())
            fuzzies.append(_fuzzy_reference(cfg, fzm.stem, mask).ravel())
    regression = regression_metrics(np.concatenate(preds), np.concatenate(fuzzies)) if preds else None
    report = MetricsReport(cm, regression)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.json").write_text(report.to_json(), encoding="utf-8")
    (out / "metrics.txt").write_text(report.to_text(), encoding="utf-8")
    return report


def _fuzzy_reference(cfg: PipelineConfig, stem: str, mask: np.ndarray) -> np.ndarray:
    fzm = Path(cfg.fuzzy_dir) / f"{stem}.fzm"
    if fzm.exists():
        return io.read_fzm(fzm).astype(np.float64)
    return fuzzify_mask(mask, cfg.kernel_spec(), cfg.padding)


def cmd_experiment(cfg: PipelineConfig) -> Path:
    out = Path(cfg.output_dir)
    write_experiment(cfg, out)
    return out / "experiment_report.md"


COMMANDS = {
    "rasterize": cmd_rasterize,
    "fuzzify": cmd_fuzzify,
    "train": cmd_train,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "experiment": cmd_experiment,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fuzzyseg", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="key = value config file")
    parser.add_argument("--loss", choices=["bce-paper", "bce-full", "mse", "cosine"])
    parser.add_argument("--sigma-px", type=float, dest="sigma_px")
    parser.add_argument("--patch", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--lr", type=float)
    parser.add_argument("--output-dir", dest="output_dir")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any config key (repeatable)")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def _thread_limit():
    raw = os.environ.get("FUZZYSEG_THREADS")
    if not raw:
        return nullcontext()
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=max(1, int(raw)))


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        overrides = {k: getattr(args, k) for k in
                     ("loss", "sigma_px", "patch", "seed", "epochs", "lr", "output_dir")}
        for item in args.set:
            key, sep, value = item.partition("=")
            if not sep:
                raise ValueError(f"--set expects KEY=VALUE, got {item!r}")
            overrides[key.strip().replace("-", "_")] = value
        cfg = load_config(args.config, overrides)
        Path(cfg.output_dir).mkdir(parents=True, exist_ok=True)
        with _thread_limit():
            result = COMMANDS[args.command](cfg)
    except Exception as exc:  # noqa: BLE001 - reported as one machine-readable line
        log.debug("command failed", exc_info=True)
        print(json.dumps({"command": args.command, "error": type(exc).__name__,
                          "message": str(exc)}), file=sys.stderr)
        return 1
    if isinstance(result, MetricsReport):
        print(result.to_text(), end="")
    elif isinstance(result, list):
        print(f"{args.command}: wrote {len(result)} file(s)")
    else:
        print(f"{args.command}: wrote {result}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
