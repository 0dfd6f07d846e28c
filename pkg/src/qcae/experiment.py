"""Gray-to-color experiment: train on one gray image, evaluate on color images."""
from __future__ import annotations

import csv
import json
import logging
import math
import os
import time
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import backend
from .errors import ConfigError, DivergenceError, ShapeError
from .imaging import (ImageBuffer, center_crop, decode_to_image, encode,
                      encode_gray_quaternion, encode_real, load_image, save_image,
                      to_gray_luma)
from .metrics import EvalReport, ImageRecord, colorfulness, count_parameters, psnr, ssim
from .model import Model, ModelConfig, build_model, output_shape, save_checkpoint
from .optim import AdamState, adam_step, mse_loss

log = logging.getLogger("qcae")

KINDS = ("QCAE", "CAE")
SAMPLE_PREFIX = "sample:"
OUTPUT_DIR_ENV = "QCAE_OUTPUT_DIR"


def sample_image_path(name: str) -> Path:
    """Path of a bundled sample image (``rocket``, ``coffee``, ``astronaut``, ``chelsea``)."""
    p = resources.files("qcae") / "data" / f"{name}.png"
    return Path(str(p))


def resolve_image(ref: str) -> Path:
    if ref.startswith(SAMPLE_PREFIX):
        return sample_image_path(ref[len(SAMPLE_PREFIX):])
    return Path(ref)


def image_name(ref: str) -> str:
    return Path(ref[len(SAMPLE_PREFIX):] if ref.startswith(SAMPLE_PREFIX) else ref).stem


@dataclass
class TrainConfig:
    epochs: int = 3000
    lr: float = 5e-4
    seed: int = 0
    train_image: str = "sample:rocket"
    test_images: list[str] = field(default_factory=lambda: ["sample:coffee", "sample:astronaut"])
    # crop is (base // scale) rounded down to a multiple of stride**2
    scale: int = 4
    base_size: tuple[int, int] = (512, 768)
    output_dir: str = "runs/qcae"
    log_every: int = 250

    def validate(self):
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.lr <= 0:
            raise ConfigError("lr must be positive")
        if self.scale < 1:
            raise ConfigError("scale must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")

    def crop_size(self, multiple: int = 4) -> tuple[int, int]:
        h, w = (n // self.scale // multiple * multiple for n in self.base_size)
        if h < multiple or w < multiple:
            raise ConfigError(f"scale {self.scale} leaves an empty crop")
        return h, w


@dataclass
class ExperimentConfig:
    train: TrainConfig = field(default_factory=TrainConfig)
    models: dict[str, ModelConfig] = field(
        default_factory=lambda: {k: ModelConfig.for_kind(k) for k in KINDS})

    def to_dict(self):
        t = asdict(self.train)
        t["base_size"] = list(self.train.base_size)
        return {"train": t, "models": {k: m.to_dict() for k, m in self.models.items()}}

    @classmethod
    def from_dict(cls, d) -> "ExperimentConfig":
        unknown = set(d) - {"train", "models"}
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        t = dict(d.get("train", {}))
        if "base_size" in t:
            t["base_size"] = tuple(t["base_size"])
        try:
            train = TrainConfig(**t)
        except TypeError as e:
            raise ConfigError(str(e)) from None
        models = {k: ModelConfig.for_kind(k) for k in KINDS}
        for k, m in d.get("models", {}).items():
            k = k.upper()
            if k not in KINDS:
                raise ConfigError(f"unknown model kind {k!r}")
            models[k] = ModelConfig.from_dict({**models[k].to_dict(), **m, "kind": k})
        return cls(train, models)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as f:
            return ExperimentConfig.from_dict(json.load(f))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: {e}") from None


@dataclass
class TrainResult:
    losses: list[float]
    seconds: float


def encode_gray(img: ImageBuffer, kind: str):
    gray = to_gray_luma(img)
    return encode_gray_quaternion(gray) if kind == "QCAE" else encode_real(gray, gray=True)


def train(model: Model, image: ImageBuffer, cfg: TrainConfig) -> TrainResult:
    """Full-batch autoencoder training on the gray version of ``image``.

    One Adam step per epoch; the target is the encoded input itself.
    """
    cfg.validate()
    x = encode_gray(image, model.kind)
    params = model.parameters()
    state = AdamState.for_params(params, lr=cfg.lr)
    losses = []
    t0 = time.perf_counter()
    for epoch in range(cfg.epochs):
        y = model.forward(x)
        loss, grad = mse_loss(y, x)
        if not math.isfinite(loss):
            raise DivergenceError(epoch, loss)
        losses.append(loss)
        _, grads = model.backward(grad)
        adam_step(params, grads, state)
        if cfg.log_every and (epoch % cfg.log_every == 0 or epoch == cfg.epochs - 1):
            log.info("%s epoch %d/%d loss %.6g", model.kind, epoch + 1, cfg.epochs, loss)
    return TrainResult(losses, time.perf_counter() - t0)


def reconstruct(model: Model, img: ImageBuffer) -> ImageBuffer:
    return decode_to_image(model.forward(encode(img, model.kind)))


def evaluate(model: Model, test_images: dict[str, ImageBuffer], out_dir=None,
             expected_shape=None) -> list[ImageRecord]:
    """Reconstruct each color image and score it.

    QCAE output is scored against the color original, CAE output against
    the gray version of the original.
    """
    records = []
    for name, img in test_images.items():
        if expected_shape is not None and (img.height, img.width) != tuple(expected_shape):
            raise ShapeError(f"{name}: {img.height}x{img.width} differs from training size "
                             f"{expected_shape[0]}x{expected_shape[1]}")
        if output_shape(model.config, img.height, img.width)[-1] != (img.height, img.width):
            raise ShapeError(f"{name}: {img.height}x{img.width} does not round-trip through "
                             f"the encoder-decoder")
        out = reconstruct(model, img)
        reference = img if model.kind == "QCAE" else to_gray_luma(img)
        path = None
        if out_dir is not None:
            path = os.path.join(out_dir, f"{model.kind.lower()}_{name}.png")
            save_image(out, path)
        records.append(ImageRecord(
            image=name, model=model.kind,
            reference="color" if model.kind == "QCAE" else "gray",
            psnr_db=psnr(out, reference), ssim=ssim(out, reference),
            colorfulness=colorfulness(out), input_colorfulness=colorfulness(img),
            output_path=None if path is None else os.path.basename(path)))
    return records


def latent_summary(cfg: ModelConfig, h: int, w: int) -> dict:
    lh, lw = output_shape(cfg, h, w)[len(cfg.widths)]
    per_scalar = 4 if cfg.kind == "QCAE" else 1
    return {
        "latent_shape": [cfg.widths[-1], lh, lw],
        "latent_real_scalars": per_scalar * cfg.widths[-1] * lh * lw,
        "input_real_scalars": (4 if cfg.kind == "QCAE" else 3) * h * w,
        "input_distinct_gray_values": h * w,
    }


def load_images(cfg: TrainConfig):
    h, w = cfg.crop_size()
    train_img = center_crop(load_image(resolve_image(cfg.train_image)), h, w)
    tests = {}
    for ref in cfg.test_images:
        tests[image_name(ref)] = center_crop(load_image(resolve_image(ref)), h, w)
    return train_img, tests


def write_loss_curves(path, curves: dict[str, list[float]]):
    kinds = list(curves)
    n = max(len(c) for c in curves.values())
    with open(path, "w", newline="") as f:
        wr = csv.writer(f, lineterminator="\n")
        wr.writerow(["epoch", *kinds])
        for i in range(n):
            wr.writerow([i + 1, *(repr(curves[k][i]) if i < len(curves[k]) else "" for k in kinds)])


def reproduce(cfg: ExperimentConfig, output_dir=None, kinds=KINDS) -> EvalReport:
    """Train every model kind on the gray crop, evaluate on the color crops,
    and write checkpoints, reconstructions, report and CSV tables."""
    tcfg = cfg.train
    tcfg.validate()
    out = Path(output_dir or tcfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    train_img, tests = load_images(tcfg)
    h, w = train_img.height, train_img.width
    log.info("backend %s, crop %dx%d, %d epochs, seed %d", backend.NAME, h, w, tcfg.epochs, tcfg.seed)
    save_image(to_gray_luma(train_img), out / "train_gray.png")
    for name, img in tests.items():
        save_image(img, out / f"{name}_input.png")

    report = EvalReport(config=cfg.to_dict(), seed=tcfg.seed)
    curves = {}
    for kind in kinds:
        model = build_model(cfg.models[kind], tcfg.seed)
        result = train(model, train_img, tcfg)
        log.info("%s trained in %.1f s, final loss %.6g", kind, result.seconds, result.losses[-1])
        curves[kind] = result.losses
        save_checkpoint(model, out / f"{kind.lower()}.ckpt.json",
                        extra={"seed": tcfg.seed, "epochs": tcfg.epochs})
        report.records += evaluate(model, tests, out, expected_shape=(h, w))
        report.parameter_counts[kind] = count_parameters(model)
        report.latent[kind] = latent_summary(cfg.models[kind], h, w)

    write_loss_curves(out / "loss_curve.csv", curves)
    (out / "report.json").write_text(report.to_json())
    (out / "metrics.csv").write_text(report.to_csv())
    return report
