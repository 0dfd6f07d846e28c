"""Image quality metrics, a colorfulness diagnostic and parameter counting."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ShapeError
from .imaging import LUMA, ImageBuffer

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
PEAK = 255.0


def _same_dims(a: ImageBuffer, b: ImageBuffer):
    if a.pixels.shape != b.pixels.shape:
        raise ShapeError(f"image sizes differ: {a.pixels.shape} vs {b.pixels.shape}")


def psnr(a: ImageBuffer, b: ImageBuffer) -> float:
    """Peak signal-to-noise ratio in dB over all 3*H*W components.

    Identical images give ``math.inf``.
    """
    _same_dims(a, b)
    d = a.pixels.astype(np.float64) - b.pixels.astype(np.float64)
    mse = float(np.mean(d * d))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(PEAK * PEAK / mse)


def gaussian_window(size=SSIM_WINDOW, sigma=SSIM_SIGMA):
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return g / g.sum()


def _filter_valid(img, g):
    # separable correlation, valid region only
    rows = sliding_window_view(img, len(g), axis=0) @ g
    return sliding_window_view(rows, len(g), axis=1) @ g


def luma(img: ImageBuffer) -> np.ndarray:
    return img.pixels.astype(np.float64) @ LUMA


def ssim_map(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Local SSIM of two float planes on the 0..255 scale."""
    g = gaussian_window()
    if min(x.shape) < len(g):
        raise ShapeError(f"image {x.shape} smaller than the {len(g)}x{len(g)} SSIM window")
    c1 = (SSIM_K1 * PEAK) ** 2
    c2 = (SSIM_K2 * PEAK) ** 2
    mx = _filter_valid(x, g)
    my = _filter_valid(y, g)
    vx = _filter_valid(x * x, g) - mx * mx
    vy = _filter_valid(y * y, g) - my * my
    cxy = _filter_valid(x * y, g) - mx * my
    return ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))


def ssim(a: ImageBuffer, b: ImageBuffer) -> float:
    """Mean SSIM over the luma channel, 11x11 Gaussian window (sigma 1.5)."""
    _same_dims(a, b)
    return float(np.mean(ssim_map(luma(a), luma(b))))


def colorfulness(img: ImageBuffer) -> float:
    """Mean of (|R-G| + |G-B| + |B-R|) / (3*255); zero iff achromatic."""
    p = img.pixels.astype(np.int64)
    r, g, b = p[..., 0], p[..., 1], p[..., 2]
    return float(np.mean(np.abs(r - g) + np.abs(g - b) + np.abs(b - r)) / (3 * 255))


def count_parameters(model) -> dict:
    """Real scalars per layer (quaternion parameters count four each) and total."""
    per_layer = [{"layer": repr(layer), "count": layer.parameter_count()}
                 for layer in model.layers if layer.parameter_count()]
    return {"per_layer": per_layer, "total": sum(p["count"] for p in per_layer)}


def dense_parameter_count(n_in: int, n_out: int, quaternion: bool = False, bias: bool = False) -> int:
    """Real scalars of a fully-connected layer; quaternion sizes are in quaternion units."""
    n = n_in * n_out + (n_out if bias else 0)
    return 4 * n if quaternion else n


@dataclass
class ImageRecord:
    image: str
    model: str
    reference: str            # "color" or "gray": what the reconstruction is scored against
    psnr_db: float
    ssim: float
    colorfulness: float
    input_colorfulness: float
    output_path: str | None = None

    @property
    def colorfulness_ratio(self):
        if self.input_colorfulness == 0:
            return math.nan
        return self.colorfulness / self.input_colorfulness


@dataclass
class EvalReport:
    records: list[ImageRecord] = field(default_factory=list)
    parameter_counts: dict = field(default_factory=dict)
    latent: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    seed: int | None = None

    def for_model(self, model):
        return [r for r in self.records if r.model == model]

    def get(self, model, image) -> ImageRecord:
        for r in self.records:
            if r.model == model and r.image == image:
                return r
        raise KeyError((model, image))

    def to_dict(self):
        recs = []
        for r in self.records:
            d = asdict(r)
            d["psnr_db"] = "inf" if math.isinf(r.psnr_db) else r.psnr_db
            recs.append(d)
        return {"format": "qcae-eval-report", "version": 1, "seed": self.seed,
                "config": self.config,
                "parameter_counts": self.parameter_counts, "latent": self.latent,
                "records": recs}

    @classmethod
    def from_dict(cls, d) -> "EvalReport":
        if not isinstance(d, dict) or d.get("format") != "qcae-eval-report":
            raise ValueError("not a qcae evaluation report")
        recs = []
        for r in d.get("records", []):
            r = dict(r)
            if r["psnr_db"] == "inf":
                r["psnr_db"] = math.inf
            recs.append(ImageRecord(**r))
        return cls(recs, d.get("parameter_counts", {}), d.get("latent", {}),
                   d.get("config", {}), d.get("seed"))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text) -> "EvalReport":
        return cls.from_dict(json.loads(text))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["model", "image", "reference", "psnr_db", "ssim", "colorfulness",
                    "input_colorfulness", "colorfulness_ratio"])
        for r in self.records:
            w.writerow([r.model, r.image, r.reference, repr(r.psnr_db), repr(r.ssim),
                        repr(r.colorfulness), repr(r.input_colorfulness),
                        repr(r.colorfulness_ratio)])
        return buf.getvalue()

    def format_table(self) -> str:
        lines = [f"{'model':<6} {'image':<12} {'ref':<6} {'PSNR dB':>8} {'SSIM':>6} "
                 f"{'color':>6} {'ratio':>6}"]
        for r in self.records:
            lines.append(f"{r.model:<6} {r.image:<12} {r.reference:<6} {r.psnr_db:8.2f} "
                         f"{r.ssim:6.3f} {r.colorfulness:6.3f} {r.colorfulness_ratio:6.3f}")
        for kind, counts in self.parameter_counts.items():
            lines.append(f"{kind} parameters: {counts.get('total')}")
        return "\n".join(lines)
