"""Encoder-decoder assembly and weight checkpoints."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError, ShapeError
from .layers import Hardtanh, QConvLayer, RealConvLayer
from .qtensor import QTensor

CHECKPOINT_VERSION = 1


@dataclass
class ModelConfig:
    kind: str = "QCAE"
    widths: tuple[int, ...] = (8, 16)
    kernel: int = 3
    stride: int = 2
    padding: int = 1
    output_padding: int = 1
    activation: str = "hardtanh"

    @classmethod
    def for_kind(cls, kind: str, **overrides) -> "ModelConfig":
        kind = kind.upper()
        widths = (8, 16) if kind == "QCAE" else (32, 64)
        return cls(kind=kind, widths=widths, **overrides)

    @property
    def io_channels(self) -> int:
        # one quaternion channel carries the pixel, three real channels for the CAE
        return 1 if self.kind == "QCAE" else 3

    def validate(self):
        if self.kind not in ("QCAE", "CAE"):
            raise ConfigError(f"unknown model kind {self.kind!r}")
        if not self.widths or any(int(w) < 1 for w in self.widths):
            raise ConfigError(f"invalid feature widths {self.widths}")
        if self.kernel < 1 or self.stride < 1 or self.padding < 0:
            raise ConfigError("kernel and stride must be positive, padding non-negative")
        if not 0 <= self.output_padding < self.stride:
            raise ConfigError("output_padding must lie in [0, stride)")
        if self.activation != "hardtanh":
            raise ConfigError(f"unsupported activation {self.activation!r}")

    def to_dict(self):
        d = asdict(self)
        d["widths"] = list(self.widths)
        return d

    @classmethod
    def from_dict(cls, d) -> "ModelConfig":
        d = dict(d)
        if "widths" in d:
            d["widths"] = tuple(int(w) for w in d["widths"])
        try:
            return cls(**d)
        except TypeError as e:
            raise ConfigError(str(e)) from None


class Model:
    """A feed-forward stack of layers with a cached forward pass."""

    def __init__(self, config: ModelConfig, layers):
        self.config = config
        self.layers = list(layers)
        self._caches = None

    @property
    def kind(self):
        return self.config.kind

    def forward(self, x):
        caches = []
        for layer in self.layers:
            x, cache = layer.forward(x)
            caches.append(cache)
        self._caches = caches
        return x

    __call__ = forward

    def backward(self, grad):
        """Backpropagate ``grad`` through the last forward call.

        Returns (grad_input, parameter gradients in :meth:`parameters` order).
        """
        if self._caches is None:
            raise RuntimeError("backward called before forward")
        per_layer = []
        for layer, cache in zip(reversed(self.layers), reversed(self._caches)):
            grad, g = layer.backward(grad, cache)
            per_layer.append(g)
        per_layer.reverse()
        flat = [g[name] for layer, g in zip(self.layers, per_layer)
                for name in layer.parameters()]
        return grad, flat

    def named_parameters(self):
        for i, layer in enumerate(self.layers):
            for name, p in layer.parameters().items():
                yield f"{i}.{name}", p

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def parameter_counts(self):
        return [layer.parameter_count() for layer in self.layers]

    def __repr__(self):
        return f"Model({self.kind}: " + " -> ".join(map(repr, self.layers)) + ")"


def build_model(cfg: ModelConfig, seed) -> Model:
    """Two strided conv encoders, two transposed-conv decoders, hardtanh after each."""
    cfg.validate()
    rng = np.random.default_rng(seed)
    cls = QConvLayer if cfg.kind == "QCAE" else RealConvLayer
    chans = [cfg.io_channels, *cfg.widths]
    layers = []
    for c_in, c_out in zip(chans[:-1], chans[1:]):
        layers.append(cls.create(c_in, c_out, cfg.kernel, rng, stride=cfg.stride,
                                 padding=cfg.padding))
        layers.append(Hardtanh())
    rev = chans[::-1]
    for c_in, c_out in zip(rev[:-1], rev[1:]):
        layers.append(cls.create(c_in, c_out, cfg.kernel, rng, stride=cfg.stride,
                                 padding=cfg.padding, transposed=True,
                                 output_padding=cfg.output_padding))
        layers.append(Hardtanh())
    return Model(cfg, layers)


def output_shape(cfg: ModelConfig, h: int, w: int):
    """Spatial sizes after each conv/tconv layer for an h x w input."""
    from .layers import conv_output_size, tconv_output_size
    sizes = [(h, w)]
    for _ in cfg.widths:
        h = conv_output_size(h, cfg.kernel, cfg.stride, cfg.padding)
        w = conv_output_size(w, cfg.kernel, cfg.stride, cfg.padding)
        sizes.append((h, w))
    for _ in cfg.widths:
        h = tconv_output_size(h, cfg.kernel, cfg.stride, cfg.padding, cfg.output_padding)
        w = tconv_output_size(w, cfg.kernel, cfg.stride, cfg.padding, cfg.output_padding)
        sizes.append((h, w))
    return sizes


# ---------------------------------------------------------------------------
# checkpoints: JSON document, floats written with repr so they round-trip exactly


def save_checkpoint(model: Model, path, extra=None):
    layers = []
    for layer in model.layers:
        entry = {"type": type(layer).__name__}
        if not isinstance(layer, Hardtanh):
            entry.update(transposed=layer.transposed, stride=layer.stride,
                         padding=layer.padding, output_padding=layer.output_padding,
                         params={name: {"shape": list(p.shape), "values": p.reshape(-1).tolist()}
                                 for name, p in layer.parameters().items()})
        layers.append(entry)
    doc = {
        "format": "qcae-checkpoint",
        "version": CHECKPOINT_VERSION,
        "component_order": ["r", "x", "y", "z"],
        "config": model.config.to_dict(),
        "layers": layers,
    }
    if extra:
        doc["extra"] = extra
    with open(path, "w") as f:
        json.dump(doc, f, indent=1)
        f.write("\n")


def load_checkpoint(path) -> Model:
    with open(path) as f:
        doc = json.load(f)
    if doc.get("format") != "qcae-checkpoint":
        raise ConfigError(f"{path} is not a qcae checkpoint")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ConfigError(f"unsupported checkpoint version {doc.get('version')!r}")
    cfg = ModelConfig.from_dict(doc["config"])
    layers = []
    for entry in doc["layers"]:
        if entry["type"] == "Hardtanh":
            layers.append(Hardtanh())
            continue
        cls = {"QConvLayer": QConvLayer, "RealConvLayer": RealConvLayer}.get(entry["type"])
        if cls is None:
            raise ConfigError(f"unknown layer type {entry['type']!r}")
        params = {k: np.array(v["values"], dtype=np.float64).reshape(v["shape"])
                  for k, v in entry["params"].items()}
        layers.append(cls(params["weight"], params.get("bias"), entry["stride"],
                          entry["padding"], entry["transposed"], entry["output_padding"]))
    return Model(cfg, layers)
