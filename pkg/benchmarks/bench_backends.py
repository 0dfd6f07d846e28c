"""Compare the compiled and numpy kernel backends.

Times im2col/col2im at the largest layer shapes of the desk-scale models and
a full training epoch (forward, backward, Adam) for QCAE and CAE.

    python benchmarks/bench_backends.py [--repeat 20] [--scale 4]
"""
import argparse
import timeit

import numpy as np

from qcae import backend
from qcae.experiment import TrainConfig, encode_gray, load_images
from qcae.model import ModelConfig, build_model
from qcae.optim import AdamState, adam_step, mse_loss


def kernel_cases(h, w):
    rng = np.random.default_rng(0)
    # (label, channels, height, width): inputs of the strided conv layers
    for label, c, hh, ww in (("layer1", 4, h, w), ("layer2", 32, h // 2, w // 2)):
        x = rng.standard_normal((c, hh, ww))
        cols = backend.im2col(x, 3, 2, 1)
        yield (f"im2col {label} {x.shape}", lambda x=x: backend.im2col(x, 3, 2, 1))
        yield (f"col2im {label} {x.shape}",
               lambda cols=cols, c=c, hh=hh, ww=ww: backend.col2im(cols, c, hh, ww, 3, 2, 1))


def epoch_cases(scale):
    train_img, _ = load_images(TrainConfig(scale=scale, test_images=[]))
    for kind in ("QCAE", "CAE"):
        model = build_model(ModelConfig.for_kind(kind), 0)
        x = encode_gray(train_img, kind)
        params = model.parameters()
        state = AdamState.for_params(params)

        def step(model=model, x=x, params=params, state=state):
            loss, g = mse_loss(model.forward(x), x)
            _, grads = model.backward(g)
            adam_step(params, grads, state)

        yield (f"epoch {kind} {train_img.height}x{train_img.width}", step)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--scale", type=int, default=4)
    args = ap.parse_args()

    available = ["python"]
    try:
        backend.use("compiled")
        available.append("compiled")
    except ImportError:
        print("compiled backend not built; timing numpy fallback only")

    h, w = TrainConfig(scale=args.scale).crop_size()
    results = {}
    for name in available:
        backend.use(name)
        for label, fn in [*kernel_cases(h, w), *epoch_cases(args.scale)]:
            fn()
            best = min(timeit.repeat(fn, number=1, repeat=args.repeat))
            results.setdefault(label, {})[name] = best

    print(f"{'case':<36}" + "".join(f"{n:>12}" for n in available) + ("     speedup" if len(available) > 1 else ""))
    for label, t in results.items():
        row = f"{label:<36}" + "".join(f"{t[n] * 1e3:>10.2f}ms" for n in available)
        if len(available) > 1:
            row += f"{t['python'] / t['compiled']:>11.2f}x"
        print(row)


if __name__ == "__main__":
    main()
