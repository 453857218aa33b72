"""Compare the compiled and numpy kernel backends.

    python benchmarks/bench_kernels.py [--repeat N]

Times each kernel at a few map sizes, then one training step of the toy model,
on every available backend.
"""

import argparse
import timeit

import numpy as np

from gestformer import kernels
from gestformer.model import ModelConfig, init_weights
from gestformer.optim import Adam, cross_entropy

SIZES = [(8, 40, 32), (8, 40, 64), (32, 40, 64)]


def kernel_cases(batch, h, w):
    rng = np.random.default_rng(0)
    x4 = rng.normal(size=(batch, 1, h, w))
    x3 = x4[:, 0]
    wt = rng.normal(size=(1, 3, 3))
    bands = kernels.haar_forward(x3)
    return {
        "dwconv fwd": lambda: kernels.dwconv2d_forward(x4, wt),
        "dwconv bwd": lambda: kernels.dwconv2d_backward(x4, wt, x4),
        "pool7 fwd": lambda: kernels.avgpool2d_forward(x3, 7),
        "pool7 bwd": lambda: kernels.avgpool2d_backward(x3, 7),
        "haar fwd": lambda: kernels.haar_forward(x3),
        "haar inv": lambda: kernels.haar_inverse(bands),
    }


def train_step_case():
    cfg = ModelConfig(m=40, d_in=16, k=32, stages=2, n=3)
    model = init_weights(cfg, 0)
    rng = np.random.default_rng(1)
    x, y = rng.normal(size=(8, 40, 16)), rng.integers(0, 3, size=8)
    opt = Adam(list(model.parameters().values()))

    def step():
        opt.zero_grad()
        cross_entropy(model.logits(x), y).backward()
        opt.step()

    return step


def best_ms(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat)) * 1e3


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=30)
    args = parser.parse_args()

    backends = kernels.available_backends()
    previous = kernels.backend_name()
    print(f"{'case':<28}" + "".join(f"{b:>12}" for b in backends) + "     speedup")
    try:
        rows = []
        for size in SIZES:
            names = kernel_cases(*size).keys()
            for name in names:
                rows.append((f"{name} {size[0]}x{size[1]}x{size[2]}", size, name))
        for label, size, name in rows:
            times = []
            for b in backends:
                kernels.use_backend(b)
                times.append(best_ms(kernel_cases(*size)[name], args.repeat))
            print(_row(label, times))
        times = []
        for b in backends:
            kernels.use_backend(b)
            times.append(best_ms(train_step_case(), max(3, args.repeat // 5)))
        print(_row("train step (toy, batch 8)", times))
    finally:
        kernels.use_backend(previous)


def _row(label, times):
    cells = "".join(f"{t:>10.3f}ms" for t in times)
    speedup = f"{times[1] / times[0]:>10.2f}x" if len(times) == 2 else ""
    return f"{label:<28}{cells}{speedup}"


if __name__ == "__main__":
    main()
