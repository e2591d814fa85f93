"""Compare the compiled and pure-NumPy kernel backends.

    python benchmarks/bench_kernels.py [--repeat N] [--scale F]

Shapes are taken from the canonical network (scaled down by ``--scale`` to
keep runs short). Prints best-of-N wall time per kernel and the speedup.
"""
import argparse
import timeit

import numpy as np

from salicon import kernels, layers as L


def cases(scale: float):
    rng = np.random.default_rng(0)
    h, w = max(8, int(300 * scale)), max(8, int(400 * scale))
    x = rng.standard_normal((64, h, w)).astype(np.float32)
    cols = np.empty((64 * 9, h * w), np.float32)
    grad = np.zeros_like(x)
    oh, ow = L.pool_output_size(h, 2, 2), L.pool_output_size(w, 2, 2)
    x4 = x[None]
    _, arg = kernels.python.maxpool_forward(x4, 2, 2, 2, 2, oh, ow)
    gpool = rng.standard_normal((1, 64, oh, ow)).astype(np.float32)
    small = rng.standard_normal((1, 128, 19, 25)).astype(np.float32)
    th, tw = L.interp_taps(19, 38, np.float32), L.interp_taps(25, 50, np.float32)
    gres = rng.standard_normal((1, 128, 38, 50)).astype(np.float32)

    return {
        f"im2col 64x{h}x{w} 3x3": lambda m: (lambda: m.im2col(x, 3, 3, 1, 1, 1, 1, 0, h, w)),
        f"col2im 64x{h}x{w} 3x3": lambda m: (lambda: m.col2im_add(cols, grad, 3, 3, 1, 1, 1, 1, 0, h, w)),
        f"maxpool fwd 64x{h}x{w}": lambda m: (lambda: m.maxpool_forward(x4, 2, 2, 2, 2, oh, ow)),
        f"maxpool bwd 64x{h}x{w}": lambda m: (lambda: m.maxpool_backward(arg, gpool, h, w)),
        "resize fwd 128x19x25->38x50": lambda m: (lambda: m.resize_forward(small, *th, *tw)),
        "resize adj 128x38x50->19x25": lambda m: (lambda: m.resize_adjoint(gres, *th, *tw, 19, 25)),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--scale", type=float, default=0.5)
    args = ap.parse_args()
    if kernels.compiled is None:
        raise SystemExit("compiled kernels are not built; run `pip install -e . --no-build-isolation` first")
    print(f"{'kernel':<32} {'python ms':>10} {'cython ms':>10} {'speedup':>8}")
    for name, make in cases(args.scale).items():
        t = {}
        for label, mod in (("python", kernels.python), ("cython", kernels.compiled)):
            fn = make(mod)
            fn()
            t[label] = min(timeit.repeat(fn, number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<32} {t['python']:>10.2f} {t['cython']:>10.2f} {t['python'] / t['cython']:>7.1f}x")


if __name__ == "__main__":
    main()
