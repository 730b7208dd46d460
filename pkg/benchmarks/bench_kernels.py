"""Time one SGD epoch and one batched loss/gradient call on each backend.

    python benchmarks/bench_kernels.py [--n 5000] [--repeat 5]
"""

import argparse
import time

import numpy as np

from ordinalcs import _pykernels
from ordinalcs.cost_matrices import quadratic_cost_matrix
from ordinalcs.losses import smoothing_targets

try:
    from ordinalcs import _kernels
except ImportError:
    _kernels = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=5000)
    ap.add_argument("--dim", type=int, default=8)
    ap.add_argument("--hidden", type=int, default=16)
    ap.add_argument("--classes", type=int, default=5)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    N, D, H, C = args.n, args.dim, args.hidden, args.classes
    X = rng.normal(size=(N, D))
    y = rng.integers(0, C, N).astype(np.intp)
    order = rng.permutation(N).astype(np.intp)
    M = quadratic_cost_matrix(C)
    T = np.ascontiguousarray(smoothing_targets(C, 1.0))
    Z = rng.normal(size=(N, C))

    backends = {"python": _pykernels}
    if _kernels is not None:
        backends["cython"] = _kernels
    else:
        print("compiled kernels not built; timing the numpy fallback only")

    cases = {
        "loss_grad_batch (nuls+cs)": lambda k: k.loss_grad_batch(Z, y, 0, 1.0, M, T, 1.0, 2.0),
        "loss_grad_batch (focal+cs)": lambda k: k.loss_grad_batch(Z, y, 1, 1.0, M, T, 1.0, 2.0),
        "sgd_epoch_linear": lambda k: k.sgd_epoch_linear(
            rng.normal(size=(C, D)) * 0.1, np.zeros(C), X, y, order, 8, 1e-3, 0, 1.0, M, T, 1.0, 2.0),
        "sgd_epoch_mlp": lambda k: k.sgd_epoch_mlp(
            rng.normal(size=(H, D)) * 0.1, np.zeros(H), rng.normal(size=(C, H)) * 0.1, np.zeros(C),
            X, y, order, 8, 1e-3, 0, 1.0, M, T, 1.0, 2.0),
    }
    print(f"N={N} D={D} H={H} C={C}, best of {args.repeat}")
    print(f"{'case':<28}" + "".join(f"{name:>12}" for name in backends) + "     speedup")
    for label, fn in cases.items():
        t = {name: best_of(lambda: fn(k), args.repeat) for name, k in backends.items()}
        row = f"{label:<28}" + "".join(f"{t[name] * 1e3:>10.2f}ms" for name in backends)
        if "cython" in t:
            row += f"   {t['python'] / t['cython']:>8.1f}x"
        print(row)


if __name__ == "__main__":
    main()
