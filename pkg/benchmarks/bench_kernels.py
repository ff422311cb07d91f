"""Compare the compiled kernels with the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Each workload is sized like a real call site: a 2^16-point transform,
one histogram chunk of single-neuron SGD, a block of sample minibatches,
and 1000 ResNet SGD steps at n=30, width 40, depth 5.
The compiled extension must be built (pip install -e .); otherwise only
the fallback is timed.
"""
import argparse
import timeit

import numpy as np

from staircase import _kernels


def workloads(rng):
    P = rng.choice([-1.0, 1.0], size=(64, 3))
    r0 = rng.normal(size=64)
    weights = rng.multinomial(64, np.full(64, 1 / 64), size=256) / 64.0
    Pb = rng.choice([-1.0, 1.0], size=(256 * 64, 3))
    rb = rng.normal(size=256 * 64)
    n, width, depth, m = 30, 40, 5, 20_000
    X = rng.choice([-1.0, 1.0], size=(m, n))
    y = X[:, 0] + X[:, 0] * X[:, 1]
    net = [
        rng.normal(0, 0.1, (width, n)),
        np.zeros(width),
        rng.normal(0, 0.08, (depth, width, width)),
        np.zeros((depth, width)),
        rng.normal(0, 0.08, width),
        np.zeros(1),
    ]
    table = rng.normal(size=1 << 16)

    def fwht(k):
        a = table.copy()
        return lambda: k.fwht(a)

    def weighted(k):
        return lambda: k.neuron_sgd_weighted(P, r0, weights, np.full(4, 0.3), np.full(3, 1e-3), 1e-3, 0.0)

    def batched(k):
        return lambda: k.neuron_sgd_batched(Pb, rb, 64, np.full(4, 0.3), np.full(3, 1e-3), 1e-3, 0.0)

    def resnet(k):
        params = [a.copy() for a in net]
        losses = np.zeros(1000)
        return lambda: k.resnet_sgd(*params, X, y, 0, 1000, 20, 0.01, losses)

    return {
        "fwht 2^16": fwht,
        "neuron_sgd_weighted 256 steps": weighted,
        "neuron_sgd_batched 256 x B=64": batched,
        "resnet_sgd 1000 steps": resnet,
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = {"python": _kernels.get_backend("python")}
    try:
        backends["cython"] = _kernels.get_backend("cython")
    except ImportError:
        print("compiled extension not built; timing the fallback only")
    rng = np.random.default_rng(0)
    print(f"{'workload':34s}" + "".join(f"{b:>12s}" for b in backends) + ("     speedup" if len(backends) == 2 else ""))
    for name, make in workloads(rng).items():
        best = {}
        for b, k in backends.items():
            best[b] = min(timeit.repeat(make(k), number=1, repeat=args.repeat))
        row = f"{name:34s}" + "".join(f"{best[b] * 1e3:10.2f}ms" for b in backends)
        if len(best) == 2:
            row += f"{best['python'] / best['cython']:11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
