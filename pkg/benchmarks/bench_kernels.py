"""Compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Each kernel runs on identical inputs in both backends; the table lists the
best wall time of each, the speed-up and the largest output difference.
"""

import argparse
import json
import sys
import time

import numpy as np

from blaschke_lab import _pykernels as py
from blaschke_lab import kernels

try:
    from blaschke_lab import _kernels as cy
except ImportError:
    cy = None


def cases(rng):
    zeros = np.array([0.3 - 0.2j, -0.45 + 0.1j])
    d = 3
    t = rng.uniform(0, 1, 200_000)
    digits = rng.integers(0, d, size=(4096, 60))
    seed = rng.uniform(0, 1, 4096)
    M = 2048
    xs = np.arange(M) / M
    zeta = np.exp(2j * np.pi * xs)
    eta = np.exp(2j * np.pi * (xs + 0.05 * np.sin(2 * np.pi * xs)))
    r = 0.9 * np.sqrt(rng.uniform(size=2000))
    pts = r * np.exp(2j * np.pi * rng.uniform(size=2000))
    xi0 = py.poisson_mean(zeta, eta, pts)
    xi, _ = py.de_barycenter(zeta, eta, pts, xi0)
    return {
        "lift": (lambda k: k.lift(zeros, d, t)),
        "lift_derivative": (lambda k: k.lift_derivative(zeros, t)),
        "inverse_lift": (lambda k: k.inverse_lift(zeros, d, t * d)),
        "pullback": (lambda k: k.pullback(zeros, d, digits, seed)),
        "poisson_mean": (lambda k: k.poisson_mean(zeta, eta, pts)),
        "de_barycenter": (lambda k: k.de_barycenter(zeta, eta, pts, xi0)[0]),
        "de_dilatation": (lambda k: k.de_dilatation(zeta, eta, pts, xi)),
    }


def best_time(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", default=None)
    a = ap.parse_args(argv)
    if cy is None:
        print("compiled extension not built; only the fallback is available", file=sys.stderr)
        return 1
    rng = np.random.default_rng(0)
    rows = []
    print(f"active backend: {kernels.BACKEND}")
    print(f"{'kernel':18s} {'python [s]':>11s} {'cython [s]':>11s} {'speed-up':>9s} {'max diff':>10s}")
    for name, run in cases(rng).items():
        tp, op = best_time(lambda: run(py), a.repeat)
        tc, oc = best_time(lambda: run(cy), a.repeat)
        diff = float(np.max(np.abs(np.asarray(op) - np.asarray(oc))))
        rows.append({"kernel": name, "python": tp, "cython": tc, "speedup": tp / tc, "max_diff": diff})
        print(f"{name:18s} {tp:11.4f} {tc:11.4f} {tp / tc:9.1f} {diff:10.1e}")
    if a.json:
        with open(a.json, "w") as fh:
            json.dump(rows, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
