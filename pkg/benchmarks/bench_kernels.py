"""Compiled vs pure-Python kernels on representative workloads.

Run from the repository root after building the extension::

    python benchmarks/bench_kernels.py [--repeat 5]

Each kernel is timed on identical inputs with both implementations, and the
outputs are compared so a speedup never hides a wrong answer.
"""
import argparse
import timeit

import numpy as np

from oscrit import _pykernels
from oscrit.cli.config import bundled_config_path, load_config
from oscrit.simulator import History, _step_grid

try:
    from oscrit import _ckernels
except ImportError:
    _ckernels = None


def workloads():
    rc = load_config(bundled_config_path("4.4"))
    prob = rc.problem
    arrays = prob.bank().arrays
    rng = np.random.default_rng(7)
    t = np.sort(rng.uniform(0.0, 300.0, 200_000))

    # dense-output lookups on a synthetic trace
    knots = np.linspace(0.0, 100.0, 20_001)
    y = np.cos(knots)
    sl = -np.sin(knots[1:])
    sr = -np.sin(knots[:-1])
    q = np.sort(rng.uniform(0.0, 100.0, 200_000))

    grid = _step_grid(prob, 0.0, 200.0, 0.01)
    m = prob.m
    p_ids = np.arange(0, 2 * m, 2, dtype=np.int64)
    d_ids = np.arange(1, 2 * m, 2, dtype=np.int64)
    zero = np.zeros(m, dtype=np.int64)
    kind, params, hbank = History.constant(1.0).kernel_args()

    return {
        "pw_eval (2e5 points)": lambda k: k.pw_eval(arrays, 1, t),
        "pw_antideriv (2e5 points)": lambda k: k.pw_antideriv(arrays, 1, t),
        "hermite_eval (2e5 points)": lambda k: k.hermite_eval(knots, y, sl, sr, q),
        f"rk4_march ({len(grid) - 1} steps)":
            lambda k: k.rk4_march(arrays, p_ids, d_ids, zero, kind, params, hbank, grid)[0],
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if _ckernels is None:
        print("compiled extension not built; only the Python kernels are available")
    print(f"{'kernel':<28} {'python [s]':>11} {'cython [s]':>11} {'speedup':>8}  max |diff|")
    for name, run in workloads().items():
        t_py = min(timeit.repeat(lambda: run(_pykernels), number=1, repeat=args.repeat))
        if _ckernels is None:
            print(f"{name:<28} {t_py:>11.4f}")
            continue
        t_c = min(timeit.repeat(lambda: run(_ckernels), number=1, repeat=args.repeat))
        diff = float(np.max(np.abs(np.asarray(run(_pykernels)) - np.asarray(run(_ckernels)))))
        print(f"{name:<28} {t_py:>11.4f} {t_c:>11.4f} {t_py / t_c:>7.1f}x  {diff:.2e}")


if __name__ == "__main__":
    main()
