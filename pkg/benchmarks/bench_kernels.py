"""Compare the compiled and numpy ball-sum kernels.

Usage: ``python3 benchmarks/bench_kernels.py [--repeat 5]``. Cases mirror the
sizes used by the tent-space functionals: a 1-D time mesh of ball radii on
N = 256 and a 2-D grid with N = 32.
"""
import argparse
import timeit

import numpy as np

from tentlab import _kernels
from tentlab.tentspaces import _stencil

CASES = [
    ("1d N=128, 30 radii", 1, 128, np.geomspace(0.01, 0.4, 30)),
    ("1d N=256, 30 radii", 1, 256, np.geomspace(0.005, 0.4, 30)),
    ("2d N=16, 12 radii", 2, 16, np.geomspace(0.07, 0.4, 12)),
    ("2d N=32, 12 radii", 2, 32, np.geomspace(0.04, 0.4, 12)),
]


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    backends = _kernels.available_backends()
    rng = np.random.default_rng(0)
    names = sorted(backends)
    print(f"{'case':<22}" + "".join(f"{n + ' [ms]':>16}" for n in names) + f"{'speedup':>10}")
    for label, dim, N, radii in CASES:
        ptr, ody, odx, _ = _stencil(dim, N, 1.0, tuple(float(r) for r in radii))
        shape = (len(radii), 1, N) if dim == 1 else (len(radii), N, N)
        v = rng.standard_normal(shape)
        ref = np.asarray(backends["python"](v, ptr, ody, odx))
        best = {}
        for name in names:
            fn = backends[name]
            assert np.array_equal(np.asarray(fn(v, ptr, ody, odx)), ref)
            timer = timeit.Timer(lambda: fn(v, ptr, ody, odx))
            loops, _ = timer.autorange()
            best[name] = min(timer.repeat(args.repeat, loops)) / loops * 1e3
        speed = best["python"] / best["cython"] if "cython" in best else float("nan")
        print(f"{label:<22}" + "".join(f"{best[n]:>16.3f}" for n in names) + f"{speed:>9.1f}x")


if __name__ == "__main__":
    main()
