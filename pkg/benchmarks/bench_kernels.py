"""Time the compiled and pure-Python kernels on the same inputs.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import timeit

import numpy as np

from skillspace import kernels
from skillspace.synthetic import simple_structure_loadings


def _orthomax_case(b, c, seed):
    rng = np.random.default_rng(seed)
    lam = simple_structure_loadings(b, c, rng=rng)
    q, _ = np.linalg.qr(rng.standard_normal((c, c)))
    return lam @ q


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)
    try:
        kernels._pick("cython")
        backends = ["cython", "python"]
    except ImportError:
        print("compiled kernels unavailable; timing the Python backend only")
        backends = ["python"]

    cases = []
    for b, c in [(40, 8), (200, 20)]:
        lam = _orthomax_case(b, c, 0)
        cases.append((f"orthomax {b}x{c}", lambda be, lam=lam: kernels.orthomax_sweeps(lam, 1.0, 1e-9, 1000, backend=be)))
    pts = np.random.default_rng(1).standard_normal((2000, 8))
    cases.append(("maxmin 2000x8 k=50", lambda be: kernels.maxmin_order(pts, 0, 50, backend=be)))

    print(f"{'case':<22}" + "".join(f"{be:>12}" for be in backends) + ("     speedup" if len(backends) == 2 else ""))
    for name, fn in cases:
        times = [min(timeit.repeat(lambda: fn(be), number=1, repeat=args.repeat)) for be in backends]
        row = f"{name:<22}" + "".join(f"{t * 1e3:>10.2f}ms" for t in times)
        if len(times) == 2:
            row += f"{times[1] / times[0]:>11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
