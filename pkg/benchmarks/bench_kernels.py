"""Compiled vs numpy Riccati RK4 kernel.

Runs both backends on the same stage blocks of the steel/epoxy cell and
reports the best-of-N wall time and the largest difference of the results.

    python3 benchmarks/bench_kernels.py [--d 5 9 17] [--steps 800] [--repeat 5]
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from shsaw import _kernels_py
from shsaw.cell import Circle, Lattice, Material, ToeplitzProfile, UnitCell
from shsaw.stateop import StateMatrix

try:
    from shsaw import _kernels
except ImportError:  # pragma: no cover - depends on the build
    _kernels = None


def cell() -> UnitCell:
    epoxy = Material("epoxy", 1.48, 1.14)
    steel = Material("steel", 80.0, 7.8)
    return UnitCell(Lattice(1.0, 2.0), epoxy, (Circle((0.5, 0.5), 0.45, steel),))


def run(d: int, steps: int, repeat: int) -> dict:
    blocks = StateMatrix(ToeplitzProfile(cell(), d), 2.5, 2.0).blocks(steps)
    alpha = -4.5 + 4.5j
    r0 = np.eye(2 * d, dtype=complex) / (alpha - 1)
    out = {"d": d, "steps": steps}
    ref = _kernels_py.riccati_rk4(blocks.upper, blocks.lower, alpha, r0)
    out["numpy_s"] = min(timeit.repeat(lambda: _kernels_py.riccati_rk4(blocks.upper, blocks.lower, alpha, r0),
                                       number=1, repeat=repeat))
    if _kernels is not None:
        fast = _kernels.riccati_rk4(blocks.upper, blocks.lower, alpha, r0)
        out["compiled_s"] = min(timeit.repeat(lambda: _kernels.riccati_rk4(blocks.upper, blocks.lower, alpha, r0),
                                              number=1, repeat=repeat))
        out["max_diff"] = float(np.abs(fast - ref).max())
        out["speedup"] = out["numpy_s"] / out["compiled_s"]
    return out


def main(argv=None) -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--d", type=int, nargs="+", default=[1, 5, 9, 17])
    p.add_argument("--steps", type=int, default=800)
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)
    if _kernels is None:
        print("compiled extension not built; timing numpy only")
    print(f"{'d':>3} {'steps':>6} {'numpy [s]':>10} {'compiled [s]':>13} {'speedup':>8} {'max diff':>10}")
    for d in args.d:
        r = run(d, args.steps, args.repeat)
        print(f"{r['d']:>3} {r['steps']:>6} {r['numpy_s']:>10.4f} {r.get('compiled_s', float('nan')):>13.4f} "
              f"{r.get('speedup', float('nan')):>8.2f} {r.get('max_diff', float('nan')):>10.2e}")


if __name__ == "__main__":
    main()
