"""Sweeps of the ``(omega, k1)`` plane.

A scan evaluates the dispersion functions on a rectangular grid, one
``k1`` column at a time.  Each column then gets

* its transonic points, where ``N_p`` jumps, located by bisection on a
  continuous contour count and extrapolated to zero contour offset;
* its roots: sign changes of ``D_d3`` where ``N_p = 0`` and deep minima of
  ``D_saw`` where ``N_p > 0``, each classified.

Columns are linked into polylines (:class:`Branch`) afterwards.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .cell import UnitCell
from .dispersion import (
    DispersionSample,
    PointFailure,
    PointSolver,
    SolverSettings,
    classify_root,
    raw_trace_p,
    refine_minimum,
)
from .riccati import alpha_stream

__all__ = [
    "ScanGrid",
    "ScanOptions",
    "TransonicPoint",
    "Root",
    "ColumnResult",
    "Branch",
    "EffectiveSpeeds",
    "scan_grid",
    "scan_column",
    "locate_transonic",
    "transonic_points",
    "transonic_curves",
    "find_roots_on_column",
    "analyze_column",
    "analyze_grid",
    "trace_branches",
    "effective_speeds",
]

log = logging.getLogger(__name__)

#: Second contour radius used to extrapolate transonic points to ``r = 1``.
SECOND_RADIUS = 0.995


@dataclass(frozen=True)
class ScanGrid:
    """Rectangular ``(k1, omega)`` grid; ``omega`` runs from ``omega_min`` to ``omega_max``."""

    k1_min: float
    k1_max: float
    n_k: int
    omega_max: float
    n_omega: int
    omega_min: float = 0.0

    def __post_init__(self):
        if self.n_k < 2 or self.n_omega < 2:
            raise ValueError("a scan grid needs at least 2 points along each axis")
        if not self.k1_max >= self.k1_min >= 0:
            raise ValueError("k1 range must satisfy 0 <= k1_min <= k1_max")
        if not self.omega_max >= self.omega_min >= 0:
            raise ValueError("omega range must satisfy 0 <= omega_min <= omega_max")

    def validate(self, cell: UnitCell) -> None:
        if self.k1_max > math.pi / cell.a1 * (1 + 1e-12):
            raise ValueError(f"k1_max={self.k1_max} exceeds the zone edge pi/a1={math.pi / cell.a1}")

    @property
    def k1_values(self) -> np.ndarray:
        return np.linspace(self.k1_min, self.k1_max, self.n_k)

    @property
    def omega_values(self) -> np.ndarray:
        return np.linspace(self.omega_min, self.omega_max, self.n_omega)

    @property
    def omega_step(self) -> float:
        return (self.omega_max - self.omega_min) / (self.n_omega - 1)

    @property
    def omega_tol(self) -> float:
        return 1e-4 * self.omega_max


@dataclass(frozen=True)
class ScanOptions:
    """Root-finding knobs shared by all columns.

    ``omega_tol`` and ``link_tol`` default to ``1e-4 omega_max`` and three
    grid spacings.  ``min_threshold`` is the largest ``D_saw`` minimum in a
    propagative interval worth refining, ``refine_dd`` the truncation
    increment of the refinement test.
    """

    omega_tol: float | None = None
    link_tol: float | None = None
    min_threshold: float = 1e-2
    refine_dd: int = 4
    refine_ratio: float = 2.0
    transonic_rel_tol: float = 1e-6
    extrapolate: bool = True
    minima: bool = True


@dataclass(frozen=True)
class TransonicPoint:
    k1: float
    omega: float
    lower: int
    upper: int
    width: float
    omega_raw: float
    gap: bool = False


@dataclass(frozen=True)
class Root:
    k1: float
    omega: float
    kind: str
    source: str
    d_saw: float
    d_i: float
    bracket: float
    extra: dict = field(default_factory=dict, compare=False)


@dataclass
class ColumnResult:
    k1: float
    samples: list[DispersionSample]
    transonic: list[TransonicPoint] = field(default_factory=list)
    roots: list[Root] = field(default_factory=list)
    probes: list[DispersionSample] = field(default_factory=list)

    @property
    def flagged(self) -> int:
        return sum(s.failed for s in self.samples)


@dataclass
class Branch:
    kind: str
    points: list[tuple[float, float]]
    quality: list[float] = field(default_factory=list)

    @property
    def k1(self) -> np.ndarray:
        return np.array([p[0] for p in self.points])

    @property
    def omega(self) -> np.ndarray:
        return np.array([p[1] for p in self.points])

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class EffectiveSpeeds:
    c_saw: float | None
    c_tr: float | None

    @property
    def ratio(self) -> float | None:
        if self.c_saw is None or self.c_tr is None:
            return None
        return self.c_saw / self.c_tr


def scan_column(solver: PointSolver, k1: float, omegas, rng) -> list[DispersionSample]:
    """Samples along one ``k1`` column, in the order of ``omegas``."""
    return [solver.sample(float(w), float(k1), rng) for w in omegas]


def _column_rngs(settings: SolverSettings, n: int):
    return alpha_stream(settings.seed, n)


def _map(fn, items, threads: int):
    if threads <= 1:
        return [fn(*it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda it: fn(*it), items))


def scan_grid(cell: UnitCell, grid: ScanGrid, settings: SolverSettings | None = None,
              threads: int = 1) -> list[DispersionSample]:
    """One sample per grid node, ``k1``-major; failed nodes are flagged."""
    grid.validate(cell)
    solver = PointSolver(cell, settings)
    rngs = _column_rngs(solver.settings, grid.n_k)
    omegas = grid.omega_values
    cols = _map(lambda k, g: scan_column(solver, k, omegas, g), list(zip(grid.k1_values, rngs)), threads)
    return [s for col in cols for s in col]


def _count(solver: PointSolver, omega: float, k1: float, rng, radii, cache: dict) -> tuple[float, ...]:
    if omega not in cache:
        try:
            r0, _ = solver.resolvent(omega, k1, rng)
            cache[omega] = tuple(raw_trace_p(r0, r) for r in radii)
        except PointFailure:
            cache[omega] = tuple(float("nan") for _ in radii)
    return cache[omega]


def _bisect_count(f, lo: float, hi: float, below: bool, tol: float) -> tuple[float, float]:
    # f(lo) is on the lower-count side; find where f crosses its threshold
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        v = f(mid)
        if math.isnan(v):
            # an unusable midpoint is pushed aside by a small offset
            mid = lo + 0.49 * (hi - lo)
            v = f(mid)
            if math.isnan(v):
                break
        if (v < 0) == below:
            lo = mid
        else:
            hi = mid
    return lo, hi


def locate_transonic(solver: PointSolver, k1: float, lo: DispersionSample, hi: DispersionSample, rng,
                     tol: float, extrapolate: bool = True) -> TransonicPoint:
    """Localize the ``N_p`` jump between two samples of one column.

    The continuous count :func:`~shsaw.dispersion.raw_trace_p` crosses the
    mean of the two integer counts exactly where an eigenvalue crosses the
    contour.  With two contour radii the crossing is extrapolated to the unit
    circle assuming ``omega^2`` linear in ``log(r)^2``, which holds exactly
    for homogeneous media and to first order at any simple band edge.
    """
    r0 = solver.settings.contour_radius
    radii = (r0, SECOND_RADIUS) if extrapolate else (r0,)
    mid_count = 0.5 * (lo.n_p + hi.n_p)
    rising = hi.n_p > lo.n_p
    cache: dict = {}

    def g(j):
        def f(w):
            v = _count(solver, w, k1, rng, radii, cache)[j] - mid_count
            return v if rising else -v
        return f

    a, b = _bisect_count(g(0), lo.omega, hi.omega, True, tol)
    omega_raw = 0.5 * (a + b)
    omega = omega_raw
    if extrapolate and b - a <= tol:
        f1 = g(1)
        # tightest bracket for the second radius among points already evaluated
        pts = sorted(cache)
        below = [w for w in pts if not math.isnan(f1(w)) and f1(w) < 0]
        above = [w for w in pts if not math.isnan(f1(w)) and f1(w) >= 0]
        lo1 = max([lo.omega] + [w for w in below if w < min(above + [hi.omega])])
        hi1 = min([hi.omega] + [w for w in above if w > lo1])
        a1, b1 = _bisect_count(f1, lo1, hi1, True, tol)
        if b1 - a1 <= tol:
            w1 = 0.5 * (a1 + b1)
            e0, e1 = math.log(r0) ** 2, math.log(SECOND_RADIUS) ** 2
            w2 = (w1 * w1 * e0 - omega_raw * omega_raw * e1) / (e0 - e1)
            if w2 > 0:
                omega = math.sqrt(w2)
    return TransonicPoint(float(k1), float(omega), int(lo.n_p), int(hi.n_p), float(b - a), float(omega_raw),
                          gap=b - a > 3 * tol)


def _valid(s: DispersionSample) -> bool:
    return not s.failed and s.n_p is not None


def transonic_points(solver: PointSolver, k1: float, samples: list[DispersionSample], rng, tol: float,
                     extrapolate: bool = True) -> list[TransonicPoint]:
    """All ``N_p`` jumps of one column (consecutive valid samples with different counts)."""
    valid = [s for s in samples if _valid(s)]
    out = []
    for s0, s1 in zip(valid, valid[1:]):
        if s0.n_p != s1.n_p:
            out.append(locate_transonic(solver, k1, s0, s1, rng, tol, extrapolate))
    return out


def _bisect_sign(solver: PointSolver, k1: float, a: DispersionSample, b: DispersionSample, rng, tol: float):
    lo, hi = a, b
    while hi.omega - lo.omega > tol:
        mid = solver.sample(0.5 * (lo.omega + hi.omega), k1, rng)
        if not _valid(mid) or mid.n_p != 0:
            mid = solver.sample(lo.omega + 0.45 * (hi.omega - lo.omega), k1, rng)
            if not _valid(mid) or mid.n_p != 0:
                return None
        if (mid.d_d3 > 0) == (lo.d_d3 > 0):
            lo = mid
        else:
            hi = mid
    # one regula falsi step inside the final bracket
    fa, fb = lo.d_d3, hi.d_d3
    w = lo.omega - fa * (hi.omega - lo.omega) / (fb - fa) if fb != fa else 0.5 * (lo.omega + hi.omega)
    return w, hi.omega - lo.omega


def find_roots_on_column(solver: PointSolver, k1: float, samples: list[DispersionSample],
                         transonic: list[TransonicPoint], rng, options: ScanOptions, omega_tol: float,
                         probes: list[DispersionSample] | None = None) -> list[Root]:
    """Classified roots of one column.

    Non-propagative stretches are searched for sign changes of ``D_d3``;
    propagative ones for minima of ``D_saw`` below ``min_threshold`` that
    at least halve when ``d`` grows by ``refine_dd``.  Roots closer than
    ``2 omega_tol`` to a transonic point are marked indeterminate.
    """
    pts = sorted([s for s in list(samples) + list(probes or []) if _valid(s)], key=lambda s: s.omega)
    tr = np.array([t.omega for t in transonic] + [t.omega_raw for t in transonic])
    roots: list[Root] = []

    def near_transonic(w):
        return tr.size and np.min(np.abs(tr - w)) < 2 * omega_tol

    for s0, s1 in zip(pts, pts[1:]):
        if s0.n_p == 0 and s1.n_p == 0 and s0.d_d3 * s1.d_d3 < 0:
            found = _bisect_sign(solver, k1, s0, s1, rng, omega_tol)
            if found is None:
                continue
            w, width = found
            c = classify_root(solver, w, k1, rng)
            kind = "indeterminate" if near_transonic(w) else c.kind
            roots.append(Root(float(k1), float(w), kind, "d3", c.d_saw, c.d_i, width,
                              {"tol_saw": c.tol_saw, "u_norm": c.u_norm, "kind_raw": c.kind}))
    if options.minima:
        roots.extend(_propagative_minima(solver, k1, pts, rng, options, omega_tol))
    return sorted(roots, key=lambda r: r.omega)


def _propagative_minima(solver, k1, pts, rng, options, omega_tol) -> list[Root]:
    out = []
    for s_prev, s, s_next in zip(pts, pts[1:], pts[2:]):
        if not (s.n_p and s_prev.n_p == s.n_p == s_next.n_p):
            continue
        if not (s.d_saw < s_prev.d_saw and s.d_saw <= s_next.d_saw and s.d_saw < options.min_threshold):
            continue

        def f(w, sol=solver):
            x = sol.sample(w, k1, rng)
            return x.d_saw if _valid(x) and x.n_p == s.n_p else np.inf

        w, lam = refine_minimum(f, s_prev.omega, s_next.omega, omega_tol)
        if not lam < options.min_threshold:
            continue
        fine = PointSolver(solver.cell, solver.settings.with_d(solver.d + options.refine_dd))
        half = max(omega_tol, 0.25 * (s_next.omega - s_prev.omega))

        def g(x):
            y = fine.sample(x, k1, rng)
            return y.d_saw if _valid(y) else np.inf

        w2, lam2 = refine_minimum(g, w - half, w + half, omega_tol)
        kind = "surface" if lam2 * options.refine_ratio <= lam else "indeterminate"
        out.append(Root(float(k1), float(w), kind, "minimum", float(lam), float("nan"), omega_tol,
                        {"d_saw_refined": float(lam2), "omega_refined": float(w2), "n_p": s.n_p}))
    return out


def _probe_samples(solver, k1, transonic, rng, omega_tol, reach: float) -> list[DispersionSample]:
    """Samples hugging each side of every transonic point, for roots close to the curve.

    Right at the crossing the contour collides with a unit-modulus eigenvalue
    and the fallback radii may miscount, so the offset grows geometrically
    from the bracket width until the sample reports the count of its side.
    """
    out = []
    for t in transonic:
        for side, expected in ((-1, t.lower), (1, t.upper)):
            offset = max(t.width, 1e-3 * omega_tol)
            while offset <= reach:
                w = t.omega_raw + side * offset
                if w <= 0:
                    break
                s = solver.sample(w, k1, rng)
                if _valid(s) and s.n_p == expected:
                    out.append(s)
                    break
                offset *= 4
    return out


def analyze_column(solver: PointSolver, k1: float, omegas, rng, options: ScanOptions | None = None,
                   omega_tol: float | None = None, samples: list[DispersionSample] | None = None) -> ColumnResult:
    """Samples, transonic points and classified roots of one column."""
    options = options or ScanOptions()
    omegas = np.asarray(omegas, dtype=float)
    if omega_tol is None:
        omega_tol = options.omega_tol or 1e-4 * float(omegas.max(initial=0.0))
    if samples is None:
        samples = scan_column(solver, k1, omegas, rng)
    res = ColumnResult(float(k1), samples)
    if len(omegas) < 2 or omega_tol <= 0:
        return res
    tr_tol = min(omega_tol, options.transonic_rel_tol * float(omegas.max()))
    res.transonic = transonic_points(solver, k1, samples, rng, tr_tol, options.extrapolate)
    reach = 0.5 * float(np.diff(omegas).min())
    res.probes = _probe_samples(solver, k1, res.transonic, rng, omega_tol, reach)
    res.roots = find_roots_on_column(solver, k1, samples, res.transonic, rng, options, omega_tol, res.probes)
    return res


def analyze_grid(cell: UnitCell, grid: ScanGrid, settings: SolverSettings | None = None,
                 options: ScanOptions | None = None, threads: int = 1) -> list[ColumnResult]:
    """Full pipeline over every column; deterministic for a given seed."""
    grid.validate(cell)
    options = options or ScanOptions()
    solver = PointSolver(cell, settings)
    rngs = _column_rngs(solver.settings, grid.n_k)
    omegas = grid.omega_values
    tol = options.omega_tol or grid.omega_tol
    return _map(lambda k, g: analyze_column(solver, k, omegas, g, options, tol),
                list(zip(grid.k1_values, rngs)), threads)


def transonic_curves(columns: list[ColumnResult], link_tol: float) -> list[Branch]:
    """Link the transonic points of successive columns into polylines."""
    per_col = [[(t.k1, t.omega, t.width) for t in c.transonic if not t.gap] for c in columns]
    return _link(per_col, link_tol, "transonic")


def trace_branches(columns: list[ColumnResult], link_tol: float) -> list[Branch]:
    """Surface and non-physical polylines from per-column roots."""
    out = []
    for kind in ("surface", "nonphysical"):
        per_col = [[(r.k1, r.omega, r.d_saw) for r in c.roots if r.kind == kind] for c in columns]
        out.extend(_link(per_col, link_tol, kind))
    return out


def _link(per_col, link_tol: float, kind: str) -> list[Branch]:
    branches: list[Branch] = []
    open_: list[Branch] = []
    for col in per_col:
        nxt: list[Branch] = []
        free = sorted(col, key=lambda p: p[1])
        # greedy nearest-neighbor matching, closest pairs first
        pairs = sorted(
            ((abs(b.points[-1][1] - p[1]), i, j) for i, b in enumerate(open_) for j, p in enumerate(free)),
        )
        used_b, used_p = set(), set()
        for dist, i, j in pairs:
            if dist >= link_tol or i in used_b or j in used_p:
                continue
            used_b.add(i)
            used_p.add(j)
            open_[i].points.append(free[j][:2])
            open_[i].quality.append(free[j][2])
            nxt.append(open_[i])
        for j, p in enumerate(free):
            if j not in used_p:
                b = Branch(kind, [p[:2]], [p[2]])
                branches.append(b)
                nxt.append(b)
        open_ = nxt
    return sorted(branches, key=lambda b: (b.points[0][0], b.points[0][1]))


def _slope_through_origin(points, k1_limit: float, n: int = 3) -> float | None:
    pts = sorted((p for p in points if 0 < p[0] <= k1_limit), key=lambda p: p[0])[:n]
    if len(pts) < n:
        return None
    k = np.array([p[0] for p in pts])
    w = np.array([p[1] for p in pts])
    return float(k @ w / (k @ k))


def effective_speeds(branches: list[Branch], transonic: list[Branch], k1_limit: float) -> EffectiveSpeeds:
    """Long-wave slopes of the fundamental surface branch and the first transonic curve.

    Each slope is a least-squares fit ``omega = c k1`` through the three
    smallest-``k1`` points not beyond ``k1_limit``.  A curve with fewer such
    points gives ``None``.
    """

    def lowest(curves):
        cands = [b for b in curves if len(b) and b.points[0][0] <= k1_limit]
        if not cands:
            return None
        return min(cands, key=lambda b: (b.points[0][0], b.points[0][1]))

    saw = lowest([b for b in branches if b.kind == "surface"])
    tr = lowest(transonic)
    c_saw = _slope_through_origin(saw.points, k1_limit) if saw else None
    c_tr = _slope_through_origin(tr.points, k1_limit) if tr else None
    return EffectiveSpeeds(c_saw, c_tr)
