"""Unit-cell geometry and depth-dependent Toeplitz matrices of material profiles.

Units follow the usual phononic-crystal convention: shear modulus in GPa,
density in g/cm^3, lengths in mm.  Then sqrt(mu/rho) is a speed in mm/us.

A cell is a rectangular ``a1 x a2`` period holding a background material and
an ordered list of primitives (circles, rectangles, full-width layers).  Later
primitives overwrite earlier ones.  At any depth ``x2`` the horizontal
cross-section is piecewise constant in ``x1``, so its Fourier coefficients
are sums of closed-form strip coefficients.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Union

import numpy as np

__all__ = [
    "Material",
    "Lattice",
    "Circle",
    "Rectangle",
    "Layer",
    "UnitCell",
    "ToeplitzProfile",
    "DepthMesh",
    "strip_fourier_coeff",
    "cross_section",
    "profiles_at_depth",
    "flip_cell",
    "depth_breakpoints",
    "depth_mesh",
]

_EPS_GEOM = 1e-12


@dataclass(frozen=True)
class Material:
    name: str
    mu: float
    rho: float

    def __post_init__(self):
        if not (self.mu > 0 and self.rho > 0):
            raise ValueError(f"material {self.name!r}: mu and rho must be positive")

    @property
    def speed(self) -> float:
        """Bulk shear speed sqrt(mu/rho) in mm/us."""
        return math.sqrt(self.mu / self.rho)


@dataclass(frozen=True)
class Lattice:
    a1: float = 1.0
    a2: float = 1.0

    def __post_init__(self):
        if not (self.a1 > 0 and self.a2 > 0):
            raise ValueError("lattice periods must be positive")


@dataclass(frozen=True)
class Circle:
    center: tuple[float, float]
    radius: float
    material: Material

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("circle radius must be positive")

    def vertical_bounds(self) -> tuple[float, float]:
        return self.center[1] - self.radius, self.center[1] + self.radius

    def half_width(self, x2: float, a2: float) -> float | None:
        dz = _wrap(x2 - self.center[1], a2)
        if abs(dz) >= self.radius:
            return None
        return math.sqrt(self.radius**2 - dz * dz)

    def reflected(self, a2: float) -> "Circle":
        return replace(self, center=(self.center[0], a2 - self.center[1]))


@dataclass(frozen=True)
class Rectangle:
    center: tuple[float, float]
    width: float
    height: float
    material: Material

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ValueError("rectangle extents must be positive")

    def vertical_bounds(self) -> tuple[float, float]:
        return self.center[1] - self.height / 2, self.center[1] + self.height / 2

    def half_width(self, x2: float, a2: float) -> float | None:
        dz = _wrap(x2 - self.center[1], a2)
        if not (-self.height / 2 <= dz < self.height / 2):
            return None
        return self.width / 2

    def reflected(self, a2: float) -> "Rectangle":
        return replace(self, center=(self.center[0], a2 - self.center[1]))


@dataclass(frozen=True)
class Layer:
    """Full-width layer occupying depths ``[z_lo, z_hi)`` (periodically reduced)."""

    z_lo: float
    z_hi: float
    material: Material

    def __post_init__(self):
        if not self.z_hi > self.z_lo:
            raise ValueError("layer must have positive thickness")

    @property
    def center(self) -> tuple[float, float]:
        return (0.0, 0.5 * (self.z_lo + self.z_hi))

    def vertical_bounds(self) -> tuple[float, float]:
        return self.z_lo, self.z_hi

    def half_width(self, x2: float, a2: float) -> float | None:
        if (x2 - self.z_lo) % a2 < self.z_hi - self.z_lo:
            return math.inf
        return None

    def reflected(self, a2: float) -> "Layer":
        return replace(self, z_lo=a2 - self.z_hi, z_hi=a2 - self.z_lo)


Primitive = Union[Circle, Rectangle, Layer]


def _wrap(dz: float, period: float) -> float:
    """Reduce ``dz`` to ``[-period/2, period/2)``."""
    return (dz + period / 2) % period - period / 2


@dataclass(frozen=True)
class UnitCell:
    """Background material plus ordered primitives on a rectangular lattice.

    ``flipped`` records a reflection about the horizontal midplane.  The
    reflection is applied when the geometry is evaluated, which keeps a double
    flip bit-exact.
    """

    lattice: Lattice
    background: Material
    inclusions: tuple[Primitive, ...] = ()
    flipped: bool = False
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "inclusions", tuple(self.inclusions))

    @property
    def a1(self) -> float:
        return self.lattice.a1

    @property
    def a2(self) -> float:
        return self.lattice.a2

    @property
    def materials(self) -> tuple[Material, ...]:
        seen = {self.background.name: self.background}
        for p in self.inclusions:
            seen.setdefault(p.material.name, p.material)
        return tuple(seen.values())

    @property
    def is_homogeneous(self) -> bool:
        return all(m.mu == self.background.mu and m.rho == self.background.rho for m in self.materials)

    def geometry(self) -> tuple[Primitive, ...]:
        """Primitives in physical coordinates, i.e. with any flip applied."""
        if not self.flipped:
            return self.inclusions
        return tuple(p.reflected(self.a2) for p in self.inclusions)

    def source_depth(self, x2: float) -> float:
        """Depth in the unflipped geometry that maps onto ``x2``."""
        if not self.flipped:
            return x2
        return (self.a2 - x2) % self.a2


def flip_cell(cell: UnitCell) -> UnitCell:
    """Reflect the cell about its horizontal midplane (reciprocal profile)."""
    return replace(cell, flipped=not cell.flipped)


def strip_fourier_coeff(h_bg: float, h_inc: float, c1: float, w: float, a1: float, m: int) -> complex:
    """Fourier coefficient of a background value with one periodic strip.

    The profile is ``h_bg`` except on ``|x1 - c1| < w`` (mod ``a1``) where it
    equals ``h_inc``.  Coefficients are taken with respect to
    ``exp(2*pi*i*m*x1/a1)``.
    """
    if not 0 <= w <= a1 / 2:
        raise ValueError("strip half-width must lie in [0, a1/2]")
    if m == 0:
        return complex(h_bg + (h_inc - h_bg) * (2 * w / a1))
    phase = np.exp(-2j * np.pi * m * c1 / a1)
    return complex((h_inc - h_bg) * phase * np.sin(2 * np.pi * m * w / a1) / (np.pi * m))


def _strip_harmonics(delta: float, start: float, stop: float, a1: float, ms: np.ndarray) -> np.ndarray:
    """Harmonics of ``delta * 1[start <= x1 < stop]`` for integer array ``ms``."""
    width = stop - start
    out = np.zeros(ms.shape, dtype=complex)
    if width <= 0:
        return out
    if width >= a1 * (1 - _EPS_GEOM):
        out[ms == 0] = delta
        return out
    c1 = 0.5 * (start + stop)
    nz = ms != 0
    mm = ms[nz]
    out[~nz] = delta * width / a1
    out[nz] = delta * np.exp(-2j * np.pi * mm * c1 / a1) * np.sin(np.pi * mm * width / a1) / (np.pi * mm)
    return out


def cross_section(cell: UnitCell, x2: float) -> list[tuple[float, float, Material]]:
    """Horizontal cross-section at depth ``x2`` as disjoint arcs over the background.

    Returns ``(start, stop, material)`` triples with ``0 <= start < stop <= a1``.
    Later primitives overwrite earlier ones.
    """
    a1, a2 = cell.a1, cell.a2
    xs = cell.source_depth(x2)
    arcs: list[tuple[float, float, Material]] = []
    for prim in cell.inclusions:
        w = prim.half_width(xs, a2)
        if w is None or w <= 0:
            continue
        if 2 * w >= a1:
            pieces = [(0.0, a1)]
        else:
            lo = (prim.center[0] - w) % a1
            hi = lo + 2 * w
            pieces = [(lo, hi)] if hi <= a1 else [(lo, a1), (0.0, hi - a1)]
        for s, e in pieces:
            arcs = _paint(arcs, s, e, prim.material)
    return arcs


def _paint(arcs, s, e, material):
    out = []
    for s0, e0, mat in arcs:
        if e0 <= s or s0 >= e:
            out.append((s0, e0, mat))
            continue
        if s0 < s:
            out.append((s0, s, mat))
        if e0 > e:
            out.append((e, e0, mat))
    out.append((s, e, material))
    return out


def _coefficients(cell: UnitCell, x2: float, ms: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    bg = cell.background
    mu = np.where(ms == 0, bg.mu, 0.0).astype(complex)
    rho = np.where(ms == 0, bg.rho, 0.0).astype(complex)
    for s, e, mat in cross_section(cell, x2):
        mu += _strip_harmonics(mat.mu - bg.mu, s, e, cell.a1, ms)
        rho += _strip_harmonics(mat.rho - bg.rho, s, e, cell.a1, ms)
    return mu, rho


def _toeplitz(coef: np.ndarray, d: int) -> np.ndarray:
    idx = np.arange(d)
    return coef[idx[:, None] - idx[None, :] + d - 1]


def _check_d(d: int) -> None:
    if d < 1 or d % 2 == 0:
        raise ValueError(f"truncation d must be a positive odd integer, got {d}")


def profiles_at_depth(cell: UnitCell, d: int, x2: float) -> tuple[np.ndarray, np.ndarray]:
    """Toeplitz matrices ``(mu_hat[n-m], rho_hat[n-m])`` of size ``d x d`` at depth ``x2``."""
    _check_d(d)
    if not 0 <= x2 < cell.a2:
        raise ValueError(f"depth {x2} outside [0, {cell.a2})")
    ms = np.arange(-(d - 1), d)
    mu, rho = _coefficients(cell, x2, ms)
    return _toeplitz(mu, d), _toeplitz(rho, d)


@dataclass(frozen=True)
class ToeplitzProfile:
    """Depth evaluator of the ``d x d`` Toeplitz matrices of mu and rho."""

    cell: UnitCell
    d: int

    def __post_init__(self):
        _check_d(self.d)

    @property
    def harmonics(self) -> np.ndarray:
        m = (self.d - 1) // 2
        return np.arange(-m, m + 1)

    def __call__(self, x2: float) -> tuple[np.ndarray, np.ndarray]:
        return profiles_at_depth(self.cell, self.d, x2 % self.cell.a2)

    def stack(self, depths: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Matrices at many depths, shape ``(*depths.shape, d, d)``.

        Depths sharing the same cross-section are evaluated once.
        """
        depths = np.asarray(depths, dtype=float)
        flat = depths.ravel() % self.cell.a2
        mu = np.empty((flat.size, self.d, self.d), dtype=complex)
        rho = np.empty_like(mu)
        cache: dict = {}
        for i, x in enumerate(flat):
            key = _section_key(self.cell, x)
            if key not in cache:
                cache[key] = profiles_at_depth(self.cell, self.d, x)
            mu[i], rho[i] = cache[key]
        shape = depths.shape + (self.d, self.d)
        return mu.reshape(shape), rho.reshape(shape)


def _section_key(cell: UnitCell, x2: float):
    arcs = cross_section(cell, x2)
    return tuple((round(s, 15), round(e, 15), m.name, m.mu, m.rho) for s, e, m in arcs)


def depth_breakpoints(cell: UnitCell) -> np.ndarray:
    """Sorted depths in ``[0, a2]`` where the cross-section changes non-smoothly."""
    a2 = cell.a2
    pts = [0.0, a2]
    for prim in cell.geometry():
        for z in prim.vertical_bounds():
            zr = z % a2
            pts.append(zr)
    pts = np.unique(np.asarray(pts))
    keep = [pts[0]]
    for p in pts[1:]:
        if p - keep[-1] > _EPS_GEOM * a2:
            keep.append(p)
    keep[-1] = a2
    return np.asarray(keep)


def _is_curved(cell: UnitCell, lo: float, hi: float) -> bool:
    mid = 0.5 * (lo + hi)
    xs = cell.source_depth(mid)
    return any(isinstance(p, Circle) and p.half_width(xs, cell.a2) is not None for p in cell.inclusions)


@dataclass(frozen=True)
class DepthMesh:
    """RK4 stage nodes over one vertical period.

    ``nodes[j] = (start, mid, end)`` depths of step ``j`` and ``weights[j]``
    the matching effective step lengths ``h_t * dx2/dt``.  ``samples`` are the
    depths at which material matrices are evaluated: nodes nudged into the
    interior of their segment so each step sees one-sided limits.  Segments that cut
    through circles use the map ``x2 = lo + (hi - lo) (1 - cos(pi t)) / 2``,
    which removes the square-root behaviour of the chord width at tangent
    points; straight segments are uniform.
    """

    nodes: np.ndarray
    weights: np.ndarray
    breakpoints: np.ndarray = field(repr=False)
    samples: np.ndarray = field(repr=False, default=None)

    @property
    def n_steps(self) -> int:
        return self.nodes.shape[0]


def _graded_steps(length: float, n: int, h0: float, ratio: float = 1.5) -> np.ndarray:
    """``n`` step sizes summing to ``length``: geometric ramp from ``h0``, then uniform."""
    h = length / n
    if h0 >= h:
        return np.full(n, h)
    for _ in range(50):
        ramp = []
        step = h0
        while step < h and len(ramp) < n - 1:
            ramp.append(step)
            step *= ratio
        rest = n - len(ramp)
        h_new = (length - sum(ramp)) / rest
        if abs(h_new - h) <= 1e-14 * length:
            break
        h = h_new
    return np.concatenate([ramp, np.full(rest, h)])


def _first_step(cell: UnitCell, d: int) -> float:
    # the resolvent re-adapts across a material jump at a rate ~ k_max * contrast
    mus = [m.mu for m in cell.materials]
    contrast = max(mus) / min(mus)
    if contrast == 1.0:
        return math.inf
    k_max = (math.pi + 2 * math.pi * (d - 1) / 2) / cell.a1
    return 1.0 / (k_max * contrast)


@lru_cache(maxsize=64)
def depth_mesh(cell: UnitCell, n_steps: int, d: int = 1, extra: tuple[float, ...] = ()) -> DepthMesh:
    """Distribute ``n_steps`` RK4 steps over the period, aligned with breakpoints.

    Straight segments get a geometric ramp of small steps at their top edge,
    where the resolvent flow is stiff right after a material jump; the ramp
    width scales with the harmonic truncation ``d``.  Depths in ``extra``
    become additional step boundaries.
    """
    bps = depth_breakpoints(cell)
    if extra:
        pts = np.unique(np.concatenate([bps, np.asarray(extra, dtype=float) % cell.a2]))
        bps = pts[np.concatenate([[True], np.diff(pts) > _EPS_GEOM * cell.a2])]
        bps[-1] = cell.a2
    lengths = np.diff(bps)
    nseg = lengths.size
    n_steps = max(int(n_steps), 2 * nseg)
    alloc = np.maximum(2, np.floor(lengths / lengths.sum() * n_steps)).astype(int)
    # largest remainder to hit the requested total
    while alloc.sum() < n_steps:
        frac = lengths / lengths.sum() * n_steps - alloc
        alloc[int(np.argmax(frac))] += 1
    while alloc.sum() > n_steps:
        cand = np.where(alloc > 2)[0]
        alloc[cand[int(np.argmax(alloc[cand]))]] -= 1
    h0 = _first_step(cell, d)
    nodes, weights, samples = [], [], []
    for (lo, hi), n in zip(zip(bps[:-1], bps[1:]), alloc):
        if _is_curved(cell, lo, hi):
            t = np.linspace(0.0, 1.0, 2 * n + 1)
            x = lo + (hi - lo) * 0.5 * (1 - np.cos(np.pi * t))
            w = (0.5 / n) * (hi - lo) * 0.5 * np.pi * np.sin(np.pi * t)
            idx = 2 * np.arange(n)[:, None] + np.arange(3)[None, :]
            xs, ws = x[idx], 2 * w[idx]
        else:
            hs = _graded_steps(hi - lo, n, h0)
            starts = lo + np.concatenate([[0.0], np.cumsum(hs)[:-1]])
            xs = starts[:, None] + hs[:, None] * np.array([0.0, 0.5, 1.0])[None, :]
            xs[-1, 2] = hi
            ws = np.repeat(hs[:, None], 3, axis=1)
        nodes.append(xs)
        weights.append(ws)
        nudge = 1e-9 * (hi - lo)
        samples.append(np.clip(xs, lo + nudge, hi - nudge))
    return DepthMesh(np.concatenate(nodes), np.concatenate(weights), bps, np.concatenate(samples))
