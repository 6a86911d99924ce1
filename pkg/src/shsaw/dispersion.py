"""Dispersion functions and root classification.

At each ``(omega, k1)`` the decaying projector ``P_d`` is obtained from the
resolvent flow and the contour quadrature, then reduced to

* ``D_saw``: smallest eigenvalue of ``(P_d1 - I)^*(P_d1 - I) + P_d3^* P_d3``,
  zero iff a stress-free surface solution exists;
* ``D_d3``: ``det(P_d3(0, k1)^-1 P_d3(omega, k1))``, real and sign-changing
  where ``N_p = 0``;
* ``D_i``: the same as ``D_saw`` built from ``P_i``, zero for stress-free
  solutions made of increasing modes (non-physical).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .cell import ToeplitzProfile, UnitCell
from .errors import (
    ContourCollisionError,
    NormalizationError,
    RetryableAlphaError,
    SHSawError,
)
from .projector import ProjectorSet, extract_blocks, projector_set
from .riccati import ResolventAtAlpha, draw_alpha, integrate_resolvent
from .stateop import StateMatrix

__all__ = [
    "SolverSettings",
    "DispersionSample",
    "PointFailure",
    "PointSolver",
    "saw_matrix",
    "eval_dsaw",
    "eval_di",
    "eval_dd3",
    "saw_tolerance",
    "null_direction",
    "classify_root",
    "refine_minimum",
    "raw_trace_p",
]

log = logging.getLogger(__name__)

#: Contour radii tried, in order, when the default one collides with an eigenvalue.
RADIUS_FALLBACKS = (0.985, 0.995, 0.98, 0.975, 0.97)
NORMALIZER_COND = 1e10


class PointFailure(SHSawError):
    """No shift or radius produced an accepted projector at this point."""


@dataclass(frozen=True)
class SolverSettings:
    """Numerical knobs of the per-point pipeline.

    ``tol_saw = None`` selects the scale-free default
    ``1e-6 (1 + trace H) / d`` evaluated at the root.
    """

    d: int = 17
    riccati_steps: int = 400
    riccati_tol: float = 1e-8
    riccati_max_steps: int = 6400
    contour_nodes: int = 256
    contour_max_nodes: int = 4096
    contour_radius: float = 0.99
    idem_tol: float = 1e-7
    seed: int = 0
    tol_saw: float | None = None
    tol_u: float = 1e-3
    alpha_retries: int = 8

    def __post_init__(self):
        if self.d < 1 or self.d % 2 == 0:
            raise ValueError(f"d must be a positive odd integer, got {self.d}")
        if not 0 < self.contour_radius < 1:
            raise ValueError("contour_radius must lie in (0, 1)")

    def with_d(self, d: int) -> "SolverSettings":
        return replace(self, d=int(d))


@dataclass(frozen=True)
class DispersionSample:
    omega: float
    k1: float
    d_saw: float
    d_d3: float
    n_p: int | None
    d_i: float = float("nan")
    trace_p: float = float("nan")
    d_d3_imag: float = 0.0
    indeterminate: bool = False
    contour_retry_count: int = 0
    alpha_retry_count: int = 0
    failed: bool = False
    message: str = ""

    @property
    def flags(self) -> dict:
        return {
            "indeterminate": self.indeterminate,
            "contour_retry_count": self.contour_retry_count,
            "alpha_retry_count": self.alpha_retry_count,
            "failed": self.failed,
        }

    @classmethod
    def failure(cls, omega: float, k1: float, message: str) -> "DispersionSample":
        nan = float("nan")
        return cls(omega, k1, nan, nan, None, indeterminate=True, failed=True, message=message)


def saw_matrix(p1: np.ndarray, p3: np.ndarray) -> np.ndarray:
    """Hermitian PSD matrix ``(P1 - I)^*(P1 - I) + P3^* P3``."""
    a = p1 - np.eye(p1.shape[0])
    h = a.conj().T @ a + p3.conj().T @ p3
    return 0.5 * (h + h.conj().T)


def _lambda_min(p1: np.ndarray, p3: np.ndarray) -> float:
    return max(float(np.linalg.eigvalsh(saw_matrix(p1, p3))[0]), 0.0)


def eval_dsaw(blocks) -> float:
    """``lambda_min`` of the surface-wave matrix from the blocks of ``P_d``."""
    p1, _, p3, _ = blocks
    return _lambda_min(p1, p3)


def eval_di(blocks_i) -> float:
    """Analogue of :func:`eval_dsaw` from the blocks of ``P_i``."""
    p1, _, p3, _ = blocks_i
    return _lambda_min(p1, p3)


def eval_dd3(p3: np.ndarray, p3_ref: np.ndarray | None) -> complex:
    """``det(P3_ref^-1 P3)``.

    Raises
    ------
    NormalizationError
        ``p3_ref`` is missing or has condition number above ``1e10``.
    """
    if p3_ref is None:
        raise NormalizationError("no reference block at omega = 0")
    if p3 is p3_ref or np.array_equal(p3, p3_ref):
        return 1.0 + 0.0j
    cond = np.linalg.cond(p3_ref)
    if not np.isfinite(cond) or cond > NORMALIZER_COND:
        raise NormalizationError(f"reference P_d3 is singular (cond={cond:.3g})")
    return complex(np.linalg.det(np.linalg.solve(p3_ref, p3)))


def saw_tolerance(blocks, d: int, tol_saw: float | None = None) -> float:
    if tol_saw is not None:
        return tol_saw
    p1, _, p3, _ = blocks
    return 1e-6 * (1 + float(np.trace(saw_matrix(p1, p3)).real)) / d


def null_direction(p3: np.ndarray) -> np.ndarray:
    """Right singular vector of ``P_d3`` with the smallest singular value."""
    _, _, vh = np.linalg.svd(p3)
    return vh[-1].conj()


class PointSolver:
    """Per-cell evaluator of projectors and dispersion functions.

    Holds the Toeplitz profile cache and the ``omega = 0`` normalizers for
    ``D_d3``.  Each call takes its own generator for shift draws so columns
    can run in any order with reproducible results.
    """

    def __init__(self, cell: UnitCell, settings: SolverSettings | None = None):
        self.cell = cell
        self.settings = settings or SolverSettings()
        self.profile = ToeplitzProfile(cell, self.settings.d)
        self._ref: dict[float, np.ndarray | None] = {}
        self._ref_set: dict[float, ProjectorSet] = {}

    @property
    def d(self) -> int:
        return self.settings.d

    def state(self, omega: float, k1: float) -> StateMatrix:
        return StateMatrix(self.profile, omega, k1)

    def resolvent(self, omega: float, k1: float, rng) -> tuple[ResolventAtAlpha, int]:
        """Resolvent at a random shift, redrawing the shift on failure."""
        s = self.settings
        q_eval = self.state(omega, k1)
        last = ""
        for tries in range(s.alpha_retries + 1):
            try:
                r0 = integrate_resolvent(
                    q_eval, draw_alpha(rng), s.riccati_steps, s.riccati_tol, s.riccati_max_steps
                )
                return r0, tries
            except RetryableAlphaError as exc:
                last = str(exc)
                log.debug("alpha retry at (%g, %g): %s", omega, k1, exc)
        raise PointFailure(f"resolvent failed at omega={omega:.6g}, k1={k1:.6g}: {last}")

    def projectors(self, omega: float, k1: float, rng, radius: float | None = None):
        """Accepted :class:`ProjectorSet` plus ``(alpha_retries, contour_retries)``.

        Raises
        ------
        PointFailure
            All shift redraws or all fallback radii failed.
        """
        s = self.settings
        if omega == 0 and radius is None and float(k1) in self._ref_set:
            return self._ref_set[float(k1)], 0, 0
        resolvent, tries = self.resolvent(omega, k1, rng)
        last = ""
        radii = (radius or s.contour_radius,) + RADIUS_FALLBACKS
        for j, r in enumerate(radii):
            try:
                ps = projector_set(resolvent, r, s.contour_nodes, s.idem_tol, s.contour_max_nodes)
                return ps, tries, j
            except ContourCollisionError as exc:
                last = str(exc)
            if radius is not None:
                break
        raise PointFailure(f"contour failed at omega={omega:.6g}, k1={k1:.6g}: {last}")

    def reference_block(self, k1: float, rng) -> np.ndarray | None:
        """``P_d3(0, k1)``, cached per ``k1``; ``None`` if it cannot be used."""
        key = float(k1)
        if key not in self._ref:
            try:
                ps, _, _ = self.projectors(0.0, k1, rng)
                self._ref_set[key] = ps
                p3 = extract_blocks(ps.p_d)[2]
                cond = np.linalg.cond(p3)
                self._ref[key] = p3 if np.isfinite(cond) and cond <= NORMALIZER_COND else None
            except PointFailure:
                self._ref[key] = None
        return self._ref[key]

    def sample_from(self, omega: float, k1: float, ps: ProjectorSet, ref, retries=(0, 0)) -> DispersionSample:
        blocks = ps.blocks
        p3 = blocks[2]
        if ref is None:
            dd3 = complex(np.linalg.det(p3))
        else:
            dd3 = eval_dd3(p3, ref)
        return DispersionSample(
            omega=float(omega),
            k1=float(k1),
            d_saw=eval_dsaw(blocks),
            d_d3=dd3.real,
            n_p=ps.n_p,
            d_i=eval_di(ps.blocks_i),
            trace_p=ps.trace_p,
            d_d3_imag=dd3.imag,
            indeterminate=ps.n_p is None,
            alpha_retry_count=retries[0],
            contour_retry_count=retries[1],
        )

    def sample(self, omega: float, k1: float, rng, radius: float | None = None) -> DispersionSample:
        """Evaluate every dispersion function at one point; failures are flagged."""
        try:
            ref = self.reference_block(k1, rng)
            ps, a_tries, c_tries = self.projectors(omega, k1, rng, radius)
        except PointFailure as exc:
            return DispersionSample.failure(omega, k1, str(exc))
        return self.sample_from(omega, k1, ps, ref, (a_tries, c_tries))


@dataclass(frozen=True)
class RootClassification:
    kind: str
    omega: float
    k1: float
    d_saw: float
    d_i: float
    tol_saw: float
    u_norm: float
    extra: dict = field(default_factory=dict)


def classify_root(solver: PointSolver, omega_root: float, k1: float, rng, tol_saw: float | None = None,
                  tol_u: float | None = None) -> RootClassification:
    """Label a candidate root as ``surface``, ``nonphysical`` or ``indeterminate``.

    Surface requires ``D_saw`` below tolerance and ``||P_d1 u0|| > tol_u``
    for the null direction ``u0`` of ``P_d3``.  Non-physical requires
    ``D_i`` below tolerance with ``D_saw`` above it.
    """
    s = solver.settings
    tol_u = s.tol_u if tol_u is None else tol_u
    try:
        ps, _, _ = solver.projectors(omega_root, k1, rng)
    except PointFailure as exc:
        return RootClassification("indeterminate", omega_root, k1, np.nan, np.nan, np.nan, np.nan,
                                  {"message": str(exc)})
    blocks = ps.blocks
    tol = saw_tolerance(blocks, solver.d, s.tol_saw if tol_saw is None else tol_saw)
    tol_i = saw_tolerance(ps.blocks_i, solver.d, s.tol_saw if tol_saw is None else tol_saw)
    dsaw, di = eval_dsaw(blocks), eval_di(ps.blocks_i)
    u0 = null_direction(blocks[2])
    u_norm = float(np.linalg.norm(blocks[0] @ u0))
    if dsaw < tol and u_norm > tol_u:
        kind = "surface"
    elif di < tol_i and dsaw >= tol:
        kind = "nonphysical"
    else:
        kind = "indeterminate"
    return RootClassification(kind, omega_root, k1, dsaw, di, tol, u_norm, {"n_p": ps.n_p, "tol_i": tol_i})


def raw_trace_p(r0: ResolventAtAlpha, r: float, n_nodes: int = 512) -> float:
    """``Re trace P_p`` from a fixed-size trapezoidal rule, converged or not.

    The rule equals ``f(M0)`` with ``f(q) = 1 / (1 - (q/r)^N)``, whose real
    part is exactly 1/2 on ``|q| = r`` between the nodes (at a node it passes
    through a pole instead).  Either way the count crosses the half-way value
    precisely when an eigenvalue crosses the contour, which makes it a robust
    bisection target.
    """
    from .projector import _partial_sum

    n = int(n_nodes)
    z = r * np.exp(2j * np.pi * np.arange(n) / n)
    with np.errstate(all="ignore"):
        p_d = r0.value @ _partial_sum(r0.value, r0.alpha, z) / n
    return float(r0.value.shape[0] - 2 * np.trace(p_d).real)


def refine_minimum(f, lo: float, hi: float, xtol: float, max_iter: int = 60) -> tuple[float, float]:
    """Golden-section minimization of a unimodal ``f`` on ``[lo, hi]``."""
    g = (np.sqrt(5) - 1) / 2
    a, b = lo, hi
    c, d_ = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d_)
    for _ in range(max_iter):
        if b - a < xtol:
            break
        if fc < fd:
            b, d_, fd = d_, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d_, fd
            d_ = a + g * (b - a)
            fd = f(d_)
    return (c, fc) if fc < fd else (d_, fd)
