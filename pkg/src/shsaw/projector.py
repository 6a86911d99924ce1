"""Spectral projectors of the monodromy matrix from its resolvent.

The projector onto decaying Floquet modes is the contour integral of the
resolvent over ``|z| = r`` (``r`` just inside the unit circle).  Using the
shift identity it reduces to a periodic integral in the polar angle that
only needs the resolvent at one shift ``alpha``; the trapezoidal rule on it
converges geometrically.  The increasing and propagating projectors then
follow from the ``T``-symmetry of the monodromy matrix.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContourCollisionError, IndeterminateCountError
from .riccati import ResolventAtAlpha
from .stateop import structure_matrices

__all__ = [
    "ProjectorSet",
    "projector_decaying",
    "contour_projector",
    "companion_projectors",
    "count_propagating",
    "extract_blocks",
    "projector_set",
]

DEFAULT_RADIUS = 0.99


@dataclass(frozen=True)
class ProjectorSet:
    p_d: np.ndarray
    p_i: np.ndarray
    p_p: np.ndarray
    n_p: int | None
    quad_nodes: int
    idem_residual: float
    radius: float = DEFAULT_RADIUS

    @property
    def d(self) -> int:
        return self.p_d.shape[0] // 2

    @property
    def blocks(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        return extract_blocks(self.p_d)

    @property
    def blocks_i(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        return extract_blocks(self.p_i)

    @property
    def trace_p(self) -> float:
        return float(np.trace(self.p_p).real)


def _partial_sum(R: np.ndarray, alpha: complex, z: np.ndarray) -> np.ndarray:
    eye = np.eye(R.shape[0])
    shifted = eye[None] + (z - alpha)[:, None, None] * R[None]
    return (z[:, None, None] * np.linalg.inv(shifted)).sum(axis=0)


def contour_projector(
    r0: ResolventAtAlpha,
    r: float = DEFAULT_RADIUS,
    n_nodes: int = 256,
    tol: float = 1e-7,
    max_nodes: int = 4096,
) -> tuple[np.ndarray, int, float]:
    """Trapezoidal-rule projector with node doubling.

    Returns ``(P_d, nodes, ||P_d^2 - P_d||_inf)``.  Each doubling reuses the
    previous nodes.

    Raises
    ------
    ContourCollisionError
        Idempotency is not reached within ``max_nodes``.
    """
    if not 0 < r < 1:
        raise ValueError("contour radius must lie in (0, 1)")
    R, alpha = r0.value, r0.alpha
    n = int(n_nodes)
    with np.errstate(all="ignore"):
        acc = _partial_sum(R, alpha, r * np.exp(2j * np.pi * np.arange(n) / n))
        while True:
            P = R @ acc / n
            resid = np.abs(P @ P - P).sum(axis=1).max()
            if np.isfinite(resid) and resid < tol:
                return P, n, float(resid)
            if 2 * n > max_nodes:
                break
            z_new = r * np.exp(2j * np.pi * (np.arange(n) + 0.5) / n)
            acc = acc + _partial_sum(R, alpha, z_new)
            n *= 2
    raise ContourCollisionError(
        f"contour |z|={r} did not converge with {n} nodes (idempotency residual {resid:.2e})"
    )


def projector_decaying(r0: ResolventAtAlpha, r: float = DEFAULT_RADIUS, n_nodes: int = 256, **kw) -> np.ndarray:
    """Projector onto Floquet modes with ``|q| < r``."""
    return contour_projector(r0, r, n_nodes, **kw)[0]


def companion_projectors(p_d: np.ndarray, T: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """``P_i = T^-1 P_d^* T`` and ``P_p = I - P_d - P_i``."""
    if T is None:
        T = structure_matrices(p_d.shape[0] // 2).T
    p_i = -T @ p_d.conj().T @ T  # T^-1 = -T
    p_p = np.eye(p_d.shape[0]) - p_d - p_i
    return p_i, p_p


def count_propagating(p_p: np.ndarray, tol: float = 0.05) -> int:
    """Number of propagating modes, ``trace(P_p)`` rounded to an even integer."""
    tr = np.trace(p_p)
    nearest = int(round(tr.real))
    if abs(tr - nearest) >= tol or nearest % 2 or nearest < 0:
        raise IndeterminateCountError(f"trace(P_p) = {tr.real:.4f}{tr.imag:+.1e}j is not an even integer")
    return nearest


def extract_blocks(p: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    d = p.shape[0] // 2
    return p[:d, :d], p[:d, d:], p[d:, :d], p[d:, d:]


def projector_set(
    r0: ResolventAtAlpha,
    r: float = DEFAULT_RADIUS,
    n_nodes: int = 256,
    tol: float = 1e-7,
    max_nodes: int = 4096,
    strict_count: bool = False,
) -> ProjectorSet:
    """All three projectors plus the propagating-mode count.

    An indeterminate count is stored as ``None`` unless ``strict_count``.
    """
    p_d, nodes, resid = contour_projector(r0, r, n_nodes, tol, max_nodes)
    p_i, p_p = companion_projectors(p_d)
    try:
        n_p = count_propagating(p_p)
    except IndeterminateCountError:
        if strict_count:
            raise
        n_p = None
    return ProjectorSet(p_d, p_i, p_p, n_p, nodes, resid, r)
