"""First-order state-space operator for SH waves in a depth-periodic cell.

With the state ``eta = (u, mu u')`` of Fourier amplitudes, the wave
equation becomes ``eta' = Q(x2) eta`` with

    Q = [[0,                        mu^-1],
         [(D+k1) mu (D+k1) - w^2 rho, 0   ]]

where ``D = (2 pi / a1) diag(-M..M)`` and ``mu``, ``rho`` are the Toeplitz
matrices of the profile at depth ``x2``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .cell import ToeplitzProfile, UnitCell, depth_mesh
from .errors import ConditioningError

__all__ = [
    "StructureMatrices",
    "StateMatrix",
    "StageBlocks",
    "structure_matrices",
    "assemble_q",
    "wavenumbers",
    "stage_blocks",
]

COND_LIMIT = 1e12


@dataclass(frozen=True)
class StructureMatrices:
    """``T = [[0, I], [-I, 0]]`` and ``S = diag(I, -I)``, both ``2d x 2d``."""

    T: np.ndarray
    S: np.ndarray

    @property
    def T_inv(self) -> np.ndarray:
        return -self.T


@lru_cache(maxsize=32)
def _structure(d: int) -> StructureMatrices:
    eye = np.eye(d)
    zero = np.zeros((d, d))
    T = np.block([[zero, eye], [-eye, zero]])
    S = np.block([[eye, zero], [zero, -eye]])
    T.setflags(write=False)
    S.setflags(write=False)
    return StructureMatrices(T, S)


def structure_matrices(d: int) -> StructureMatrices:
    if d < 1:
        raise ValueError("d must be >= 1")
    return _structure(int(d))


def wavenumbers(profile: ToeplitzProfile, k1: float) -> np.ndarray:
    """Diagonal of ``D + k1``: ``k1 + 2 pi m / a1`` for ``m = -M..M``."""
    return k1 + 2 * np.pi * profile.harmonics / profile.cell.a1


def _checked_inverse(mu: np.ndarray, x2) -> np.ndarray:
    cond = np.linalg.cond(mu)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise ConditioningError(f"mu Toeplitz matrix singular at depth x2={x2} (cond={cond:.3g})")
    return np.linalg.inv(mu)


def assemble_q(profile: ToeplitzProfile, omega: float, k1: float, x2: float) -> np.ndarray:
    """The ``2d x 2d`` system matrix at one depth."""
    d = profile.d
    mu, rho = profile(x2)
    kv = wavenumbers(profile, k1)
    q = np.zeros((2 * d, 2 * d), dtype=complex)
    q[:d, d:] = _checked_inverse(mu, x2)
    q[d:, :d] = kv[:, None] * mu * kv[None, :] - omega**2 * rho
    return q


@dataclass(frozen=True)
class StateMatrix:
    """System matrix evaluator ``x2 -> Q(omega, k1, x2)`` for a fixed profile."""

    profile: ToeplitzProfile
    omega: float
    k1: float

    @property
    def d(self) -> int:
        return self.profile.d

    @property
    def cell(self) -> UnitCell:
        return self.profile.cell

    def q(self, x2: float) -> np.ndarray:
        return assemble_q(self.profile, self.omega, self.k1, x2)

    def __call__(self, x2: float) -> np.ndarray:
        return self.q(x2)

    def blocks(self, n_steps: int) -> "StageBlocks":
        return stage_blocks(self.profile, n_steps, self.omega, self.k1)


@dataclass(frozen=True)
class _MaterialStages:
    mu: np.ndarray
    rho: np.ndarray
    mu_inv: np.ndarray
    weights: np.ndarray
    nodes: np.ndarray


@lru_cache(maxsize=32)
def _material_stages(profile: ToeplitzProfile, n_steps: int) -> _MaterialStages:
    mesh = depth_mesh(profile.cell, n_steps, profile.d)
    mu, rho = profile.stack(mesh.samples)
    cond = np.linalg.cond(mu.reshape(-1, profile.d, profile.d)).max()
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise ConditioningError(f"mu Toeplitz matrix singular on the depth mesh (cond={cond:.3g})")
    mu_inv = np.linalg.inv(mu)
    for arr in (mu, rho, mu_inv):
        arr.setflags(write=False)
    return _MaterialStages(mu, rho, mu_inv, mesh.weights, mesh.nodes)


@dataclass(frozen=True)
class StageBlocks:
    """Off-diagonal blocks of ``Q`` at every RK4 stage node, pre-scaled by the step.

    ``upper[j, s] = w[j, s] * mu^-1`` and ``lower[j, s] = w[j, s] * ((D+k1) mu (D+k1) - w^2 rho)``
    with ``s`` in (start, mid, end) of step ``j``.
    """

    upper: np.ndarray
    lower: np.ndarray
    nodes: np.ndarray

    @property
    def n_steps(self) -> int:
        return self.upper.shape[0]

    @property
    def d(self) -> int:
        return self.upper.shape[-1]


def stage_blocks(profile: ToeplitzProfile, n_steps: int, omega: float, k1: float) -> StageBlocks:
    st = _material_stages(profile, int(n_steps))
    kv = wavenumbers(profile, k1)
    w = st.weights[..., None, None]
    lower = (kv[:, None] * st.mu * kv[None, :] - omega**2 * st.rho) * w
    upper = st.mu_inv * w
    return StageBlocks(np.ascontiguousarray(upper), np.ascontiguousarray(lower), st.nodes)
