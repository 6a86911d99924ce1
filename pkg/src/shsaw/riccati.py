"""Resolvent of the running propagator, integrated through one period.

For ``M(x2)`` the propagator of ``eta' = Q eta`` the resolvent
``R(x2) = (alpha I - M(x2))^-1`` obeys

    R' = R Q (alpha R - I),   R(0) = I / (alpha - 1),

which stays bounded even where ``M`` itself grows exponentially with the
number of harmonics.  Resolvents at other shifts follow algebraically from
``R(a2)`` without touching ``M``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import RetryableAlphaError, SingularShiftError
from .kernels import riccati_rk4

__all__ = [
    "ALPHA_BOX",
    "ResolventAtAlpha",
    "integrate_resolvent",
    "shift_resolvent",
    "draw_alpha",
    "alpha_stream",
]

log = logging.getLogger(__name__)

#: Real and imaginary ranges of the random shift, away from the real axis and unit circle.
ALPHA_BOX = ((-6.0, -3.0), (3.0, 6.0))

SHIFT_COND_LIMIT = 1e12


@dataclass(frozen=True)
class ResolventAtAlpha:
    alpha: complex
    value: np.ndarray
    steps: int
    residual: float


def _integrate(blocks, alpha: complex) -> np.ndarray:
    d = blocks.d
    r0 = np.eye(2 * d, dtype=complex) / (alpha - 1)
    with np.errstate(all="ignore"):
        out = riccati_rk4(blocks.upper, blocks.lower, complex(alpha), r0)
    return out


def integrate_resolvent(
    q_eval,
    alpha: complex,
    steps: int = 400,
    tol: float = 1e-8,
    max_steps: int = 6400,
) -> ResolventAtAlpha:
    """RK4 integration of the resolvent flow with step-doubling control.

    ``q_eval`` must provide ``blocks(n_steps)`` returning step-scaled stage
    blocks (see :class:`shsaw.stateop.StateMatrix`).  The step count starts
    at ``steps`` and doubles until two successive runs agree to ``tol``
    relative to ``max(1, ||R||)``.  Non-finite runs count as unconverged.

    Raises
    ------
    RetryableAlphaError
        The budget ``max_steps`` was exhausted without meeting ``tol``, or
        the flow overflowed at the finest resolution.
    """
    if steps < 16:
        raise ValueError("at least 16 RK4 steps are required")
    alpha = complex(alpha)
    n = int(steps)
    coarse = _integrate(q_eval.blocks(n), alpha)
    residual = np.inf
    while 2 * n <= max_steps:
        fine = _integrate(q_eval.blocks(2 * n), alpha)
        n *= 2
        if np.isfinite(fine).all() and np.isfinite(coarse).all():
            scale = max(1.0, np.abs(fine).sum(axis=1).max())
            residual = np.abs(fine - coarse).sum(axis=1).max() / scale
            if residual < tol:
                return ResolventAtAlpha(alpha, fine, n, float(residual))
        coarse = fine
    if not np.isfinite(coarse).all():
        raise RetryableAlphaError(f"resolvent flow overflowed at alpha={alpha:.4g} with {n} steps")
    raise RetryableAlphaError(
        f"resolvent residual {residual:.2e} above {tol:.1e} at alpha={alpha:.4g} after {n} steps"
    )


def shift_resolvent(r0: ResolventAtAlpha, z: complex) -> np.ndarray:
    """``(z I - M0)^-1`` from the resolvent at ``alpha`` via ``R_a (I + (z - a) R_a)^-1``."""
    if z == r0.alpha:
        return r0.value
    n = r0.value.shape[0]
    shift = np.eye(n) + (z - r0.alpha) * r0.value
    cond = np.linalg.cond(shift)
    if not np.isfinite(cond) or cond > SHIFT_COND_LIMIT:
        raise SingularShiftError(f"shift to z={z:.6g} is singular (cond={cond:.3g})")
    return r0.value @ np.linalg.inv(shift)


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def draw_alpha(rng) -> complex:
    """Uniform draw from ``[-6, -3] x [3i, 6i]``.

    ``rng`` is a :class:`numpy.random.Generator` (advanced in place) or a
    seed.
    """
    gen = _as_generator(rng)
    (re_lo, re_hi), (im_lo, im_hi) = ALPHA_BOX
    return complex(gen.uniform(re_lo, re_hi), gen.uniform(im_lo, im_hi))


def alpha_stream(seed, n_streams: int | None = None):
    """Independent generators for shift draws.

    With ``n_streams`` the master seed is split into that many child
    generators (one per worker or per scan column), otherwise a single
    generator is returned.
    """
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    if n_streams is None:
        return np.random.default_rng(ss)
    return [np.random.default_rng(s) for s in ss.spawn(n_streams)]
