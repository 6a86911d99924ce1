"""Brute-force and closed-form references.

Nothing here is used by the production path; it exists to check it.

* :func:`monodromy_direct` integrates ``M' = Q M`` over one period with RK4.
  The period is split in two halves so eigenvalues of moderate modulus can
  be recovered from the pencil ``(M_a, M_b^-1)`` without forming the badly
  conditioned product.
* :func:`spectral_projectors` builds the projectors from eigenvectors using
  the ``T``-pairing of decaying and increasing modes.
* Homogeneous media and 1D laminates have closed forms, harmonic by harmonic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as sla

from .cell import Layer, Material, ToeplitzProfile, UnitCell, depth_mesh, flip_cell
from .errors import ContourCollisionError, OracleUnavailableError
from .stateop import StateMatrix, _checked_inverse, assemble_q, structure_matrices, wavenumbers

__all__ = [
    "MonodromyMatrix",
    "monodromy_direct",
    "resolvent_direct",
    "spectral_projectors",
    "converged_projectors",
    "homogeneous_np",
    "homogeneous_monodromy",
    "homogeneous_projector",
    "laminate_monodromy",
    "laminate_effective_speed",
    "symmetry_battery",
    "BatteryReport",
]

MAX_D = 9
MAX_GROWTH = 50.0
UNIT_BAND = 1e-6


@dataclass(frozen=True)
class MonodromyMatrix:
    m0: np.ndarray
    d: int
    conditioning: float
    halves: tuple[np.ndarray, np.ndarray] | None = field(default=None, repr=False)
    log_det: float = 0.0

    @property
    def inverse(self) -> np.ndarray:
        """``M0^-1`` through the ``T``-identity."""
        T = structure_matrices(self.d).T
        return -T @ self.m0.conj().T @ T


def _rk4_steps(k0: np.ndarray, km: np.ndarray, k1: np.ndarray) -> np.ndarray:
    """One-step RK4 propagators from stage matrices already scaled by the step."""
    eye = np.eye(k0.shape[-1])
    a = k0
    b = km @ (eye + 0.5 * a)
    c = km @ (eye + 0.5 * b)
    e = k1 @ (eye + c)
    return eye + (a + 2 * b + 2 * c + e) / 6


@lru_cache(maxsize=4)
def _materials(profile: ToeplitzProfile, steps: int):
    # evaluated depth by depth, independently of the production stage cache
    mesh = depth_mesh(profile.cell, steps, profile.d, (profile.cell.a2 / 2,))
    xs = mesh.samples.ravel()
    pairs = [profile(x) for x in xs]
    shape = mesh.samples.shape + (profile.d, profile.d)
    mu = np.array([m for m, _ in pairs]).reshape(shape)
    rho = np.array([r for _, r in pairs]).reshape(shape)
    mu_inv = np.array([_checked_inverse(m, x) for (m, _), x in zip(pairs, xs)]).reshape(shape)
    return mesh, mu, rho, mu_inv


def _growth_exponent(mesh, mu_inv: np.ndarray, lower: np.ndarray) -> float:
    # integral of the spectral radius of Q over the period, via Q^2 = diag(mu^-1 B, B mu^-1)
    lam = np.linalg.eigvals(mu_inv[:, 1] @ lower[:, 1])
    return float(np.abs(mesh.weights[:, 1]) @ np.sqrt(np.abs(lam).max(axis=1)))


def monodromy_direct(q_eval, steps: int = 4096, guard: bool = True) -> MonodromyMatrix:
    """Propagator over one period by RK4 on ``M' = Q M``.

    ``q_eval`` is a :class:`~shsaw.stateop.StateMatrix`, or any callable
    ``x2 -> Q`` paired with ``(d, a2)`` attributes (then a uniform mesh is
    used).

    Raises
    ------
    OracleUnavailableError
        ``d > 9`` or the integrated spectral radius of ``Q`` exceeds 50.
    """
    if isinstance(q_eval, StateMatrix):
        d = q_eval.d
        if guard and d > MAX_D:
            raise OracleUnavailableError(f"direct monodromy refused for d={d} > {MAX_D}")
        mesh, mu, rho, mu_inv = _materials(q_eval.profile, int(steps))
        kv = wavenumbers(q_eval.profile, q_eval.k1)
        lower = kv[:, None] * mu * kv[None, :] - q_eval.omega**2 * rho
        if guard:
            growth = _growth_exponent(mesh, mu_inv, lower)
            if growth > MAX_GROWTH:
                raise OracleUnavailableError(f"growth exponent {growth:.1f} exceeds {MAX_GROWTH}")
        w = mesh.weights[..., None, None]
        ks = np.zeros(mesh.samples.shape + (2 * d, 2 * d), dtype=complex)
        ks[..., :d, d:] = w * mu_inv
        ks[..., d:, :d] = w * lower
        props = _rk4_steps(ks[:, 0], ks[:, 1], ks[:, 2])
        starts = mesh.samples[:, 0]
        a2 = q_eval.cell.a2
    else:
        d, a2 = q_eval.d, q_eval.a2
        t = np.linspace(0, a2, 2 * steps + 1)
        h = a2 / steps
        ks = np.array([[h * q_eval(t[2 * j + s]) for s in range(3)] for j in range(steps)])
        props = _rk4_steps(ks[:, 0], ks[:, 1], ks[:, 2])
        starts = t[0:-1:2]
    n = 2 * d
    half = int(np.argmin(np.abs(starts - a2 / 2)))
    halves = [np.eye(n, dtype=complex), np.eye(n, dtype=complex)]
    for j, step in enumerate(props):
        k = 0 if j < half else 1
        halves[k] = step @ halves[k]
    log_det = float(np.linalg.slogdet(props)[1].sum())
    m0 = halves[1] @ halves[0]
    return MonodromyMatrix(m0, d, float(np.abs(m0).max()), (halves[0], halves[1]), log_det)


def resolvent_direct(mono: MonodromyMatrix, z: complex) -> np.ndarray:
    """``(z I - M0)^-1`` from the two half-period propagators.

    With ``M0 = M_b M_a`` the inverse equals ``(z M_b^-1 - M_a)^-1 M_b^-1``,
    whose factors grow only half as fast as ``M0`` itself.
    """
    n = 2 * mono.d
    if mono.halves is None:
        return np.linalg.inv(z * np.eye(n) - mono.m0)
    ma, mb = mono.halves
    T = structure_matrices(mono.d).T
    mb_inv = -T @ mb.conj().T @ T
    return np.linalg.solve(z * mb_inv - ma, mb_inv)


def _eig(mono: MonodromyMatrix) -> tuple[np.ndarray, np.ndarray]:
    T = structure_matrices(mono.d).T
    if mono.halves is None:
        return sla.eig(mono.m0)
    ma, mb = mono.halves
    mb_inv = -T @ mb.conj().T @ T
    q, w = sla.eig(ma, mb_inv)
    return q, w


def spectral_projectors(mono: MonodromyMatrix, T: np.ndarray | None = None, radius: float = 1.0):
    """Projectors from the eigen-decomposition of the monodromy matrix.

    Modes with ``|q| < radius`` are decaying, ``|q| > 1/radius`` increasing,
    the rest (``radius = 1`` means ``||q| - 1| < 1e-6``) propagating.
    Decaying and increasing eigenvectors are normalized so that
    ``W_d^* T W_i = I``, giving ``P_d = -W_d W_i^* T`` and
    ``P_i = W_i W_d^* T``.

    Returns a :class:`~shsaw.projector.ProjectorSet`.
    """
    from .projector import ProjectorSet

    d = mono.d
    if T is None:
        T = structure_matrices(d).T
    q, w = _eig(mono)
    # beta = 0 in the pencil is a mode growing past double range: keep it as increasing
    if np.isnan(q).any() or not np.isfinite(w).all():
        raise OracleUnavailableError("singular monodromy pencil")
    absq = np.abs(q)
    lo, hi = (1 - UNIT_BAND, 1 + UNIT_BAND) if radius >= 1 else (radius, 1 / radius)
    dec, inc = absq < lo, absq > hi
    wd, wi = w[:, dec], w[:, inc]
    if wd.shape[1] != wi.shape[1]:
        raise OracleUnavailableError(f"unbalanced spectrum: {wd.shape[1]} decaying vs {wi.shape[1]} increasing")
    n = 2 * d
    if wd.shape[1]:
        G = wd.conj().T @ T @ wi
        if np.linalg.cond(G) > 1e10:
            raise OracleUnavailableError("defective or near-defective monodromy matrix")
        wi = wi @ np.linalg.inv(G)
        p_d = -wd @ wi.conj().T @ T
        p_i = wi @ wd.conj().T @ T
    else:
        p_d = np.zeros((n, n), dtype=complex)
        p_i = np.zeros((n, n), dtype=complex)
    p_p = np.eye(n) - p_d - p_i
    n_p = int(n - dec.sum() - inc.sum())
    resid = float(np.abs(p_d @ p_d - p_d).sum(axis=1).max())
    return ProjectorSet(p_d, p_i, p_p, n_p, 0, resid, radius)


def converged_projectors(q_eval: StateMatrix, radius: float = 1.0, tol: float = 1e-8, steps: int = 2048,
                         max_steps: int = 32768):
    """Spectral projectors with the RK4 step count doubled until ``P_d`` settles.

    Returns ``(projectors, steps, change)`` where ``change`` is the max-row-sum
    difference of ``P_d`` between the last two step counts.

    Raises
    ------
    OracleUnavailableError
        From :func:`monodromy_direct` or :func:`spectral_projectors`, or when
        ``max_steps`` is reached with ``change`` still above ``tol``.
    """
    prev = spectral_projectors(monodromy_direct(q_eval, steps), radius=radius)
    change = math.inf
    while steps < max_steps:
        steps *= 2
        cur = spectral_projectors(monodromy_direct(q_eval, steps), radius=radius)
        change = float(np.abs(cur.p_d - prev.p_d).sum(axis=1).max())
        prev = cur
        if change < tol:
            return cur, steps, change
    raise OracleUnavailableError(f"projector still moving by {change:.2e} at {steps} steps")


def homogeneous_np(mu: float, rho: float, a1: float, omega: float, k1: float, M: int) -> int:
    """Propagating-mode count of a homogeneous medium: ``2 #{m : (k1 + 2 pi m/a1)^2 < w^2 rho/mu}``."""
    m = np.arange(-M, M + 1)
    k = k1 + 2 * np.pi * m / a1
    return int(2 * np.count_nonzero(k**2 < omega**2 * rho / mu))


def _layer_matrix(mu: float, rho: float, omega: float, k: float, h: float) -> np.ndarray:
    kap2 = complex(k * k - omega**2 * rho / mu)
    kap = np.sqrt(kap2)
    x = kap * h
    c = np.cosh(x)
    s_over = h * (np.sinh(x) / x if abs(x) > 1e-8 else 1 + x * x / 6)
    return np.array([[c, s_over / mu], [mu * kap2 * s_over, c]], dtype=complex)


def homogeneous_monodromy(mu: float, rho: float, omega: float, k: float, length: float) -> np.ndarray:
    """2x2 propagator ``[[cosh, sinh/(mu kappa)], [mu kappa sinh, cosh]]`` of one harmonic."""
    return _layer_matrix(mu, rho, omega, k, length)


def laminate_monodromy(layers: list[tuple[Material, float]], omega: float, k: float) -> np.ndarray:
    """Product of layer propagators for a 1D stack, top layer first."""
    out = np.eye(2, dtype=complex)
    for mat, h in layers:
        out = _layer_matrix(mat.mu, mat.rho, omega, k, h) @ out
    return out


def homogeneous_projector(mu: float, rho: float, a1: float, omega: float, k1: float, d: int) -> np.ndarray:
    """Decaying-mode projector of a homogeneous medium in the ``(u, mu u')`` basis.

    Harmonics are uncoupled; an evanescent harmonic with decay ``kappa``
    projects onto ``(1, -mu kappa)`` along ``(1, mu kappa)``.  Propagating
    harmonics contribute nothing.
    """
    M = (d - 1) // 2
    k = k1 + 2 * np.pi * np.arange(-M, M + 1) / a1
    p = np.zeros((2 * d, 2 * d), dtype=complex)
    for j, kj in enumerate(k):
        kap2 = kj * kj - omega**2 * rho / mu
        if kap2 <= 0:
            continue
        mk = mu * math.sqrt(kap2)
        p[j, j] = 0.5
        p[j, d + j] = -0.5 / mk
        p[d + j, j] = -0.5 * mk
        p[d + j, d + j] = 0.5
    return p


def _laminate_layers(cell: UnitCell) -> list[tuple[Material, float]]:
    """Layer sequence of a horizontally layered cell, top first."""
    if any(not isinstance(p, Layer) for p in cell.inclusions):
        raise OracleUnavailableError("laminate closed forms need a layers-only cell")
    from .cell import cross_section, depth_breakpoints

    bps = depth_breakpoints(cell)
    out = []
    for lo, hi in zip(bps[:-1], bps[1:]):
        arcs = cross_section(cell, 0.5 * (lo + hi))
        out.append((arcs[-1][2] if arcs else cell.background, hi - lo))
    return out


def laminate_effective_speed(cell: UnitCell) -> float:
    """Long-wave onset slope of the first transonic curve for horizontal layers.

    For layers normal to ``x2`` the effective matrix is diagonal with
    ``C11 = <mu>/<rho>`` and ``C22 = <1/mu>^-1/<rho>``, so
    ``c_tr^2 = det(C)/C22 = <mu>/<rho>``.
    """
    layers = _laminate_layers(cell)
    hs = np.array([h for _, h in layers])
    mu = np.array([m.mu for m, _ in layers])
    rho = np.array([m.rho for m, _ in layers])
    total = hs.sum()
    mean_rho = hs @ rho / total
    c11 = (hs @ mu / total) / mean_rho
    c22 = (total / (hs @ (1 / mu))) / mean_rho
    return math.sqrt(c11 * c22 / c22)


@dataclass
class BatteryReport:
    cell: str
    d: int
    omega: float
    k1: float
    tolerance: float
    residuals: dict[str, float] = field(default_factory=dict)
    skipped: dict[str, str] = field(default_factory=dict)

    @property
    def passed(self) -> dict[str, bool]:
        return {k: bool(v < self.tolerance) for k, v in self.residuals.items()}

    @property
    def ok(self) -> bool:
        return all(self.passed.values())

    def as_dict(self) -> dict:
        return {
            "cell": self.cell,
            "d": self.d,
            "omega": self.omega,
            "k1": self.k1,
            "tolerance": self.tolerance,
            "ok": self.ok,
            "identities": {
                k: {"residual": v, "pass": v < self.tolerance} for k, v in self.residuals.items()
            },
            "skipped": dict(self.skipped),
        }

    def lines(self) -> list[str]:
        out = [f"[{self.cell}] d={self.d} omega={self.omega:.6g} k1={self.k1:.6g}"]
        for k, v in self.residuals.items():
            out.append(f"  {'PASS' if v < self.tolerance else 'FAIL'}  {k:<28s} {v:.3e}")
        for k, why in self.skipped.items():
            out.append(f"  SKIP  {k:<28s} {why}")
        return out


def _rel(a: np.ndarray, scale: float) -> float:
    return float(np.abs(a).max() / max(1.0, scale))


def symmetry_battery(
    cell: UnitCell,
    d: int,
    omega: float,
    k1: float,
    seed=0,
    tol: float = 1e-6,
    steps: int = 4096,
    contour_radius: float = 0.99,
    riccati_tol: float = 1e-10,
) -> BatteryReport:
    """Evaluate the algebraic identities of the problem at one ``(omega, k1)``.

    Matrix identities are measured relative to the size of the matrices
    involved; projector identities in absolute terms.
    """
    from .projector import companion_projectors, contour_projector, extract_blocks
    from .riccati import draw_alpha, integrate_resolvent

    rng = np.random.default_rng(seed)
    prof = ToeplitzProfile(cell, d)
    sm = structure_matrices(d)
    T, S = sm.T, sm.S
    rep = BatteryReport(cell.name or "cell", d, omega, k1, tol)

    worst = 0.0
    for x in rng.uniform(0, cell.a2, 8):
        q = assemble_q(prof, omega, k1, x)
        worst = max(worst, _rel(q.conj().T - T @ q @ T, np.abs(q).max()))
    rep.residuals["Q* = -T^-1 Q T"] = worst

    qe = StateMatrix(prof, omega, k1)
    mono = monodromy_direct(qe, steps)
    ma, mb = mono.halves
    sym = max(_rel(h.conj().T @ T @ h - T, np.abs(h).max() ** 2) for h in (ma, mb))
    rep.residuals["M* T M = T"] = sym
    rep.residuals["|det M0| = 1"] = abs(math.expm1(mono.log_det))

    flipped = monodromy_direct(StateMatrix(ToeplitzProfile(flip_cell(cell), d), omega, k1), steps)
    # M0^-1 = S M0~ S, compared half by half: (M_b M_a)^-1 = M_a^-1 M_b^-1
    fa, fb = flipped.halves
    inv_a = -T @ ma.conj().T @ T
    inv_b = -T @ mb.conj().T @ T
    rep.residuals["M0^-1 = S M0~ S"] = max(
        _rel(inv_a - S @ fb @ S, np.abs(ma).max()), _rel(inv_b - S @ fa @ S, np.abs(mb).max())
    )

    try:
        oracle = converged_projectors(qe, contour_radius, tol=0.1 * tol, steps=steps)[0]
    except OracleUnavailableError as exc:
        rep.skipped["oracle projector"] = str(exc)
        oracle = None
    r0 = integrate_resolvent(qe, draw_alpha(rng), tol=riccati_tol, max_steps=25600)
    try:
        p_d, _, idem = contour_projector(r0, contour_radius, max_nodes=16384)
    except (ValueError, ContourCollisionError) as exc:
        # an unusable contour is a failed identity, not a crash
        rep.residuals["P_d idempotent"] = math.inf
        rep.skipped["projector identities"] = str(exc)
        return rep
    p_i, p_p = companion_projectors(p_d, T)
    rep.residuals["P_d idempotent"] = idem
    rep.residuals["P_d + P_i + P_p = I"] = float(np.abs(p_d + p_i + p_p - np.eye(2 * d)).max())
    rep.residuals["P_p = T^-1 P_p* T"] = float(np.abs(p_p + T @ p_p.conj().T @ T).max())
    if oracle is not None:
        rep.residuals["contour P_d = spectral P_d"] = float(np.abs(p_d - oracle.p_d).sum(axis=1).max())
        rep.residuals["P_d P_i = 0"] = float(np.abs(p_d @ p_i).sum(axis=1).max())
    n_p = np.trace(p_p).real
    if abs(n_p) < 0.05:
        p1, p2, p3, p4 = extract_blocks(p_d)
        rep.residuals["P_d3 self-adjoint"] = float(np.abs(p3 - p3.conj().T).max())
        rep.residuals["P_d2 self-adjoint"] = float(np.abs(p2 - p2.conj().T).max())
        rep.residuals["P_d1 + P_d4* = I"] = float(np.abs(p1 + p4.conj().T - np.eye(d)).max())
        rep.residuals["trace P_d = d"] = float(abs(np.trace(p_d) - d))
    else:
        rep.skipped["N_p = 0 block identities"] = f"propagative point, trace P_p = {n_p:.3f}"

    q, w = _eig(mono)
    off = np.isfinite(q) & (np.abs(np.abs(q) - 1) > 1e-3)
    if off.any():
        wn = w[:, off] / np.linalg.norm(w[:, off], axis=0)
        flux = np.abs(np.einsum("ij,ik,kj->j", wn.conj(), T, wn))
        rep.residuals["flux w*Tw = 0 (|q| != 1)"] = float(flux.max())
    return rep
