"""Dispersion functions, root classification and the per-point solver."""
from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from shsaw.cell import flip_cell
from shsaw.dispersion import (
    DispersionSample, PointSolver, SolverSettings, classify_root, eval_dd3, eval_di, eval_dsaw, null_direction,
    raw_trace_p, refine_minimum, saw_matrix,
)
from shsaw.errors import NormalizationError
from shsaw.oracle import homogeneous_projector
from shsaw.projector import extract_blocks

from conftest import EPOXY, homogeneous, kappa, random_cell, steel_epoxy

MU, RHO = EPOXY.mu, EPOXY.rho
# D_d3 zero of the slow-top steel/epoxy cell at d = 5, k1 = 4 pi/5, from Brent's method
# on det P_d3 of the spectral-decomposition projector (direct monodromy, 4096 steps)
ROOT_D5 = 3.2897106757
K_ROOT = 0.8 * np.pi


def _solver(cell, d, **kw):
    return PointSolver(cell, SolverSettings(d=d, riccati_tol=1e-8, riccati_max_steps=25600, **kw))


def _hom_blocks(omega, k1):
    return extract_blocks(homogeneous_projector(MU, RHO, 1.0, omega, k1, 1))


class TestAnalyticHomogeneous:
    @pytest.mark.parametrize("omega,k1", [(1.0, 2.0), (0.5, 1.0), (2.0, 3.0)])
    def test_dsaw_closed_form(self, omega, k1):
        kap = kappa(MU, RHO, omega, k1)
        assert eval_dsaw(_hom_blocks(omega, k1)) == pytest.approx(0.25 + (MU * kap) ** 2 / 4, rel=1e-12)

    def test_di_closed_form(self):
        kap = kappa(MU, RHO, 1.0, 2.0)
        p_d = homogeneous_projector(MU, RHO, 1.0, 1.0, 2.0, 1)
        p_i = np.array([[0.5, 0.5 / (MU * kap)], [MU * kap / 2, 0.5]])
        assert np.allclose(p_d + p_i, np.eye(2))
        assert eval_di(extract_blocks(p_i)) == pytest.approx(0.25 + (MU * kap) ** 2 / 4, rel=1e-12)

    def test_dd3_is_decay_ratio(self):
        sol = _solver(homogeneous(), 1)
        rng = np.random.default_rng(0)
        for omega in (0.3, 0.9, 1.5):
            s = sol.sample(omega, 2.0, rng)
            assert s.d_d3 == pytest.approx(kappa(MU, RHO, omega, 2.0) / 2.0, abs=1e-7)
            assert s.d_d3 > 0

    def test_main_path_matches_closed_form_dsaw(self):
        s = _solver(homogeneous(), 1).sample(1.0, 2.0, np.random.default_rng(1))
        kap = kappa(MU, RHO, 1.0, 2.0)
        assert s.d_saw == pytest.approx(0.25 + (MU * kap) ** 2 / 4, rel=1e-7)
        assert s.n_p == 0


def test_dd3_normalized_at_rest():
    s = _solver(steel_epoxy(1.5), 5).sample(0.0, 1.0, np.random.default_rng(2))
    assert s.d_d3 == 1.0 and s.n_p == 0


def test_dd3_normalizer_errors():
    with pytest.raises(NormalizationError):
        eval_dd3(np.eye(2), None)
    with pytest.raises(NormalizationError):
        eval_dd3(np.eye(2), np.diag([1.0, 1e-12]))


def test_saw_matrix_is_hermitian_psd():
    rng = np.random.default_rng(0)
    p1, p3 = (rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)) for _ in range(2))
    h = saw_matrix(p1, p3)
    assert np.array_equal(h, h.conj().T)
    assert np.linalg.eigvalsh(h).min() > -1e-12


def test_null_direction():
    p3 = np.diag([2.0, 1e-9, 1.0])
    u = null_direction(p3)
    assert np.linalg.norm(p3 @ u) < 1e-8 and np.linalg.norm(u) == pytest.approx(1.0)


def test_refine_minimum_parabola():
    w, v = refine_minimum(lambda x: (x - 0.3) ** 2 + 1, 0.0, 1.0, 1e-8)
    assert w == pytest.approx(0.3, abs=1e-7) and v == pytest.approx(1.0)


class TestClassification:
    @pytest.fixture(scope="class")
    @staticmethod
    def pair():
        slow_top = steel_epoxy(1.5)
        return _solver(slow_top, 5), _solver(flip_cell(slow_top), 5)

    def test_root_is_surface_on_slow_top_cell(self, pair):
        c = classify_root(pair[0], ROOT_D5, K_ROOT, np.random.default_rng(0))
        assert c.kind == "surface"
        assert c.d_saw < c.tol_saw and c.u_norm > 1e-3

    def test_same_root_is_nonphysical_on_reciprocal_cell(self, pair):
        c = classify_root(pair[1], ROOT_D5, K_ROOT, np.random.default_rng(0))
        assert c.kind == "nonphysical"

    def test_regular_point_is_indeterminate(self, pair):
        c = classify_root(pair[0], 2.0, K_ROOT, np.random.default_rng(0))
        assert c.kind == "indeterminate"

    def test_reciprocity_of_functions(self, pair):
        rng = np.random.default_rng(4)
        for omega in (1.0, 2.5, 3.2):
            a = pair[0].sample(omega, K_ROOT, rng)
            b = pair[1].sample(omega, K_ROOT, rng)
            assert a.n_p == b.n_p == 0
            assert abs(a.d_saw - b.d_i) < 1e-6 and abs(a.d_i - b.d_saw) < 1e-6
            assert abs(a.d_d3 - b.d_d3) < 1e-6 * max(1.0, abs(a.d_d3))


def test_failed_point_is_flagged(monkeypatch):
    sol = _solver(steel_epoxy(1.5), 3)
    monkeypatch.setattr(type(sol), "resolvent", lambda *a, **k: (_ for _ in ()).throw(
        __import__("shsaw.dispersion", fromlist=["PointFailure"]).PointFailure("forced")))
    s = sol.sample(1.0, 1.0, np.random.default_rng(0))
    assert s.failed and s.indeterminate and np.isnan(s.d_saw)
    assert s.flags["failed"]


def test_sample_failure_constructor():
    s = DispersionSample.failure(1.0, 2.0, "boom")
    assert s.n_p is None and s.message == "boom"


def test_settings_validation():
    with pytest.raises(ValueError):
        SolverSettings(d=4)
    with pytest.raises(ValueError):
        SolverSettings(contour_radius=1.0)
    assert SolverSettings(d=5).with_d(9).d == 9


def test_raw_count_crosses_midpoint_on_contour():
    sol = _solver(homogeneous(), 1)
    k1 = 2.0

    def count(q, r, n=512):
        # homogeneous slab whose decaying Floquet multiplier is exp(-kappa) = q
        omega = np.sqrt((k1**2 - np.log(q) ** 2) * MU / RHO)
        r0, _ = sol.resolvent(omega, k1, np.random.default_rng(0))
        return raw_trace_p(r0, r, n)

    assert count(0.99 * (1 - 1e-3), 0.99) < 1.0 < count(0.99 * (1 + 1e-3), 0.99)
    assert count(0.99, 0.98, 4096) == pytest.approx(2.0, abs=1e-6)
    assert count(0.99, 0.995, 4096) == pytest.approx(0.0, abs=1e-6)


cells = st.sampled_from([steel_epoxy(1.5), steel_epoxy(0.5), random_cell(0), random_cell(6)])


@given(cells, st.sampled_from([1, 3, 5]), st.floats(0.05, 5.0), st.floats(0.1, np.pi))
def test_function_properties(cell, d, omega, k1):
    sol = _solver(cell, d)
    s = sol.sample(omega, k1, np.random.default_rng(0))
    if s.failed:
        return
    assert s.d_saw >= 0 and s.d_i >= 0
    if s.n_p == 0:
        assert abs(s.d_d3_imag) < 1e-6 * max(1.0, abs(s.d_d3))
    elif s.n_p:
        ps, _, _ = sol.projectors(omega, k1, np.random.default_rng(0))
        # det P_d3 vanishes identically where modes propagate
        assert abs(np.linalg.det(ps.blocks[2])) < 1e-6 * max(1.0, np.abs(ps.blocks[2]).max()) ** d


@given(st.sampled_from([0, 1, 2, 3]), st.sampled_from([1, 3]), st.floats(0.1, 3.0), st.floats(0.2, np.pi))
def test_di_equals_dsaw_of_reciprocal(seed, d, omega, k1):
    cell = random_cell(seed)
    a = _solver(cell, d).sample(omega, k1, np.random.default_rng(1))
    b = _solver(flip_cell(cell), d).sample(omega, k1, np.random.default_rng(1))
    if a.failed or b.failed or a.n_p != 0:
        return
    assert b.n_p == 0
    assert abs(a.d_i - b.d_saw) < 1e-6
    assert abs(a.d_d3 - b.d_d3) < 1e-6 * max(1.0, abs(a.d_d3))
