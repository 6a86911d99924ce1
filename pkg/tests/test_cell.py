"""Geometry, Fourier coefficients and Toeplitz profiles."""
from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from shsaw.cell import (
    Circle, Lattice, Layer, Material, Rectangle, ToeplitzProfile, UnitCell, cross_section, depth_breakpoints,
    depth_mesh, flip_cell, profiles_at_depth, strip_fourier_coeff,
)

from conftest import EPOXY, STEEL, homogeneous, steel_epoxy

N_GRID = 2000  # every edge used below is a multiple of 1/200


def _profile_values(cell: UnitCell, x2: float, xs: np.ndarray, attr: str = "mu") -> np.ndarray:
    """Profile on a grid, averaging one-sided limits at jumps."""
    def value(x):
        x = x % cell.a1
        for s, e, mat in reversed(cross_section(cell, x2)):
            if s <= x < e:
                return getattr(mat, attr)
        return getattr(cell.background, attr)

    eps = 1e-9 * cell.a1
    return np.array([0.5 * (value(x - eps) + value(x + eps)) for x in xs])


def dft_coefficients(samples: np.ndarray, ms: np.ndarray) -> np.ndarray:
    """Fourier coefficients of a piecewise-constant profile whose jumps sit on the sample grid.

    The DFT of such samples equals the exact coefficient times
    ``(pi m/N) cot(pi m/N)``; dividing that factor out leaves only rounding.
    """
    n = samples.size
    dft = np.fft.fft(samples) / n
    out = dft[ms % n]
    nz = ms != 0
    t = np.pi * ms[nz] / n
    out[nz] = out[nz] * np.tan(t) / t
    return out


class TestStripCoefficient:
    def test_zero_width_has_no_harmonics(self):
        assert strip_fourier_coeff(1.48, 80.0, 0.37, 0.0, 1.0, 5) == 0

    def test_mean_value(self):
        assert strip_fourier_coeff(1.48, 80.0, 0.5, 0.25, 1.0, 0) == pytest.approx(40.74, abs=1e-13)

    def test_matches_dft_oracle(self):
        xs = np.arange(N_GRID) / N_GRID
        inside = np.abs((xs - 0.3 + 0.5) % 1.0 - 0.5)
        samples = np.where(np.isclose(inside, 0.17, atol=1e-12), 0.5, (inside < 0.17).astype(float))
        ms = np.arange(-8, 9)
        ref = dft_coefficients(samples, ms)
        got = np.array([strip_fourier_coeff(0.0, 1.0, 0.3, 0.17, 1.0, int(m)) for m in ms])
        assert np.abs(got - ref).max() < 1e-10
        assert abs(strip_fourier_coeff(0.0, 1.0, 0.3, 0.17, 1.0, 3) - ref[ms == 3][0]) < 1e-10

    def test_rejects_width_beyond_half_period(self):
        with pytest.raises(ValueError):
            strip_fourier_coeff(1.0, 2.0, 0.5, 0.6, 1.0, 1)

    @given(st.integers(0, 100), st.integers(1, 100), st.integers(-12, 12))
    def test_conjugate_symmetry(self, c, w, m):
        a = strip_fourier_coeff(1.0, 3.0, c / 200, w / 200, 1.0, m)
        b = strip_fourier_coeff(1.0, 3.0, c / 200, w / 200, 1.0, -m)
        assert abs(a - np.conj(b)) < 1e-14


class TestProfiles:
    def test_homogeneous_is_scalar(self):
        mu, rho = profiles_at_depth(homogeneous(), 3, 0.42)
        np.testing.assert_array_equal(mu, 1.48 * np.eye(3))
        np.testing.assert_array_equal(rho, 1.14 * np.eye(3))

    def test_depth_missing_circle_gives_background(self):
        mu, rho = profiles_at_depth(steel_epoxy(0.5), 5, 1.5)
        np.testing.assert_array_equal(mu, 1.48 * np.eye(5))
        np.testing.assert_array_equal(rho, 1.14 * np.eye(5))

    def test_widest_chord_matches_dft_oracle(self):
        cell = steel_epoxy(0.5)
        xs = np.arange(N_GRID) / N_GRID
        mu, rho = profiles_at_depth(cell, 5, 0.5)
        ms = np.arange(-4, 5)
        for mat, attr in ((mu, "mu"), (rho, "rho")):
            coef = dft_coefficients(_profile_values(cell, 0.5, xs, attr), ms)
            toeplitz = coef[np.arange(5)[:, None] - np.arange(5)[None, :] + 4]
            assert np.abs(mat - toeplitz).max() < 1e-10

    def test_even_truncation_rejected(self):
        with pytest.raises(ValueError):
            profiles_at_depth(homogeneous(), 4, 0.1)

    def test_depth_outside_period_rejected(self):
        with pytest.raises(ValueError):
            profiles_at_depth(homogeneous(), 3, 1.0)

    def test_later_primitive_wins(self):
        soft = Material("soft", 2.0, 1.0)
        cell = UnitCell(Lattice(1, 1), EPOXY, (Rectangle((0.5, 0.5), 0.6, 0.4, STEEL), Rectangle((0.5, 0.5), 0.2, 0.4, soft)))
        arcs = cross_section(cell, 0.5)
        covered = {(round(s, 12), round(e, 12)): m.name for s, e, m in arcs}
        assert covered[(0.4, 0.6)] == "soft"
        assert covered[(0.2, 0.4)] == "steel" and covered[(0.6, 0.8)] == "steel"

    def test_wraparound_strip(self):
        cell = UnitCell(Lattice(1, 1), EPOXY, (Rectangle((0.05, 0.5), 0.3, 0.4, STEEL),))
        spans = sorted((round(s, 12), round(e, 12)) for s, e, _ in cross_section(cell, 0.5))
        assert spans == [(0.0, 0.2), (0.9, 1.0)]

    def test_layer_covers_full_width(self):
        cell = UnitCell(Lattice(1, 3), EPOXY, (Layer(0.0, 1.5, STEEL),))
        mu, _ = profiles_at_depth(cell, 3, 0.7)
        np.testing.assert_allclose(mu, 80.0 * np.eye(3), atol=1e-13)
        mu, _ = profiles_at_depth(cell, 3, 2.0)
        np.testing.assert_allclose(mu, 1.48 * np.eye(3), atol=1e-13)


class TestFlip:
    def test_homogeneous_fixed_point(self):
        cell = homogeneous()
        f = flip_cell(cell)
        for x in np.linspace(0, 0.99, 7):
            for a, b in zip(profiles_at_depth(cell, 3, x), profiles_at_depth(f, 3, x)):
                np.testing.assert_array_equal(a, b)

    def test_reflects_circle(self):
        cell = UnitCell(Lattice(1, 2), EPOXY, (Circle((0.5, 0.6), 0.45, STEEL),))
        f = flip_cell(cell)
        assert f.geometry()[0].center == pytest.approx((0.5, 1.4))
        xs = (np.arange(100) + 0.5) / 100 * 2.0
        for x in xs:
            a = profiles_at_depth(f, 5, x)
            b = profiles_at_depth(cell, 5, (2.0 - x) % 2.0)
            np.testing.assert_allclose(a[0], b[0], atol=1e-12)
            np.testing.assert_allclose(a[1], b[1], atol=1e-12)

    def test_fig1_pair(self):
        a, b = steel_epoxy(0.5, flipped=True), steel_epoxy(0.5)
        assert flip_cell(a) == b
        assert a.geometry()[0].center == pytest.approx((0.5, 1.5))

    def test_involution_exact(self):
        cell = steel_epoxy(0.37)
        twice = flip_cell(flip_cell(cell))
        for x in np.linspace(0, 1.99, 23):
            for a, b in zip(profiles_at_depth(cell, 5, x), profiles_at_depth(twice, 5, x)):
                np.testing.assert_array_equal(a, b)


grid_pos = st.integers(0, 199).map(lambda k: k / 200)
grid_half = st.integers(1, 90).map(lambda k: k / 200)


@st.composite
def aligned_cells(draw):
    """Cells whose cross-section at the returned depth has all edges on the 1/200 grid."""
    mats = [Material("a", draw(st.floats(0.5, 50)), draw(st.floats(0.5, 10))),
            Material("b", draw(st.floats(0.5, 50)), draw(st.floats(0.5, 10)))]
    kind = draw(st.sampled_from(["circle", "rectangle", "layer"]))
    x2 = 0.5
    if kind == "circle":
        radius = draw(st.integers(10, 45)) / 100
        w = draw(st.integers(1, int(radius * 200) - 1)) / 200 if radius > 0.01 else radius
        dz = math.sqrt(max(radius**2 - w**2, 0.0))
        prim = Circle((draw(grid_pos), x2 - dz), radius, mats[1])
    elif kind == "rectangle":
        prim = Rectangle((draw(grid_pos), x2), 2 * draw(grid_half), 0.3, mats[1])
    else:
        prim = Layer(0.3, 0.7, mats[1])
    return UnitCell(Lattice(1, 1), mats[0], (prim,)), x2


class TestProfileProperties:
    @given(aligned_cells(), st.sampled_from([1, 3, 5, 7]))
    def test_hermitian_toeplitz(self, cell_x2, d):
        cell, x2 = cell_x2
        for mat in profiles_at_depth(cell, d, x2):
            np.testing.assert_allclose(mat, mat.conj().T, atol=1e-13)
            for k in range(-(d - 1), d):
                diag = np.diagonal(mat, k)
                assert np.abs(diag - diag[0]).max() < 1e-14

    @given(aligned_cells())
    def test_mean_matches_midpoint_average(self, cell_x2):
        cell, x2 = cell_x2
        xs = (np.arange(N_GRID) + 0.5) / N_GRID
        mu, rho = profiles_at_depth(cell, 3, x2)
        assert abs(mu[1, 1] - _profile_values(cell, x2, xs, "mu").mean()) < 1e-10
        assert abs(rho[1, 1] - _profile_values(cell, x2, xs, "rho").mean()) < 1e-10

    @given(aligned_cells())
    def test_dft_equivalence(self, cell_x2):
        cell, x2 = cell_x2
        xs = np.arange(N_GRID) / N_GRID
        mu, _ = profiles_at_depth(cell, 7, x2)
        coef = dft_coefficients(_profile_values(cell, x2, xs, "mu"), np.arange(-6, 7))
        assert np.abs(mu - coef[np.arange(7)[:, None] - np.arange(7)[None, :] + 6]).max() < 1e-9

    @given(st.floats(0.05, 1.95), st.floats(0.1, 0.9))
    def test_constant_between_breakpoints(self, c2, frac):
        cell = UnitCell(Lattice(1, 2), EPOXY, (Rectangle((0.3, c2), 0.4, 0.2, STEEL),))
        bps = depth_breakpoints(cell)
        for lo, hi in zip(bps[:-1], bps[1:]):
            a = profiles_at_depth(cell, 3, lo + 0.01 * (hi - lo))
            b = profiles_at_depth(cell, 3, lo + frac * (hi - lo))
            np.testing.assert_array_equal(a[0], b[0])


class TestDepthMesh:
    @pytest.mark.parametrize("cell", [homogeneous(), steel_epoxy(0.5), steel_epoxy(0.95)])
    def test_steps_tile_the_period(self, cell):
        mesh = depth_mesh(cell, 400, 5)
        assert mesh.n_steps == 400
        np.testing.assert_allclose(mesh.nodes[1:, 0], mesh.nodes[:-1, 2], atol=1e-14)
        assert mesh.nodes[0, 0] == 0.0 and mesh.nodes[-1, 2] == pytest.approx(cell.a2, abs=1e-14)

    def test_breakpoints_are_step_boundaries(self):
        cell = steel_epoxy(0.5)
        mesh = depth_mesh(cell, 300, 5)
        starts = set(np.round(mesh.nodes[:, 0], 12))
        for b in depth_breakpoints(cell)[:-1]:
            assert round(float(b), 12) in starts

    def test_profile_stack_matches_pointwise(self):
        prof = ToeplitzProfile(steel_epoxy(0.5), 5)
        xs = np.array([0.1, 0.5, 0.93, 1.2])
        mu, rho = prof.stack(xs)
        for j, x in enumerate(xs):
            a, b = prof(x)
            np.testing.assert_array_equal(mu[j], a)
            np.testing.assert_array_equal(rho[j], b)
