"""Shared materials, cells and hypothesis settings."""
from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from shsaw.cell import Circle, Lattice, Layer, Material, Rectangle, UnitCell

settings.register_profile(
    "shsaw", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow], derandomize=True
)
settings.load_profile("shsaw")

EPOXY = Material("epoxy", 1.48, 1.14)
STEEL = Material("steel", 80.0, 7.8)
FE = Material("Fe", 7.88, 116.0)  # constants as printed in the source tables
PB = Material("Pb", 11.6, 14.9)


def steel_epoxy(depth: float = 0.5, flipped: bool = False) -> UnitCell:
    """1 x 2 cell, steel cylinder R = 0.45 centred at ``depth`` below the surface.

    ``depth = 1.5`` puts the slow epoxy on top: that cell carries the surface
    waves, ``depth = 0.5`` is its reflection.
    """
    cell = UnitCell(Lattice(1.0, 2.0), EPOXY, (Circle((0.5, depth), 0.45, STEEL),), name="steel/epoxy")
    return UnitCell(cell.lattice, cell.background, cell.inclusions, flipped, cell.name)


def homogeneous(a1: float = 1.0, a2: float = 1.0) -> UnitCell:
    return UnitCell(Lattice(a1, a2), EPOXY, (), name="epoxy")


def fe_laminate() -> UnitCell:
    return UnitCell(Lattice(1.0, 3.0), EPOXY, (Layer(0.0, 1.5, FE),), name="Fe/epoxy")


def random_cell(seed: int) -> UnitCell:
    """An asymmetric cell: a circle and a rectangle at random positions, soft contrast."""
    rng = np.random.default_rng(seed)
    soft = Material("soft", 1.0, 1.0)
    hard = Material("hard", float(rng.uniform(2.0, 4.0)), float(rng.uniform(1.0, 3.0)))
    other = Material("other", float(rng.uniform(0.5, 1.5)), float(rng.uniform(0.5, 2.0)))
    circ = Circle((float(rng.uniform(0, 1)), float(rng.uniform(0.2, 0.4))), float(rng.uniform(0.1, 0.2)), hard)
    rect = Rectangle((float(rng.uniform(0, 1)), float(rng.uniform(0.6, 0.8))), float(rng.uniform(0.1, 0.5)),
                     float(rng.uniform(0.05, 0.15)), other)
    return UnitCell(Lattice(1.0, 1.0), soft, (circ, rect), name=f"random{seed}")


def kappa(mu: float, rho: float, omega: float, k: float) -> float:
    return math.sqrt(k * k - omega * omega * rho / mu)



ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
