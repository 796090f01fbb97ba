"""Steady 16x16 cavity at U=0.5 against digitized reference contour points.

The data file holds (x, y, level) points on the stream-function and
velocity-magnitude contour lines of a published 16x16 cavity solution, in
lattice coordinates. Levels are rounded to four decimals.
"""

import csv
from pathlib import Path

import numpy as np
import pytest

from qlbm.lattice import SimConfig, run

DATA = Path(__file__).parent / "data" / "cavity16_reference_contours.csv"


def load_points(field, solver):
    with open(DATA) as fh:
        rows = [r for r in csv.DictReader(fh) if r["field"] == field and r["solver"] == solver]
    return np.array([[float(r["x"]), float(r["y"]), float(r["level"])] for r in rows])


def bilinear(grid, x, y):
    ny, nx = grid.shape
    x0 = np.clip(np.floor(x).astype(int), 0, nx - 2)
    y0 = np.clip(np.floor(y).astype(int), 0, ny - 2)
    tx, ty = x - x0, y - y0
    return (grid[y0, x0] * (1 - tx) * (1 - ty) + grid[y0, x0 + 1] * tx * (1 - ty)
            + grid[y0 + 1, x0] * (1 - tx) * ty + grid[y0 + 1, x0 + 1] * tx * ty)


@pytest.fixture(scope="module")
def steady():
    s = run(SimConfig(U=0.5, steps=500))
    return {"psi": s.psi, "velocity_magnitude": np.hypot(s.u, s.v)}


@pytest.mark.parametrize("field", ["psi", "velocity_magnitude"])
@pytest.mark.parametrize("solver,tol", [("classical", 1e-4), ("quantum", 1e-3)])
def test_contour_points_lie_on_levels(steady, field, solver, tol):
    pts = load_points(field, solver)
    assert len(pts) > 200
    err = bilinear(steady[field], pts[:, 0], pts[:, 1]) - pts[:, 2]
    assert np.abs(err).max() < tol
