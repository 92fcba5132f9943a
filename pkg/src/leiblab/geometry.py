"""Radial model geometries: measure weights, quadrature, discrete gradients.

A rotationally symmetric model manifold of dimension n has radial measure
density  area_constant * psi(r)**(n-1)  against dr, where psi is the warping
function (psi(r) = r euclidean, psi(r) = sinh r hyperbolic) and area_constant
is the surface area of the unit (n-1)-sphere.  Every integral in the package
reduces to 1D midpoint quadrature against this density on a uniform cell grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

EUCLIDEAN = "euclidean"
HYPERBOLIC = "hyperbolic"
CUSTOM = "custom"


def unit_sphere_area(n: int) -> float:
    """Surface area of the unit (n-1)-sphere in R^n (2 for n=1, 2*pi for n=2, ...)."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Uniform cell grid on [0, R]: N cells, centers at (i+1/2)*dr, faces at i*dr."""

    R: float
    N: int

    def __post_init__(self):
        if not (self.R > 0 and self.N >= 1):
            raise ValueError("grid needs R > 0 and N >= 1")
        dr = self.R / self.N
        object.__setattr__(self, "dr", dr)
        object.__setattr__(self, "centers", (np.arange(self.N) + 0.5) * dr)
        object.__setattr__(self, "faces", np.arange(self.N + 1) * dr)

    def refined(self, factor: int = 2) -> "RadialGrid":
        return RadialGrid(self.R, self.N * factor)


@dataclass(frozen=True, eq=False)
class ModelGeometry:
    """Radial measure weight of a model manifold."""

    n: int
    weight_kind: str
    psi: Callable[[np.ndarray], np.ndarray]
    area_constant: float

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("dimension n must be >= 1")
        if self.weight_kind not in (EUCLIDEAN, HYPERBOLIC, CUSTOM):
            raise ValueError(f"unknown weight kind {self.weight_kind!r}")


def euclidean(n: int) -> ModelGeometry:
    return ModelGeometry(n, EUCLIDEAN, lambda r: np.asarray(r, dtype=float), unit_sphere_area(n))


def hyperbolic(n: int) -> ModelGeometry:
    return ModelGeometry(n, HYPERBOLIC, np.sinh, unit_sphere_area(n))


def custom(n: int, r_table: np.ndarray, psi_table: np.ndarray) -> ModelGeometry:
    """Geometry with tabulated warping function, linearly interpolated."""
    r_table = np.asarray(r_table, dtype=float)
    psi_table = np.asarray(psi_table, dtype=float)
    if r_table.ndim != 1 or r_table.shape != psi_table.shape or r_table.size < 2:
        raise ValueError("psi table needs matching 1D r and psi columns, >= 2 rows")
    if r_table[0] != 0.0 or psi_table[0] != 0.0:
        raise ValueError("psi table must start at psi(0) = 0")
    if np.any(np.diff(r_table) <= 0) or np.any(np.diff(psi_table) < 0):
        raise ValueError("psi table must be increasing in r and nondecreasing in psi")

    def psi(r):
        return np.interp(np.asarray(r, dtype=float), r_table, psi_table)

    return ModelGeometry(n, CUSTOM, psi, unit_sphere_area(n))


def from_config_string(spec: str, n: int) -> ModelGeometry:
    """Geometry from a config string: "euclidean" | "hyperbolic" | "custom:<csv path>"."""
    if spec == EUCLIDEAN:
        return euclidean(n)
    if spec == HYPERBOLIC:
        return hyperbolic(n)
    if spec.startswith("custom:"):
        path = spec.split(":", 1)[1]
        table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return custom(n, table[:, 0], table[:, 1])
    raise ValueError(f"unknown geometry {spec!r}")


def surface_density(geom: ModelGeometry, r) -> np.ndarray:
    """Radial measure density area_constant * psi(r)**(n-1); scalar in, scalar out."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0):
        raise ValueError("radius must be >= 0")
    out = geom.area_constant * geom.psi(r_arr) ** (geom.n - 1)
    return out if r_arr.ndim else float(out)


def integrate(geom: ModelGeometry, grid: RadialGrid, f: np.ndarray) -> float:
    """Midpoint quadrature of a cellwise function against the radial measure."""
    f = np.asarray(f, dtype=float)
    if f.shape != (grid.N,):
        raise ValueError(f"expected {grid.N} cell values, got shape {f.shape}")
    return float(np.sum(f * surface_density(geom, grid.centers)) * grid.dr)


def radial_gradient(grid: RadialGrid, f: np.ndarray) -> np.ndarray:
    """Facewise difference quotient; zero at the r=0 and r=R faces (symmetry / zero flux)."""
    f = np.asarray(f, dtype=float)
    if f.shape != (grid.N,):
        raise ValueError(f"expected {grid.N} cell values, got shape {f.shape}")
    g = np.zeros(grid.N + 1)
    g[1:-1] = np.diff(f) / grid.dr
    return g
