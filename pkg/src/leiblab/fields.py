"""Cell-averaged radial fields and their norms, energies and entropy functionals.

A RadialField is a non-negative cellwise function on a RadialGrid together
with the geometry supplying the measure.  Gradient energies integrate face
difference quotients against face densities (midpoint in the dual cells), so
the discrete dissipation identities of the solver hold with the same formulas.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from .exponents import INF, AdmissibilityError, Params
from .geometry import ModelGeometry, RadialGrid, integrate, radial_gradient, surface_density


def caccioppoli_c1(p: float, q: float) -> float:
    """Dissipation constant p^p * q^(p-1), the smooth chain-rule value.

    For smooth positive solutions, d/dt int u^lam = -c1 * lam(lam-1) sigma^{-p}
    int |grad u^{sigma/p}|^p with sigma = lam - D; at (p,q,lam)=(2,1,2) this is
    the classical d/dt int u^2 = -2 int |grad u|^2.
    """
    return p ** p * q ** (p - 1.0)


@dataclass(frozen=True, eq=False)
class RadialField:
    grid: RadialGrid
    geom: ModelGeometry
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.N,):
            raise ValueError(f"expected {self.grid.N} cell values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        if np.any(v < 0.0):
            raise ValueError("field values must be non-negative")
        object.__setattr__(self, "values", v)

    def scaled(self, c: float) -> "RadialField":
        return RadialField(self.grid, self.geom, c * self.values)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("r,value\n")
        for r, v in zip(self.grid.centers, self.values):
            buf.write(f"{r:.17g},{v:.17g}\n")
        return buf.getvalue()


def field_from_function(grid: RadialGrid, geom: ModelGeometry, fn) -> RadialField:
    return RadialField(grid, geom, np.asarray(fn(grid.centers), dtype=float))


def gaussian_field(grid: RadialGrid, geom: ModelGeometry, sigma: float = 1.0,
                   mass: float | None = None) -> RadialField:
    f = field_from_function(grid, geom, lambda r: np.exp(-r ** 2 / (2.0 * sigma ** 2)))
    if mass is not None:
        f = f.scaled(mass / integrate(geom, grid, f.values))
    return f


def bump_field(grid: RadialGrid, geom: ModelGeometry, radius: float = 1.0,
               mass: float | None = None) -> RadialField:
    """Compactly supported C^2 bump (1 - (r/radius)^2)^3 on [0, radius]."""
    def fn(r):
        x = np.clip(r / radius, 0.0, 1.0)
        return (1.0 - x ** 2) ** 3
    f = field_from_function(grid, geom, fn)
    if mass is not None:
        f = f.scaled(mass / integrate(geom, grid, f.values))
    return f


def talenti_field(grid: RadialGrid, geom: ModelGeometry, params: Params) -> RadialField:
    """Extremal-shape test field (1 + r^{p/(p-1)})^{-(n-p)/p}; needs n > p."""
    p, n = params.p, params.n
    if not n > p:
        raise ValueError("extremal shape needs n > p")
    return field_from_function(
        grid, geom, lambda r: (1.0 + r ** (p / (p - 1.0))) ** (-(n - p) / p))


def lp_norm(field: RadialField, lam: float, formal: bool = False) -> float:
    """(int u^lam dmu)^{1/lam}; max over cells for lam = inf.

    lam in (0,1) is quasi-norm bookkeeping and must be requested with
    formal=True.
    """
    if lam == INF:
        return float(np.max(field.values))
    if lam <= 0.0:
        raise ValueError("norm index must be positive")
    if lam < 1.0 and not formal:
        raise ValueError("lam < 1 is a quasi-norm; pass formal=True")
    return integrate(field.geom, field.grid, field.values ** lam) ** (1.0 / lam)


def grad_power_energy(field: RadialField, w: float, p: float) -> float:
    """int |grad(u^w)|^p dmu from face difference quotients of the w-th power."""
    if not w > 0.0:
        raise ValueError("power w must be positive")
    g = radial_gradient(field.grid, field.values ** w)
    dens = surface_density(field.geom, field.grid.faces)
    return float(np.sum(np.abs(g) ** p * dens) * field.grid.dr)


def entropy(field: RadialField, r: float) -> float:
    """int (v^r/||v||_r^r) log(v/||v||_r) dmu with the 0*log 0 = 0 convention."""
    if not r > 0.0:
        raise ValueError("entropy index must be positive")
    v = field.values
    nr = lp_norm(field, r, formal=True)
    if nr == 0.0:
        raise ValueError("entropy of the zero field is undefined")
    pos = v > 0.0
    integrand = np.zeros_like(v)
    integrand[pos] = (v[pos] / nr) ** r * (np.log(v[pos]) - math.log(nr))
    return integrate(field.geom, field.grid, integrand)


def caccioppoli_rate(field: RadialField, lam: float, params: Params) -> float:
    """Dissipation rate -c1*lam(lam-1)*sigma^{-p} * int |grad u^{sigma/p}|^p, sigma = lam - D.

    Equals d/dt int u^lam along smooth solutions; requires lam >= 1+q.
    """
    if lam < 1.0 + params.q:
        raise AdmissibilityError(f"caccioppoli rate needs lambda >= 1+q = {1.0 + params.q}")
    sigma = lam - params.D
    c1 = caccioppoli_c1(params.p, params.q)
    energy = grad_power_energy(field, sigma / params.p, params.p)
    return -c1 * lam * (lam - 1.0) * sigma ** (-params.p) * energy


def rayleigh_quotient(field: RadialField, params: Params) -> float:
    """||v||_{p*kappa}^p / ||grad v||_p^p, a lower witness for the Sobolev constant."""
    if np.all(field.values == 0.0):
        raise ValueError("Rayleigh quotient of the zero field is undefined")
    p = params.p
    num = lp_norm(field, p * params.kappa) ** p
    den = grad_power_energy(field, 1.0, p)
    if den == 0.0:
        raise ValueError("zero gradient energy")
    return num / den


def estimate_sobolev_constant(geom: ModelGeometry, params: Params,
                              family: list[RadialField]) -> float:
    """Max Rayleigh quotient over a family; a lower estimate of the Sobolev constant."""
    if not family:
        raise ValueError("need a nonempty family of test fields")
    for f in family:
        if f.geom is not geom:
            raise ValueError("family member uses a different geometry")
    return max(rayleigh_quotient(f, params) for f in family)
