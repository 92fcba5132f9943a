"""Desk-scale laboratory for doubly nonlinear radial diffusion.

Implements u_t = div(|grad u^q|^{p-2} grad u^q) on radial model geometries
with an exact self-similar oracle on euclidean space, and verifies decay
rates, dissipation identities, log-Sobolev margins and the explicit
iteration constants numerically.
"""

from . import barenblatt, exponents, fields, geometry, moser, solver

__all__ = ["barenblatt", "exponents", "fields", "geometry", "moser", "solver"]
__version__ = "0.1.0"
