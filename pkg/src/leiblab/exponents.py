"""Exponent algebra for u_t = div(|grad u^q|^{p-2} grad u^q).

Everything downstream is driven by two derived numbers: the regime parameter
D = 1 - q(p-1) (D<0 slow diffusion / compact support, D=0 borderline, D>0
fast diffusion / fat tails) and nu = (kappa-1)/kappa, where kappa > 1 is the
Sobolev index of the ambient geometry (kappa = n/(n-p) in the euclidean case
n > p, giving nu = p/n).  This module holds the admissibility predicates, the
sup-norm and interpolated decay rates, and the interpolation/Sobolev exponent
chain, with the algebraic identities they must satisfy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

NAN = float("nan")
INF = float("inf")


@dataclass(frozen=True)
class Params:
    p: float
    q: float
    n: int
    kappa: float
    D: float
    nu: float

    def __post_init__(self):
        if not (self.p > 1.0):
            raise ValueError("p must exceed 1")
        if not (self.q > 0.0):
            raise ValueError("q must be positive")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not (self.kappa > 1.0):
            raise ValueError("kappa must exceed 1")


@dataclass
class ExponentReport:
    """Decay and interpolation exponents for one (params, a, lambda) choice.

    Fields not defined by the producing operation stay NaN.
    """

    a: float
    lam: float
    alpha: float = NAN
    gamma: float = NAN
    beta_chain: float = NAN
    zeta: float = NAN
    theta: float = NAN
    r_gni: float = NAN
    s_gni: float = NAN
    omega: float = NAN


class AdmissibilityError(ValueError):
    pass


def derive_params(p: float, q: float, n: int, kappa: float | None = None) -> Params:
    """Build the exponent tuple; kappa defaults to n/(n-p), which needs n > p."""
    if not p > 1.0:
        raise ValueError("p must exceed 1")
    if not q > 0.0:
        raise ValueError("q must be positive")
    if n < 1:
        raise ValueError("n must be >= 1")
    if kappa is None:
        if n <= p:
            raise ValueError(f"default kappa = n/(n-p) needs n > p (got n={n}, p={p})")
        kappa = n / (n - p)
    if not kappa > 1.0:
        raise ValueError("kappa must exceed 1")
    D = 1.0 - q * (p - 1.0)
    nu = (kappa - 1.0) / kappa
    return Params(p=float(p), q=float(q), n=int(n), kappa=float(kappa), D=D, nu=nu)


def mass_smoothing_condition(params: Params) -> bool:
    """p > n*D, the regime in which L^1 data smooths to L^inf at rate t^{-n/(p-nD)}.

    Distinct from the a > D/nu predicate used by the iteration machinery; the
    two coincide for kappa = n/(n-p) and a = 1.
    """
    return params.p > params.n * params.D


def admissible(params: Params, a: float, lam: float = INF, formal: bool = False):
    """Check the norm-index constraints; returns (ok, reason of first violation)."""
    if not formal and a < 1.0:
        return False, f"a = {a} is below 1 (pass formal=True for quasi-norm bookkeeping)"
    if a <= 0.0:
        return False, f"a = {a} must be positive"
    if a * params.nu <= params.D:
        return False, f"a = {a} fails a > D/nu = {params.D / params.nu}"
    if lam != INF:
        if lam <= a:
            return False, f"lambda = {lam} fails lambda > a = {a}"
        if lam < 1.0 + params.q:
            return False, f"lambda = {lam} is below 1+q = {1.0 + params.q}"
    return True, "ok"


def require_admissible(params: Params, a: float, lam: float = INF, formal: bool = False) -> None:
    ok, reason = admissible(params, a, lam, formal=formal)
    if not ok:
        raise AdmissibilityError(reason)


def sup_decay_exponents(params: Params, a: float, formal: bool = False) -> tuple[float, float]:
    """(time_rate, mass_power): ||u(t)||_inf <= C ||u0||_a^mass_power * t^{-time_rate}.

    time_rate = 1/(a nu - D), mass_power = a nu/(a nu - D); for the default
    kappa and a = 1 these reduce to n/(p - nD) and p/(p - nD).
    """
    require_admissible(params, a, INF, formal=formal)
    denom = a * params.nu - params.D
    return 1.0 / denom, a * params.nu / denom


def interp_exponents(params: Params, a: float, lam: float, formal: bool = False) -> ExponentReport:
    """Interpolated L^lambda decay: ||u(t)||_lam <= C ||u0||_a^gamma t^{-alpha}."""
    require_admissible(params, a, lam, formal=formal)
    D, nu, q = params.D, params.nu, params.q
    denom = a * nu - D
    alpha = (1.0 / lam) * (lam - a) / denom
    gamma = (a / lam) * (lam * nu - D) / denom
    return ExponentReport(
        a=a,
        lam=lam,
        alpha=alpha,
        gamma=gamma,
        beta_chain=alpha * (1.0 + q),
        zeta=gamma * (1.0 + q) / a,
        r_gni=(1.0 + q) / q,
        s_gni=a / q,
    )


def sobolev_chain_exponents(params: Params, a: float, formal: bool = False) -> ExponentReport:
    """Exponents of the decay => interpolation-inequality chain (lambda fixed to 1+q).

    Asserts the two exact identities the chain rests on:
      (1+q)(beta+1) - beta*q*p == zeta*a
      theta/omega == 1/r - (1-theta)/s   with omega == p*kappa == p/(1-nu)
    and, when D != 0, beta == (a*zeta - (1+q))/D (product form a*zeta-(1+q) == beta*D
    when D == 0, avoiding the division).
    """
    q = params.q
    lam = 1.0 + q
    if not a < lam:
        raise AdmissibilityError(f"chain needs a < 1+q (got a={a}, 1+q={lam})")
    rep = interp_exponents(params, a, lam, formal=formal)
    beta, zeta = rep.beta_chain, rep.zeta
    rep.theta = beta * q * params.p / ((1.0 + q) * (beta + 1.0))
    omega = params.p * params.kappa
    omega_alt = params.p / (1.0 - params.nu)
    rep.omega = omega

    def _close(x, y, tol=1e-9):
        return abs(x - y) <= tol * max(1.0, abs(x), abs(y))

    if not _close((1.0 + q) * (beta + 1.0) - beta * q * params.p, zeta * a):
        raise AssertionError("chain identity (1+q)(beta+1) - beta q p == zeta a failed")
    if not _close(rep.theta / omega, 1.0 / rep.r_gni - (1.0 - rep.theta) / rep.s_gni):
        raise AssertionError("chain identity theta/omega == 1/r - (1-theta)/s failed")
    if not _close(omega, omega_alt):
        raise AssertionError("omega == p*kappa == p/(1-nu) failed")
    if params.D != 0.0:
        if not _close(beta, (a * zeta - (1.0 + q)) / params.D):
            raise AssertionError("chain identity beta == (a zeta - (1+q))/D failed")
    else:
        if not _close(a * zeta - (1.0 + q), beta * params.D, tol=1e-12):
            raise AssertionError("chain identity a zeta - (1+q) == beta*D failed (D=0 branch)")
    return rep
