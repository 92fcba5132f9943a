import math

import pytest
from hypothesis import given, strategies as st

from leiblab.exponents import (INF, AdmissibilityError, admissible, derive_params,
                               interp_exponents, mass_smoothing_condition,
                               sobolev_chain_exponents, sup_decay_exponents)


def test_derive_params_heat_defaults():
    p = derive_params(2, 1, 3)
    assert p.D == 0.0
    assert p.kappa == 3.0
    assert p.nu == pytest.approx(2.0 / 3.0, abs=1e-16)


def test_derive_params_plaplace():
    p = derive_params(3, 1, 5)
    assert p.D == -1.0
    assert p.kappa == pytest.approx(2.5)
    assert p.nu == pytest.approx(0.6)


def test_derive_params_fast_diffusion():
    p = derive_params(2, 0.5, 3)
    assert p.D == 0.5
    assert p.kappa == 3.0
    assert p.nu == pytest.approx(2.0 / 3.0)


@pytest.mark.parametrize("bad", [
    dict(p=1.0, q=1, n=3), dict(p=0.5, q=1, n=3),
    dict(p=2, q=0.0, n=3), dict(p=2, q=-1, n=3),
    dict(p=2, q=1, n=0),
    dict(p=2, q=1, n=3, kappa=1.0),
    dict(p=4, q=1, n=3),      # default kappa needs n > p
    dict(p=2, q=1, n=2),      # n == p
])
def test_derive_params_rejects(bad):
    with pytest.raises(ValueError):
        derive_params(**bad)


def test_sup_decay_heat_matches_kernel_rate():
    rate, power = sup_decay_exponents(derive_params(2, 1, 3), 1.0)
    assert rate == pytest.approx(1.5, abs=1e-15)
    assert power == pytest.approx(1.0, abs=1e-15)


def test_sup_decay_pme():
    p = derive_params(2, 2, 3)
    rate, power = sup_decay_exponents(p, 1.0)
    assert p.D == -1.0
    assert rate == pytest.approx(3.0 / 5.0, rel=1e-15)
    assert rate == pytest.approx(p.n / (p.p - p.n * p.D), rel=1e-15)


def test_sup_decay_fast_diffusion():
    p = derive_params(2, 0.5, 3)
    rate, _ = sup_decay_exponents(p, 1.0)
    assert rate == pytest.approx(6.0, rel=1e-14)
    assert rate == pytest.approx(p.n / (p.p - p.n * p.D), rel=1e-14)


def test_sup_decay_rejects_inadmissible():
    p = derive_params(2, 0.2, 3)    # D = 0.8, D/nu = 1.2 > 1
    with pytest.raises(AdmissibilityError):
        sup_decay_exponents(p, 1.0)


def test_interp_heat_lambda2():
    rep = interp_exponents(derive_params(2, 1, 3), 1.0, 2.0)
    assert rep.alpha == pytest.approx(0.75, abs=1e-15)
    assert rep.gamma == pytest.approx(1.0, abs=1e-15)


def test_interp_pme_lambda3():
    rep = interp_exponents(derive_params(2, 2, 3), 1.0, 3.0)
    assert rep.alpha == pytest.approx(0.4, rel=1e-14)
    assert rep.gamma == pytest.approx(0.6, rel=1e-14)


def test_interp_rejects_lambda_at_a():
    with pytest.raises(AdmissibilityError):
        interp_exponents(derive_params(2, 1, 3), 2.0, 2.0)


def test_interp_degenerate_limit_lambda_to_a():
    # alpha -> 0 and gamma -> 1 as lambda approaches a from above
    p = derive_params(2, 1, 3)
    rep = interp_exponents(p, 2.0, 2.0 + 1e-9)
    assert abs(rep.alpha) < 1e-9
    assert rep.gamma == pytest.approx(1.0, abs=1e-8)


def test_chain_worked_tuple_exact():
    rep = sobolev_chain_exponents(derive_params(2, 2, 3), 1.0)
    assert rep.beta_chain == pytest.approx(6.0 / 5.0, rel=1e-15)
    assert rep.zeta == pytest.approx(9.0 / 5.0, rel=1e-15)
    assert rep.theta == 8.0 / 11.0
    assert rep.omega == 6.0
    assert rep.r_gni == 1.5
    assert rep.s_gni == 0.5
    # (1+q)(beta+1) - beta q p = 33/5 - 24/5 = 9/5 = zeta * a
    lhs = (1 + 2.0) * (rep.beta_chain + 1) - rep.beta_chain * 2.0 * 2.0
    assert lhs == pytest.approx(9.0 / 5.0, rel=1e-14)
    assert lhs == pytest.approx(rep.zeta * 1.0, rel=1e-14)


def test_chain_rejects_a_at_1q():
    with pytest.raises(AdmissibilityError):
        sobolev_chain_exponents(derive_params(2, 1, 3), 2.0)


def test_admissible_examples():
    ok, _ = admissible(derive_params(2, 1, 3), 1.0, INF)
    assert ok
    ok, reason = admissible(derive_params(2, 0.2, 3), 1.0, INF)
    assert not ok and "D/nu" in reason
    ok, _ = admissible(derive_params(2, 2, 3), 1.0, 3.0)
    assert ok


def test_admissible_formal_mode():
    p = derive_params(2, 2, 3)
    ok, reason = admissible(p, 0.5, INF)
    assert not ok and "formal" in reason
    ok, _ = admissible(p, 0.5, INF, formal=True)
    assert ok


def test_mass_smoothing_condition():
    assert mass_smoothing_condition(derive_params(2, 1, 3))
    assert mass_smoothing_condition(derive_params(2, 2, 3))
    # D = 0.9, nD = 2.7 > p = 2
    assert not mass_smoothing_condition(derive_params(2, 0.1, 3))


admissible_tuples = st.builds(
    dict,
    p=st.floats(1.05, 4.5),
    q=st.floats(0.1, 3.0),
    n=st.integers(1, 6),
    kappa=st.floats(1.05, 5.0),
    a_off=st.floats(0.05, 2.0),
    lam_off=st.floats(0.05, 4.0),
)


def _build(tup):
    params = derive_params(tup["p"], tup["q"], tup["n"], tup["kappa"])
    a = max(1.0, params.D / params.nu + tup["a_off"])
    lam = max(1.0 + params.q, a) + tup["lam_off"]
    return params, a, lam


@given(admissible_tuples)
def test_chain_identity_holds_generic_lambda(tup):
    params, a, lam = _build(tup)
    rep = interp_exponents(params, a, lam)
    q = params.q
    lhs = (1 + q) * (rep.beta_chain + 1) - rep.beta_chain * q * params.p
    scale = max((1 + q) * (rep.beta_chain + 1), abs(rep.zeta * a))
    assert abs(lhs - rep.zeta * a) <= 1e-12 * scale


@given(admissible_tuples)
def test_gni_identities_on_chain(tup):
    params, a, _ = _build(tup)
    if a >= 1.0 + params.q:
        return
    rep = sobolev_chain_exponents(params, a)
    lhs = rep.theta / rep.omega
    rhs = 1.0 / rep.r_gni - (1.0 - rep.theta) / rep.s_gni
    scale = max(1.0 / rep.r_gni, (1.0 - rep.theta) / rep.s_gni)
    assert abs(lhs - rhs) <= 1e-12 * scale
    assert rep.omega == pytest.approx(params.p * params.kappa, rel=1e-14)
    assert rep.omega == pytest.approx(params.p / (1 - params.nu), rel=1e-12)


@given(admissible_tuples)
def test_default_kappa_rate_matches_mass_form(tup):
    # for kappa = n/(n-p), a = 1: time_rate * (p - nD) == n
    if tup["n"] <= tup["p"]:
        return
    params = derive_params(tup["p"], tup["q"], tup["n"])
    ok, _ = admissible(params, 1.0)
    if not ok:
        return
    rate, _ = sup_decay_exponents(params, 1.0)
    assert rate * (params.p - params.n * params.D) == pytest.approx(
        params.n, rel=1e-12)


@given(admissible_tuples)
def test_admissible_monotone_in_a(tup):
    params, a, _ = _build(tup)
    assert admissible(params, a, INF)[0]
    assert admissible(params, a + 0.7, INF)[0]


def test_interp_limit_recovers_sup_rate():
    params = derive_params(2, 2, 3)
    rate, _ = sup_decay_exponents(params, 1.0)
    prev_alpha = 0.0
    for lam in (10.0, 100.0, 1000.0):
        rep = interp_exponents(params, 1.0, lam)
        # lam*alpha/(lam - a) equals the sup rate identically
        assert lam * rep.alpha / (lam - 1.0) == pytest.approx(rate, rel=1e-12)
        # alpha itself increases monotonically toward the sup rate
        assert prev_alpha < rep.alpha < rate
        prev_alpha = rep.alpha
