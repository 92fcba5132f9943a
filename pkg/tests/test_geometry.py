import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from leiblab.geometry import (RadialGrid, custom, euclidean, from_config_string,
                              hyperbolic, integrate, radial_gradient,
                              surface_density, unit_sphere_area)


def test_unit_sphere_areas():
    assert unit_sphere_area(1) == pytest.approx(2.0)
    assert unit_sphere_area(2) == pytest.approx(2 * math.pi)
    assert unit_sphere_area(3) == pytest.approx(4 * math.pi)


def test_surface_density_euclidean_sphere():
    g = euclidean(3)
    assert surface_density(g, 2.0) == pytest.approx(16 * math.pi, rel=1e-15)


def test_surface_density_hyperbolic():
    g = hyperbolic(2)
    assert surface_density(g, 1.0) == pytest.approx(2 * math.pi * math.sinh(1.0),
                                                    rel=1e-15)


def test_surface_density_vanishes_at_origin():
    for g in (euclidean(3), hyperbolic(2), euclidean(2)):
        assert surface_density(g, 0.0) == 0.0


def test_surface_density_n1_is_constant():
    # in one dimension the radial measure is 2 dr including at r = 0
    g = euclidean(1)
    assert surface_density(g, 0.0) == pytest.approx(2.0)
    assert surface_density(g, 3.0) == pytest.approx(2.0)


def test_integrate_ball_volume():
    g = euclidean(3)
    grid = RadialGrid(1.0, 1000)
    vol = integrate(g, grid, np.ones(grid.N))
    assert vol == pytest.approx(4 * math.pi / 3, abs=1e-3)


def test_integrate_gaussian_against_quad_oracle():
    g = euclidean(3)
    grid = RadialGrid(10.0, 4000)
    f = np.exp(-grid.centers ** 2 / 2)
    oracle, err = quad(lambda r: 4 * math.pi * r * r * math.exp(-r * r / 2),
                       0.0, 10.0, epsabs=1e-13, epsrel=1e-13)
    assert err < 1e-10
    val = integrate(g, grid, f)
    assert val == pytest.approx(oracle, abs=1e-6)
    assert val == pytest.approx((2 * math.pi) ** 1.5, abs=1e-6)


def test_integrate_hyperbolic_closed_form():
    g = hyperbolic(2)
    grid = RadialGrid(1.0, 1000)
    val = integrate(g, grid, np.ones(grid.N))
    assert val == pytest.approx(2 * math.pi * (math.cosh(1.0) - 1.0), abs=1e-6)


def test_integrate_size_mismatch():
    with pytest.raises(ValueError):
        integrate(euclidean(3), RadialGrid(1.0, 10), np.ones(11))


def test_gradient_constant_and_linear():
    grid = RadialGrid(2.0, 50)
    assert np.all(radial_gradient(grid, np.full(50, 3.0)) == 0.0)
    g = radial_gradient(grid, grid.centers.copy())
    assert g[0] == 0.0 and g[-1] == 0.0
    assert np.allclose(g[1:-1], 1.0, rtol=0, atol=1e-13)


def test_gradient_quadratic_exact_at_midpoints():
    grid = RadialGrid(1.0, 64)
    g = radial_gradient(grid, grid.centers ** 2)
    assert np.allclose(g[1:-1], 2 * grid.faces[1:-1], rtol=1e-13, atol=1e-14)


@given(st.integers(2, 60), st.floats(0.1, 5.0), st.floats(-2.0, 2.0),
       st.floats(0.0, 3.0))
def test_integrate_linear_and_monotone(n, R, c, shift):
    g = euclidean(2)
    grid = RadialGrid(R, n)
    f1 = np.sin(grid.centers) ** 2
    f2 = f1 + shift
    lhs = integrate(g, grid, c * f1 + f2)
    rhs = c * integrate(g, grid, f1) + integrate(g, grid, f2)
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-12)
    assert integrate(g, grid, f2) >= integrate(g, grid, f1) - 1e-12


def test_refinement_second_order():
    g = euclidean(3)
    vals = []
    for N in (250, 500, 1000):
        grid = RadialGrid(2.0, N)
        vals.append(integrate(g, grid, np.cos(grid.centers)))
    e1 = abs(vals[0] - vals[1])
    e2 = abs(vals[1] - vals[2])
    assert e2 <= e1 / 3.5   # order >= 2 gives a factor ~4 per refinement


def test_custom_geometry_interpolates():
    r = np.linspace(0.0, 2.0, 41)
    table_psi = np.sinh(r)
    g = custom(2, r, table_psi)
    assert surface_density(g, 1.0) == pytest.approx(
        2 * math.pi * math.sinh(1.0), rel=1e-3)


def test_custom_geometry_rejects_bad_table():
    with pytest.raises(ValueError):
        custom(2, np.array([0.5, 1.0]), np.array([0.5, 1.0]))   # psi(0) missing
    with pytest.raises(ValueError):
        custom(2, np.array([0.0, 1.0, 0.5]), np.array([0.0, 1.0, 2.0]))


def test_from_config_string(tmp_path):
    assert from_config_string("euclidean", 3).weight_kind == "euclidean"
    assert from_config_string("hyperbolic", 2).weight_kind == "hyperbolic"
    path = tmp_path / "psi.csv"
    r = np.linspace(0, 1, 11)
    path.write_text("r,psi\n" + "\n".join(f"{x},{2*x}" for x in r) + "\n")
    g = from_config_string(f"custom:{path}", 2)
    assert g.psi(0.5) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        from_config_string("torus", 2)
