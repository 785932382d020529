import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shapefsi.convergence import fit_slope
from shapefsi.example import (
    ExampleParams,
    PerturbationSample,
    G_field,
    body_force,
    exact_fields,
    perturbed_fields,
    perturbed_stress,
    printed_H_top_interface,
    printed_stress_hessian,
    shape_derivative_fields,
    shape_hessian_fields,
)
from shapefsi.fields import check_partials
from shapefsi.geometry import DomainSpec
from shapefsi.tensor import divergence_field, hooke_strain_field

PI = math.pi
RNG = np.random.default_rng(11)


def solid_points(n):
    x = RNG.uniform(-2, 2, (4 * n, 2))
    return x[np.max(np.abs(x), axis=1) > 1][:n]


def test_params():
    P = ExampleParams()
    assert P.mu2 == pytest.approx(6 * PI**2)
    assert P.k2 == pytest.approx(2 * PI**2, rel=1e-14)
    assert P.solid_coeff == pytest.approx(18 * PI**2)
    with pytest.raises(ValueError):
        ExampleParams(rho_S=0.0)


def test_sample_validation():
    assert PerturbationSample(0.1, 0.5).b == 0.5
    with pytest.raises(ValueError):
        PerturbationSample(0.1, 1.5)
    with pytest.raises(ValueError):
        PerturbationSample(-0.1, 0.5)


def test_exact_field_values():
    u, p, sigma = exact_fields()
    assert p(np.zeros(2)) == 1.0
    assert np.allclose(u(np.array([0.5, 0.5])), [1.0, 1.0])
    assert sigma(np.array([0.25, 0.25]))[0, 1] == pytest.approx(PI)


def test_constitutive_closure():
    u, _, sigma = exact_fields()
    x = solid_points(100)
    assert np.abs(hooke_strain_field(u)(x) - sigma(x)).max() <= 1e-12


def test_pressure_helmholtz():
    _, p, _ = exact_fields()
    x = RNG.uniform(-1, 1, (100, 2))
    lap = np.trace(p.hess(x), axis1=-2, axis2=-1)
    assert np.abs(lap + ExampleParams().k2 * p(x)).max() <= 1e-8


def test_perturbed_fields():
    s0 = PerturbationSample(0.0, 0.7)
    u, p, sigma = exact_fields()
    ue, pe = perturbed_fields(None, s0)
    x = RNG.uniform(-1, 1, (10, 2))
    assert np.array_equal(ue(x), u(x)) and np.array_equal(pe(x), p(x))
    s = PerturbationSample(0.2, -0.6)
    _, pe = perturbed_fields(None, s)
    assert pe(np.array([-0.12, -0.12])) == pytest.approx(1.0)
    _, pe = perturbed_fields(None, PerturbationSample(0.1, 1.0))
    assert pe(np.zeros(2)) == pytest.approx(0.904508497187474, abs=1e-12)
    assert np.allclose(perturbed_stress(None, s)(x), sigma(x + 0.12))
    with pytest.raises(ValueError):
        perturbed_fields(None, PerturbationSample(0.3, 1.0))


def test_shape_derivative_values():
    s = PerturbationSample(0.0, 1.0)
    du, ds, dp = shape_derivative_fields(None, s)
    assert dp(np.array([0.5, 0.0])) == pytest.approx(PI)
    assert ds(np.zeros(2))[0, 0] == pytest.approx(-4 * PI**2)
    assert np.allclose(du(np.array([0.25, 0.25])), [-PI, -PI])
    zero = shape_derivative_fields(None, PerturbationSample(0.0, 0.0))
    x = solid_points(5)
    assert all(not f(x).any() for f in zero)


def test_shape_hessian_values():
    s = PerturbationSample(0.0, 1.0, 1.0)
    d2u, d2s, d2p = shape_hessian_fields(None, s)
    assert d2p(np.zeros(2)) == pytest.approx(-2 * PI**2)
    assert np.allclose(d2u(np.array([0.25, 0.25])), 0.0, atol=1e-14)
    for a, b in ((0.0, 0.8), (0.8, 0.0)):
        x = solid_points(5)
        assert all(not f(x).any() for f in shape_hessian_fields(None, PerturbationSample(0.0, a, b)))


def test_derivative_stresses_obey_hooke():
    s = PerturbationSample(0.0, 0.6, -0.3)
    x = solid_points(50)
    du, ds, _ = shape_derivative_fields(None, s)
    d2u, d2s, _ = shape_hessian_fields(None, s)
    assert np.abs(hooke_strain_field(du)(x) - ds(x)).max() <= 1e-12
    assert np.abs(hooke_strain_field(d2u)(x) - d2s(x)).max() <= 1e-11


def test_published_second_stress_derivative_differs_in_sign_pattern():
    s = PerturbationSample(0.0, 1.0, 1.0)
    x = np.array([[0.1, 0.2]])
    _, d2s, _ = shape_hessian_fields(None, s)
    S = np.sin(0.3 * PI)
    assert np.allclose(d2s(x)[0], -PI**3 * S * np.array([[8, 4], [4, 8]]))
    assert np.allclose(printed_stress_hessian(s)(x)[0], PI**3 * S * np.array([[-8, 4], [4, 8]]))


@settings(max_examples=20, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1))
def test_derivative_fields_are_derivatives_of_translation(a, b):
    # d/deps f(x - eps a 1) = -a grad f . 1, applied twice for the Hessian
    u, p, sigma = exact_fields()
    s = PerturbationSample(0.0, a, b)
    du, ds, dp = shape_derivative_fields(None, s)
    d2u, d2s, d2p = shape_hessian_fields(None, s)
    x = solid_points(4)
    one = np.ones(2)
    assert np.allclose(du(x), -a * u.grad(x) @ one, atol=1e-12)
    assert np.allclose(ds(x), -a * sigma.grad(x) @ one, atol=1e-12)
    assert np.allclose(dp(x), -a * p.grad(x) @ one, atol=1e-12)
    assert np.allclose(d2p(x), a * b * np.einsum("nij,i,j->n", p.hess(x), one, one), atol=1e-11)
    assert np.allclose(d2u(x), a * b * np.einsum("nkij,i,j->nk", u.hess(x), one, one), atol=1e-11)


def test_first_difference_converges_to_shape_derivative():
    _, p, _ = exact_fields()
    _, _, dp = shape_derivative_fields(None, PerturbationSample(0.0, 1.0))
    x = np.stack(np.meshgrid(np.linspace(-0.5, 0.5, 9), np.linspace(-0.5, 0.5, 9)), -1).reshape(-1, 2)
    eps = np.array([0.1, 0.05, 0.025, 0.0125])
    err = [np.abs((perturbed_fields(None, PerturbationSample(e, 1.0))[1](x) - p(x)) / e - dp(x)).max() for e in eps]
    assert fit_slope(eps, err)[0] == pytest.approx(1.0, abs=0.1)


def test_second_difference_converges_to_shape_hessian():
    _, p, _ = exact_fields()
    _, _, d2p = shape_hessian_fields(None, PerturbationSample(0.0, 1.0, 1.0))
    x = np.stack(np.meshgrid(np.linspace(-0.5, 0.5, 9), np.linspace(-0.5, 0.5, 9)), -1).reshape(-1, 2)
    eps = np.array([0.1, 0.05, 0.025, 0.0125])
    err = []
    for e in eps:
        pp = p.shifted(e * np.ones(2))(x)
        pm = p.shifted(-e * np.ones(2))(x)
        err.append(np.abs((pp - 2 * p(x) + pm) / e**2 - d2p(x)).max())
    assert fit_slope(eps, err)[0] >= 1.0


def test_body_force():
    F = body_force()
    assert np.allclose(F(np.array([0.5, 0.5])), [14 * PI**2, 14 * PI**2])
    u, _, sigma = exact_fields()
    x = solid_points(50)
    res = divergence_field(sigma)(x) + 18 * PI**2 * u(x) - F(x)
    assert np.abs(res).max() <= 1e-10
    assert np.array_equal(F(x), F(x))


def test_G_field_published_values():
    G = G_field(None, PerturbationSample(0.0, 1.0))
    assert G(np.zeros(2))[0, 0] == pytest.approx(2 * PI**2)
    assert not G_field(None, PerturbationSample(0.0, 0.0))(solid_points(3)).any()
    # row sums equal a div sigma
    _, _, sigma = exact_fields()
    x = solid_points(20)
    assert np.allclose(G(x).sum(axis=-1), divergence_field(sigma)(x), atol=1e-12)


def test_printed_H_data():
    s = PerturbationSample(0.0, 1.0, 1.0)
    H = printed_H_top_interface(s, np.array([0.5, 1.0]))
    assert H["H4"] == pytest.approx(-4 * PI**3)
    assert np.allclose(H["H2"], [0.0, 0.0], atol=1e-12)
    assert H["H3"] == pytest.approx(0.0, abs=1e-10)
    H0 = printed_H_top_interface(PerturbationSample(0.0, 0.0), np.array([[0.1, 1.0]]))
    assert all(not np.any(v) for v in H0.values())
    with pytest.raises(ValueError):
        printed_H_top_interface(s, np.array([0.5, 0.9]))
    with pytest.raises(ValueError):
        printed_H_top_interface(s, np.array([0.5, 1.0]), DomainSpec().segment("Sigma3"))


def test_all_fields_have_consistent_partials():
    s = PerturbationSample(0.0, 0.4, 0.9)
    x = solid_points(20)
    fields = list(exact_fields()) + list(shape_derivative_fields(None, s)) + list(shape_hessian_fields(None, s))
    fields += [G_field(None, s), body_force()]
    for f in fields:
        scale = 1 + np.abs(f.grad(x)).max()
        assert check_partials(f, x) <= 1e-6 * scale
