import numpy as np
import pytest
from hypothesis import given, strategies as st

from shapefsi.example import exact_fields
from shapefsi.fields import ScalarField, VectorField
from shapefsi.geometry import (
    CornerZoneError,
    Disk,
    DomainSpec,
    QuadratureRule,
    box_rule,
    integrate_boundary,
    integrate_volume,
    points_for_degree,
    region_rule,
    segment_rule,
    tangential_divergence_of_normal,
    tangential_gradient,
)
from shapefsi.tensor import divergence_field

PI = np.pi
DOM = DomainSpec()


def one(x):
    return np.ones(len(x))


def test_segments_normals_and_orientation():
    for seg in DOM.outer_segments + DOM.interface_segments:
        assert np.linalg.norm(seg.normal) == pytest.approx(1.0)
        assert seg.tangent @ seg.normal == pytest.approx(0.0)
        mid = seg.points(0.5)
        # the stored normal points away from the owning region
        probe = mid + 1e-3 * seg.normal
        assert not (DOM.in_solid(probe) if seg.owner == "solid" else DOM.in_fluid(probe))
    s1 = DOM.segment("Sigma1")
    assert np.array_equal(s1.solid_normal, -s1.normal)
    assert np.array_equal(DOM.segment("Gamma3").normal, [0.0, -1.0])
    assert np.array_equal(DOM.segment("Sigma2").normal, [1.0, 0.0])


def test_domain_areas_and_membership():
    assert DOM.area == {"fluid": 4.0, "solid": 12.0}
    assert DOM.in_fluid(np.array([0.2, -0.9])) and not DOM.in_solid(np.array([0.2, -0.9]))
    assert DOM.in_solid(np.array([1.5, 0.0])) and not DOM.in_solid(np.array([2.5, 0.0]))
    with pytest.raises(ValueError):
        DomainSpec(2.0, 1.0)
    with pytest.raises(ValueError):
        DOM.segment("Gamma9")


def test_tangential_gradient_examples():
    s1 = DOM.segment("Sigma1")
    const = ScalarField(lambda p: np.full(len(p), 3.0), 2)
    assert np.allclose(tangential_gradient(const, np.array([0.2, 1.0]), s1), 0.0, atol=1e-9)
    fx = ScalarField(lambda p: p[:, 0], 2, lambda p: np.tile([1.0, 0.0], (len(p), 1)))
    assert np.array_equal(tangential_gradient(fx, np.array([0.3, 1.0]), s1), [1.0, 0.0])
    _, p, _ = exact_fields()
    g = tangential_gradient(p, np.array([0.25, 1.0]), s1)
    assert np.allclose(g, [PI * np.sin(PI / 4), 0.0], atol=1e-12)


@given(st.floats(-0.99, 0.99), st.sampled_from(["Sigma1", "Sigma2", "Sigma3", "Sigma4", "Gamma1", "Gamma2"]))
def test_tangential_gradient_is_tangent(s, name):
    seg = DOM.segment(name)
    x = seg.points((s + 1) / 2)
    _, p, _ = exact_fields()
    assert tangential_gradient(p, x, seg) @ seg.normal == pytest.approx(0.0, abs=1e-12)


def test_corner_zone_rejected():
    s1 = DOM.segment("Sigma1")
    with pytest.raises(CornerZoneError):
        tangential_gradient(exact_fields()[1], np.array([0.9995, 1.0]), s1)
    with pytest.raises(CornerZoneError):
        tangential_divergence_of_normal(DOM.segment("Gamma1"), np.array([-2.0, 2.0]))
    with pytest.raises(ValueError):
        tangential_gradient(exact_fields()[1], np.array([0.0, 0.5]), s1)


@pytest.mark.parametrize("name", [f"Gamma{i}" for i in range(1, 5)] + [f"Sigma{i}" for i in range(1, 5)])
def test_flat_sides_have_zero_normal_divergence(name):
    seg = DOM.segment(name)
    x = seg.points(np.linspace(0.1, 0.9, 7))
    assert np.array_equal(tangential_divergence_of_normal(seg, x), np.zeros(7))


@pytest.mark.parametrize("R", [0.5, 1.0, 3.0])
def test_circle_normal_divergence_is_curvature(R):
    disk = Disk(R)
    x = disk.boundary_points(np.linspace(0, 2 * PI, 9))
    assert np.allclose(tangential_divergence_of_normal(disk, x), 1.0 / R, rtol=1e-8)


def test_volume_integrals():
    assert integrate_volume(one, "fluid") == pytest.approx(4.0, abs=1e-13)
    assert integrate_volume(one, "solid") == pytest.approx(12.0, abs=1e-13)
    f = lambda p: np.cos(PI * p[:, 0]) ** 2 * np.cos(PI * p[:, 1]) ** 2
    assert integrate_volume(f, "fluid") == pytest.approx(1.0, abs=1e-13)
    with pytest.raises(ValueError):
        integrate_volume(one, "air")


def test_boundary_integrals():
    assert integrate_boundary(one, DOM.interface_segments) == pytest.approx(8.0, abs=1e-13)
    assert integrate_boundary(one, DOM.outer_segments) == pytest.approx(16.0, abs=1e-13)
    f = lambda p: np.sin(PI * p[:, 0]) ** 2
    assert integrate_boundary(f, [DOM.segment("Sigma1")]) == pytest.approx(1.0, abs=1e-13)


def test_quadrature_rule_measures_and_validation():
    for region, area in (("fluid", 4.0), ("solid", 12.0)):
        assert region_rule(region).measure == pytest.approx(area, abs=1e-13)
    assert segment_rule(DOM.segment("Gamma2"), 64).measure == pytest.approx(4.0, abs=1e-13)
    with pytest.raises(ValueError):
        QuadratureRule(np.zeros((1, 2)), np.array([-1.0]), "volume", 1)
    nodes = segment_rule(DOM.segment("Sigma1"), 8).nodes
    assert np.all(np.abs(nodes[:, 0]) < 1)


@pytest.mark.parametrize("npts", [1, 3, 5, 7])
def test_quadrature_exact_on_monomials(npts):
    rule = box_rule((-1.0, 0.0), (2.0, 1.0), (2, 3), npts)
    deg = rule.degree
    assert points_for_degree(deg) == npts
    for i in range(deg + 1):
        for j in range(deg + 1 - i):
            exact = (2.0 ** (i + 1) - (-1.0) ** (i + 1)) / (i + 1) / (j + 1)
            got = rule.integrate(rule.nodes[:, 0] ** i * rule.nodes[:, 1] ** j)
            assert got == pytest.approx(exact, abs=1e-13 * max(1.0, abs(exact)))


def _flux(w, segs, normals=None):
    total = 0.0
    for seg in segs:
        r = segment_rule(seg, 16, 16)
        n = seg.normal if normals is None else normals(seg)
        total += r.integrate(w(r.nodes) @ n)
    return total


def test_divergence_theorem_both_regions():
    w = VectorField(
        lambda p: np.stack([np.exp(p[:, 0]) * np.sin(p[:, 1]), p[:, 0] ** 3 * p[:, 1]], -1),
        2,
        lambda p: np.stack(
            [
                np.stack([np.exp(p[:, 0]) * np.sin(p[:, 1]), np.exp(p[:, 0]) * np.cos(p[:, 1])], -1),
                np.stack([3 * p[:, 0] ** 2 * p[:, 1], p[:, 0] ** 3], -1),
            ],
            -2,
        ),
    )
    div = lambda p: np.trace(w.grad(p), axis1=-2, axis2=-1)
    for region, segs, nrm in (
        ("fluid", DOM.interface_segments, None),
        ("solid", DOM.outer_segments + DOM.interface_segments, lambda s: s.solid_normal),
    ):
        vol = region_rule(region, npts=7).integrate(div(region_rule(region, npts=7).nodes))
        assert abs(vol - _flux(w, segs, nrm)) <= 1e-8


def test_tensor_integration_by_parts_on_solid():
    _, _, sigma = exact_fields()
    tau = sigma
    rule = region_rule("solid")
    x = rule.nodes
    dtau = divergence_field(tau)
    lhs = rule.integrate(np.einsum("ni,ni->n", dtau(x), dtau(x)))
    vol = rule.integrate(np.einsum("nij,nij->n", sigma(x), dtau.grad(x)))
    bnd = 0.0
    for seg in DOM.outer_segments + DOM.interface_segments:
        r = segment_rule(seg, 16, 16)
        bnd += r.integrate(np.einsum("nij,j,ni->n", sigma(r.nodes), seg.solid_normal, dtau(r.nodes)))
    assert abs(lhs - (-vol + bnd)) <= 1e-7


def test_green_identity_fluid():
    _, p, _ = exact_fields()
    q = ScalarField(
        lambda x: np.exp(0.5 * x[:, 0]) * x[:, 1] ** 2,
        2,
        lambda x: np.stack([0.5 * np.exp(0.5 * x[:, 0]) * x[:, 1] ** 2, 2 * np.exp(0.5 * x[:, 0]) * x[:, 1]], -1),
    )
    lap_q = lambda x: np.exp(0.5 * x[:, 0]) * (0.25 * x[:, 1] ** 2 + 2)
    rule = region_rule("fluid")
    x = rule.nodes
    lhs = rule.integrate(np.einsum("ni,ni->n", p.grad(x), q.grad(x)))
    rhs = -rule.integrate(p(x) * lap_q(x))
    for seg in DOM.interface_segments:
        r = segment_rule(seg, 16, 16)
        rhs += r.integrate(p(r.nodes) * (q.grad(r.nodes) @ seg.normal))
    assert abs(lhs - rhs) <= 1e-8


def test_disk_rules():
    d = Disk(2.0)
    assert d.boundary_rule().measure == pytest.approx(4 * PI, rel=1e-13)
    assert d.volume_rule().measure == pytest.approx(4 * PI, rel=1e-12)
