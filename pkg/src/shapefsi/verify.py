"""Residual checks for the first and second shape derivatives of the example,
bilinear-form identities and Hadamard-type derivative formulas.

Boundary conditions are assembled from their general form (variable
``kappa``, tangential gradients, normal derivatives, surface divergence of
the normal) and then evaluated for the example, where ``kappa = <V, n>`` with
``V = (a, a)`` is constant on each flat side.  On the outer sides ``n`` is the
solid outward normal, on the interface the fluid outward normal.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.stats import qmc

from .convergence import ConvergenceReport
from .example import (
    ExampleParams,
    PerturbationSample,
    exact_fields,
    G_field,
    printed_derivative_rhs,
    printed_H_top_interface,
    printed_hessian_rhs,
    printed_stress_hessian,
    shape_derivative_fields,
    shape_hessian_fields,
)
from .fields import Field, ScalarField, TensorField, VectorField, as_points
from .forms import FormContext
from .geometry import (
    CORNER_RADIUS,
    Disk,
    DomainSpec,
    Segment,
    region_rule,
    segment_rule,
    tangential_divergence_of_normal,
    tangential_gradient,
)
from .tensor import hooke_strain_field
from .transport import EPS_MAX, TransportMap, dilation_map, translation_map

RESIDUAL_TOL = 1e-8
INTERIOR_POINTS = 200
BOUNDARY_NODES = 64


# -- reports -----------------------------------------------------------------


@dataclass(frozen=True)
class ResidualReport:
    id: str
    points: np.ndarray = field(repr=False)
    residuals: np.ndarray = field(repr=False)  # per-point max-abs residual
    tolerance: float = RESIDUAL_TOL
    norm_max: float = field(init=False)
    norm_rms: float = field(init=False)

    def __post_init__(self):
        r = np.abs(np.asarray(self.residuals, dtype=float))
        object.__setattr__(self, "residuals", r)
        object.__setattr__(self, "norm_max", float(np.max(r)) if r.size else 0.0)
        object.__setattr__(self, "norm_rms", float(np.sqrt(np.mean(r**2))) if r.size else 0.0)

    @property
    def passed(self) -> bool:
        return self.norm_max <= self.tolerance

    @property
    def n_points(self) -> int:
        return int(self.residuals.shape[0])

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "norm_max": self.norm_max,
            "norm_rms": self.norm_rms,
            "tolerance": self.tolerance,
            "pass": bool(self.passed),
            "n_points": self.n_points,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def make_report(id: str, points, residual, tol: float = RESIDUAL_TOL) -> ResidualReport:
    """Collapse any trailing component axes to a per-point max-abs residual."""
    r = np.abs(np.asarray(residual, dtype=float))
    r = r.reshape(r.shape[0], -1).max(axis=1) if r.ndim > 1 else r
    return ResidualReport(id, np.asarray(points, dtype=float), r, tol)


# -- sample points -------------------------------------------------------------


def interior_points(region: str, n: int = INTERIOR_POINTS, seed: int = 0, domain: DomainSpec | None = None):
    """Scrambled Sobol points strictly inside the fluid or solid region."""
    dom = domain or DomainSpec()
    sob = qmc.Sobol(2, scramble=True, seed=seed)
    pts = 2 * dom.outer * sob.random(1 << int(np.ceil(np.log2(4 * n)))) - dom.outer
    if region == "fluid":
        pts = pts * (dom.inner / dom.outer)
        keep = dom.in_fluid(pts)
    elif region == "solid":
        keep = dom.in_solid(pts)
    else:
        raise ValueError(f"unknown region {region!r}")
    return pts[keep][:n]


def boundary_nodes(seg: Segment, npts: int = BOUNDARY_NODES) -> np.ndarray:
    """Gauss nodes of ``seg`` with those inside the corner-exclusion zone dropped."""
    pts = segment_rule(seg, npts).nodes
    d = np.minimum(np.linalg.norm(pts - seg.start, axis=1), np.linalg.norm(pts - seg.end, axis=1))
    return pts[d >= seg.corner_radius]


def _require_inside(points, region: str, domain: DomainSpec):
    pts, _ = as_points(points, 2)
    inside = domain.in_fluid(pts) if region == "fluid" else domain.in_solid(pts)
    if not np.all(inside):
        bad = pts[~inside][0]
        raise ValueError(f"point {bad.tolist()} is not inside the {region} region")
    return pts


# -- boundary kinematics ----------------------------------------------------------


@dataclass(frozen=True)
class SideData:
    """``kappa = <V, n>`` and its derivatives on a flat side (constant normal extension)."""

    pts: np.ndarray
    n: np.ndarray
    kappa: np.ndarray
    grad_kappa: np.ndarray
    div_n: np.ndarray

    @property
    def dkappa_dn(self) -> np.ndarray:
        return self.grad_kappa @ self.n

    @property
    def tangential_grad_kappa(self) -> np.ndarray:
        return self.grad_kappa - np.multiply.outer(self.dkappa_dn, self.n)


def side_data(tmap: TransportMap, seg: Segment, pts) -> SideData:
    pts = seg.check_point(pts)
    n = seg.normal
    kappa = tmap.velocity(pts) @ n
    grad_kappa = np.einsum("nij,i->nj", tmap.grad_velocity(pts), n)
    div_n = tangential_divergence_of_normal(seg, pts)
    return SideData(pts, n, kappa, grad_kappa, np.atleast_1d(div_n))


def kappa_extension(tmap: TransportMap, seg: Segment) -> Callable:
    """``x -> <V(x), n>`` with the side normal held constant off the side."""
    return lambda x: tmap.velocity(x) @ seg.normal


# -- general boundary data ---------------------------------------------------------


def G_general(sigma: Field, sd: SideData) -> np.ndarray:
    """``div(kappa sigma) - dkappa/dn sigma n + kappa sigma dn/dn - sigma grad_G kappa``.

    ``dn/dn`` vanishes for the constant normal extension of a flat side.
    """
    x = sd.pts
    s = sigma(x)
    div_s = np.trace(sigma.grad(x), axis1=-2, axis2=-1)
    div_ks = sd.kappa[:, None] * div_s + np.einsum("nij,nj->ni", s, sd.grad_kappa)
    sn = s @ sd.n
    return div_ks - sd.dkappa_dn[:, None] * sn - np.einsum("nij,nj->ni", s, sd.tangential_grad_kappa)


def derivative_bc_lhs(params, sample, seg: Segment, pts, tmap=None) -> np.ndarray:
    """General first-order boundary expression.

    Outer side: ``-kappa (grad u) n + div_G(n) G / (rho_S mu2)``.
    Interface: ``div_G(n) G.n / rho_S - mu2 kappa (grad u n).n + [div(kappa grad p)
    - d/dn(kappa grad p).n - div_G(n) kappa dp/dn + (mu2/c^2) p kappa] / rho_F``.
    """
    P = params or ExampleParams()
    tmap = tmap or translation_map(sample.a)
    sd = side_data(tmap, seg, pts)
    u, p, sigma = exact_fields(P)
    x, n, k = sd.pts, sd.n, sd.kappa
    G = G_general(sigma, sd)
    gu_n = u.grad(x) @ n
    if seg.owner == "solid":
        return -k[:, None] * gu_n + (sd.div_n / (P.rho_S * P.mu2))[:, None] * G
    gp = p.grad(x)
    Hp = p.hess(x)
    lap = np.trace(Hp, axis1=-2, axis2=-1)
    div_kgp = np.einsum("ni,ni->n", sd.grad_kappa, gp) + k * lap
    dn_kgp_n = sd.dkappa_dn * (gp @ n) + k * np.einsum("i,nij,j->n", n, Hp, n)
    bracket = div_kgp - dn_kgp_n - sd.div_n * k * (gp @ n) + P.k2 * p(x) * k
    return sd.div_n * (G @ n) / P.rho_S - P.mu2 * k * (gu_n @ n) + bracket / P.rho_F


def derivative_bc_exact(params, sample, seg: Segment, pts) -> np.ndarray:
    """The quantity the first-order condition prescribes, from the true derivatives:
    ``u'`` on outer sides, ``dp'/dn / rho_F - mu2 u'.n`` on the interface."""
    P = params or ExampleParams()
    du, _, dp = shape_derivative_fields(P, sample)
    x = seg.check_point(pts)
    if seg.owner == "solid":
        return du(x)
    n = seg.normal
    return (dp.grad(x) @ n) / P.rho_F - P.mu2 * (du(x) @ n)


def _fd_div(fn: Callable, x: np.ndarray, h: float = 1e-3) -> np.ndarray:
    """Fourth-order central-difference divergence of a vectorised vector function."""
    out = 0.0
    for k in range(x.shape[1]):
        e = np.zeros(x.shape[1])
        e[k] = h
        d = (-fn(x + 2 * e) + 8 * fn(x + e) - 8 * fn(x - e) + fn(x - 2 * e)) / (12 * h)
        out = out + d[:, k]
    return out


def _fd_dn(fn: Callable, x: np.ndarray, n: np.ndarray, h: float = 1e-3) -> np.ndarray:
    e = h * n
    return (-fn(x + 2 * e) + 8 * fn(x + e) - 8 * fn(x - e) + fn(x - 2 * e)) / (12 * h)


@dataclass(frozen=True)
class HessianData:
    H1: np.ndarray
    H2: np.ndarray
    H3: np.ndarray  # tensor-valued
    H4: np.ndarray
    div_H2: np.ndarray
    side: SideData


def hessian_boundary_data(params, sample: PerturbationSample, seg: Segment, pts) -> HessianData:
    """``H1..H4`` for the direction pair ``kappa = <(a, a), n>``, ``kappa1 = <(b, b), n>``.

    Terms pairing a derivative with one direction use the other direction,
    e.g. ``kappa1 grad u'[kappa] + kappa grad u'[kappa1]``.  ``div H2`` is
    taken from the off-boundary extension of ``H2``.
    """
    P = params or ExampleParams()
    a, b = sample.a, sample.b
    map_a, map_b = translation_map(a), translation_map(b)
    u, p, sigma = exact_fields(P)
    du_a, ds_a, dp_a = shape_derivative_fields(P, PerturbationSample(0.0, a))
    du_b, ds_b, dp_b = shape_derivative_fields(P, PerturbationSample(0.0, b))
    sd = side_data(map_a, seg, pts)
    sd1 = side_data(map_b, seg, pts)
    x, n = sd.pts, sd.n
    kap_a, kap_b = kappa_extension(map_a, seg), kappa_extension(map_b, seg)

    def H2_at(y):
        k, k1 = kap_a(y), kap_b(y)
        gk = np.einsum("nij,i->nj", map_a.grad_velocity(y), n)
        dk_dn = gk @ n
        dn_gp = np.einsum("nij,j->ni", p.hess(y), n)
        gp = p.grad(y)
        # dn/dn = 0 and div_G n = 0 off a flat side
        return -(
            (k / P.rho_F)[:, None] * dp_b.grad(y)
            + (k1 * k / P.rho_F)[:, None] * dn_gp
            + (k1 * dk_dn)[:, None] * gp
        )

    k, k1 = sd.kappa, sd1.kappa
    divn = sd.div_n
    H2 = H2_at(x) - (k1 * k * divn)[:, None] * p.grad(x)
    div_H2 = _fd_div(H2_at, x)

    gu = u.grad(x)
    dn_gu = np.einsum("nijk,k->nij", u.hess(x), n)
    H3 = -P.mu2 * (
        k1[:, None, None] * du_a.grad(x)
        + k[:, None, None] * du_b.grad(x)
        + k1[:, None, None] * (sd.dkappa_dn[:, None, None] * gu + k[:, None, None] * dn_gu)
        + (k1 * divn * k)[:, None, None] * gu
    )

    cf = 1.0 / (P.rho_F * P.c**2)
    dkp_dn = sd.dkappa_dn * p(x) + k * (p.grad(x) @ n)
    H4 = P.mu2 * (cf * (k1 * dp_a(x) + k * dp_b(x)) + cf * k1 * dkp_dn + divn * k * p(x))

    H1 = _H1(P, sd, k1, sigma, ds_b, map_a, seg)
    return HessianData(H1, H2, H3, H4, div_H2, sd)


def side_data_unchecked(tmap: TransportMap, seg: Segment, pts) -> SideData:
    n = seg.normal
    return SideData(
        pts,
        n,
        tmap.velocity(pts) @ n,
        np.einsum("nij,i->nj", tmap.grad_velocity(pts), n),
        np.zeros(pts.shape[0]),
    )


def _H1(P, sd: SideData, k1, sigma, ds_b, map_a, seg) -> np.ndarray:
    """``-(1/rho_S)[div(kappa s') - dkappa/dn s' n - s' grad_G kappa + s' dn/dn
    + G' + kappa1 dG/dn + kappa1 div_G(n) G]`` with ``dn/dn = 0``."""
    x, n = sd.pts, sd.n
    s_b = ds_b(x)
    div_ks = sd.kappa[:, None] * np.trace(ds_b.grad(x), axis1=-2, axis2=-1) + np.einsum(
        "nij,nj->ni", s_b, sd.grad_kappa
    )
    G = G_general(sigma, sd)
    G_prime = G_general(ds_b, sd)
    dG_dn = _fd_dn(lambda y: G_general(sigma, side_data_unchecked(map_a, seg, y)), x, n)
    inner = (
        div_ks
        - sd.dkappa_dn[:, None] * (s_b @ n)
        - np.einsum("nij,nj->ni", s_b, sd.tangential_grad_kappa)
        + G_prime
        + k1[:, None] * dG_dn
        + (k1 * sd.div_n)[:, None] * G
    )
    return -inner / P.rho_S


def hessian_bc_lhs(params, sample, seg: Segment, pts) -> np.ndarray:
    """General second-order boundary expression.

    Outer side: ``(div_G(n) H1 + H3 n) / mu2``.
    Interface: ``-div_G(n) H1.n / rho_S - H3 n.n - div H2 + div_G(n) H2.n + H4``.
    """
    P = params or ExampleParams()
    hd = hessian_boundary_data(P, sample, seg, pts)
    n, divn = hd.side.n, hd.side.div_n
    H3n = hd.H3 @ n
    if seg.owner == "solid":
        return (divn[:, None] * hd.H1 + H3n) / P.mu2
    return -divn * (hd.H1 @ n) / P.rho_S - H3n @ n - hd.div_H2 + divn * (hd.H2 @ n) + hd.H4


def hessian_bc_exact(params, sample, seg: Segment, pts) -> np.ndarray:
    """``u''`` on outer sides, ``dp''/dn / rho_F - mu2 u''.n`` on the interface."""
    P = params or ExampleParams()
    d2u, _, d2p = shape_hessian_fields(P, sample)
    x = seg.check_point(pts)
    if seg.owner == "solid":
        return d2u(x)
    n = seg.normal
    return (d2p.grad(x) @ n) / P.rho_F - P.mu2 * (d2u(x) @ n)


# -- residual studies ----------------------------------------------------------------


def _interior_reports(tag, u_f, s_f, p_f, P, solid_pts, fluid_pts, tol, solid_coeff):
    div_s = np.trace(s_f.grad(solid_pts), axis1=-2, axis2=-1)
    r_solid = div_s + solid_coeff * u_f(solid_pts)
    lap = np.trace(p_f.hess(fluid_pts), axis1=-2, axis2=-1)
    r_fluid = lap + P.k2 * p_f(fluid_pts)
    return (
        make_report(f"{tag}/solid-momentum", solid_pts, r_solid, tol),
        make_report(f"{tag}/fluid-helmholtz", fluid_pts, r_fluid, tol),
    )


def verify_shape_derivative_interior(
    params=None,
    sample: PerturbationSample | None = None,
    solid_points=None,
    fluid_points=None,
    tol: float = RESIDUAL_TOL,
    solid_coeff: float | None = None,
    domain: DomainSpec | None = None,
):
    """``div s' + mu2 rho_S u'`` in the solid and ``lap p' + (mu2/c^2) p'`` in the fluid.

    ``solid_coeff`` overrides ``mu2 * rho_S`` (the worked example pairs the
    solid equation with ``mu2`` alone).
    """
    P = params or ExampleParams()
    sample = sample or PerturbationSample(0.0, 1.0)
    dom = domain or DomainSpec()
    sp = _require_inside(interior_points("solid") if solid_points is None else solid_points, "solid", dom)
    fp = _require_inside(interior_points("fluid") if fluid_points is None else fluid_points, "fluid", dom)
    du, ds, dp = shape_derivative_fields(P, sample)
    coeff = P.solid_coeff if solid_coeff is None else solid_coeff
    tag = "derivative" if solid_coeff is None else "derivative[coeff=%.6g]" % coeff
    return _interior_reports(tag, du, ds, dp, P, sp, fp, tol, coeff)


def verify_shape_hessian_interior(
    params=None, sample=None, solid_points=None, fluid_points=None, tol=RESIDUAL_TOL, solid_coeff=None, domain=None
):
    P = params or ExampleParams()
    sample = sample or PerturbationSample(0.0, 1.0)
    dom = domain or DomainSpec()
    sp = _require_inside(interior_points("solid") if solid_points is None else solid_points, "solid", dom)
    fp = _require_inside(interior_points("fluid") if fluid_points is None else fluid_points, "fluid", dom)
    d2u, d2s, d2p = shape_hessian_fields(P, sample)
    coeff = P.solid_coeff if solid_coeff is None else solid_coeff
    tag = "hessian" if solid_coeff is None else "hessian[coeff=%.6g]" % coeff
    return _interior_reports(tag, d2u, d2s, d2p, P, sp, fp, tol, coeff)


def verify_constitutive(params=None, sample=None, points=None, tol: float = 1e-12) -> list[ResidualReport]:
    """``sigma = C E(u)`` for the exact, first- and second-derivative stresses."""
    P = params or ExampleParams()
    sample = sample or PerturbationSample(0.0, 1.0)
    x = interior_points("solid") if points is None else as_points(points, 2)[0]
    u, _, s = exact_fields(P)
    du, ds, _ = shape_derivative_fields(P, sample)
    d2u, d2s, _ = shape_hessian_fields(P, sample)
    out = []
    for name, uf, sf in [
        ("constitutive/exact", u, s),
        ("constitutive/derivative", du, ds),
        ("constitutive/hessian", d2u, d2s),
        ("constitutive/hessian-printed", d2u, printed_stress_hessian(sample)),
    ]:
        out.append(make_report(name, x, hooke_strain_field(uf, P.lam, P.nu)(x) - sf(x), tol))
    return out


def verify_shape_derivative_boundary(
    params=None, sample=None, npts: int = BOUNDARY_NODES, tol: float = RESIDUAL_TOL, domain=None
) -> list[ResidualReport]:
    """Per side: general expression vs the published right-hand side (``bc-printed``)
    and vs the true shape derivative (``bc-exact``)."""
    P = params or ExampleParams()
    sample = sample or PerturbationSample(0.0, 1.0)
    dom = domain or DomainSpec()
    reports = []
    for seg in dom.outer_segments + dom.interface_segments:
        x = boundary_nodes(seg, npts)
        lhs = derivative_bc_lhs(P, sample, seg, x)
        reports.append(
            make_report(f"derivative/bc-printed/{seg.name}", x, lhs - printed_derivative_rhs(seg, x, sample.a), tol)
        )
        reports.append(
            make_report(f"derivative/bc-exact/{seg.name}", x, lhs - derivative_bc_exact(P, sample, seg, x), tol)
        )
    return reports


def verify_G_field(params=None, sample=None, npts: int = BOUNDARY_NODES, tol=RESIDUAL_TOL, domain=None):
    """Row sums of the published ``G`` matrix against the general vector ``G``
    (constant ``kappa = a``, taken on the top sides where ``<(a,a), n> = a``)."""
    P = params or ExampleParams()
    sample = sample or PerturbationSample(0.0, 1.0)
    dom = domain or DomainSpec()
    _, _, sigma = exact_fields(P)
    Gp = G_field(P, sample)
    out = []
    for name in ("Gamma1", "Sigma1"):
        seg = dom.segment(name)
        x = boundary_nodes(seg, npts)
        g = G_general(sigma, side_data(translation_map(sample.a), seg, x))
        out.append(make_report(f"G/row-sums/{name}", x, Gp(x).sum(axis=-1) - g, tol))
    return out


def verify_shape_hessian(
    params=None, sample=None, npts: int = BOUNDARY_NODES, tol: float = RESIDUAL_TOL, domain=None
) -> list[ResidualReport]:
    """Interior equations plus, per side, the general second-order boundary
    expression vs the published right-hand side and vs the true Hessian."""
    P = params or ExampleParams()
    sample = sample or PerturbationSample(0.0, 1.0, 1.0)
    dom = domain or DomainSpec()
    reports = list(verify_shape_hessian_interior(P, sample, tol=tol, domain=dom))
    for seg in dom.outer_segments + dom.interface_segments:
        x = boundary_nodes(seg, npts)
        lhs = hessian_bc_lhs(P, sample, seg, x)
        rhs = printed_hessian_rhs(seg, x, sample.a, sample.b)
        reports.append(make_report(f"hessian/bc-printed/{seg.name}", x, lhs - rhs, tol))
        reports.append(make_report(f"hessian/bc-exact/{seg.name}", x, lhs - hessian_bc_exact(P, sample, seg, x), tol))
    return reports


def verify_printed_H(params=None, sample=None, npts: int = BOUNDARY_NODES, tol=RESIDUAL_TOL, domain=None):
    """General ``H2``, ``H3 n.n`` and ``H4`` against the published values on the top interface."""
    P = params or ExampleParams()
    sample = sample or PerturbationSample(0.0, 1.0, 1.0)
    seg = (domain or DomainSpec()).segment("Sigma1")
    x = boundary_nodes(seg, npts)
    hd = hessian_boundary_data(P, sample, seg, x)
    pr = printed_H_top_interface(sample, x, seg)
    n = seg.normal
    return [
        make_report("H/H2/Sigma1", x, hd.H2 - pr["H2"], tol),
        make_report("H/H3nn/Sigma1", x, (hd.H3 @ n) @ n - pr["H3"], tol),
        make_report("H/H4/Sigma1", x, hd.H4 - pr["H4"], tol),
    ]


# -- bilinear forms -------------------------------------------------------------------


def rotation_field(u: Field) -> TensorField:
    """``r = (grad u - grad u^T) / 2``."""
    return TensorField(
        lambda p: 0.5 * (u.grad(p) - np.swapaxes(u.grad(p), -1, -2)),
        u.dim,
        (lambda p: 0.5 * (u.hess(p) - np.swapaxes(u.hess(p), 1, 2))) if u.hess_fn else None,
        None,
        f"rot {u.label}",
    )


def skew_field(scalar: ScalarField) -> TensorField:
    """``phi(x) [[0, 1], [-1, 0]]``."""
    return scalar.outer([[0.0, 1.0], [-1.0, 0.0]])


def bump(lo, hi, power: int = 3) -> ScalarField:
    """Polynomial bump ``prod_k ((x_k - lo_k)(hi_k - x_k))^power`` on a box, zero outside."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    scale = ((hi - lo) / 2) ** -2.0

    def parts(p):
        g = np.clip((p - lo) * (hi - p), 0.0, None) * scale
        dg = (lo + hi - 2 * p) * scale * (g > 0)
        return g, dg

    def value(p):
        g, _ = parts(p)
        return np.prod(g**power, axis=1)

    def grad(p):
        g, dg = parts(p)
        gp = g**power
        out = np.empty_like(p)
        for k in range(p.shape[1]):
            others = np.prod(np.delete(gp, k, axis=1), axis=1)
            out[:, k] = power * g[:, k] ** (power - 1) * dg[:, k] * others
        return out

    return ScalarField(value, len(lo), grad, None, "bump")


@dataclass(frozen=True)
class FormChecks:
    values: dict
    reports: list


def verify_bilinear_forms(ctx: FormContext | None = None, n_skew: int = 20, seed: int = 0) -> FormChecks:
    """Closed-form values and identities of the bilinear forms on the example."""
    ctx = ctx or FormContext()
    P = ctx.params
    u, p, sigma = exact_fields(P)
    r = rotation_field(u)
    rng = np.random.default_rng(seed)
    from .example import separable

    # skew family with random smooth coefficients
    skew = []
    kinds = ["sin", "cos"]
    for i in range(n_skew):
        c = rng.normal(size=3)
        phi = (
            separable(kinds[i % 2], kinds[(i // 2) % 2]).scale(c[0])
            + ScalarField(lambda q, c=c: c[1] * q[:, 0] + c[2] * q[:, 1] ** 2, 2)
        )
        skew.append(skew_field(phi))
    b_vals = np.array([ctx.b(sigma, s) for s in skew])

    tau = bump((1.25, -0.5), (1.75, 0.5)).outer([[1.0, 0.3], [-0.4, -0.7]])
    weak = ctx.a1(sigma, tau) - P.mu2 * (ctx.d1(sigma, tau) + ctx.b(tau, r)) - ctx.ell(tau)
    values = {
        "d2(p,p)": ctx.d2(p, p),
        "a2(p,p)": ctx.a2(p, p),
        "b(sigma,skew)_max": float(np.max(np.abs(b_vals))),
        "weak_momentum_residual": float(weak),
    }
    one = np.zeros((1, 2))
    reports = [
        make_report("forms/d2(p,p)=1/3", one, [values["d2(p,p)"] - 1.0 / 3.0], 1e-12),
        make_report("forms/a2(p,p)=2pi^2", one, [values["a2(p,p)"] - 2 * np.pi**2], 1e-10),
        make_report("forms/b(sigma,skew)=0", np.zeros((n_skew, 2)), b_vals, 1e-12),
        make_report("forms/weak-momentum", one, [weak], 1e-8),
    ]
    return FormChecks(values, reports)


# -- Hadamard formulas ------------------------------------------------------------------


@dataclass(frozen=True)
class VFamily:
    """A family ``v^eps`` with its shape derivative ``v'`` (``d/deps`` at fixed x)."""

    name: str
    value: Callable  # (pts, eps) -> values
    derivative: Callable  # pts -> values
    v0: Field


def pressure_family(a: float = 1.0) -> VFamily:
    _, p, _ = exact_fields()
    _, _, dp = shape_derivative_fields(None, PerturbationSample(0.0, a))
    return VFamily("pressure", lambda x, e: p(x - e * a), dp, p)


def exponential_family() -> VFamily:
    """``v^eps = exp(0.3 x + 0.5 y + eps x y)``, not periodic on the square."""

    def value(x, e):
        return np.exp(0.3 * x[:, 0] + 0.5 * x[:, 1] + e * x[:, 0] * x[:, 1])

    v0 = ScalarField(
        lambda x: value(x, 0.0),
        2,
        lambda x: value(x, 0.0)[:, None] * np.array([0.3, 0.5]),
        None,
        "exp",
    )
    return VFamily("exponential", value, lambda x: x[:, 0] * x[:, 1] * value(x, 0.0), v0)


def unit_family() -> VFamily:
    one = ScalarField(lambda x: np.ones(x.shape[0]), 2, lambda x: np.zeros_like(x), None, "1")
    return VFamily("one", lambda x, e: np.ones(x.shape[0]), lambda x: np.zeros(x.shape[0]), one)


HADAMARD_EPS = (1e-1, 1e-2, 1e-3, 1e-4)


def _square_sides():
    return DomainSpec().interface_segments


def _boundary_quadrature(geometry: str):
    """List of (nodes, weights, normals, div_n) blocks for the chosen closed curve."""
    if geometry == "square":
        blocks = []
        for seg in _square_sides():
            rule = segment_rule(seg, 32, 4)
            blocks.append((rule.nodes, rule.weights, np.broadcast_to(seg.normal, rule.nodes.shape), np.zeros(len(rule.weights))))
        return blocks
    if geometry == "disk":
        disk = Disk(1.0)
        rule = disk.boundary_rule(256)
        divn = tangential_divergence_of_normal(disk, rule.nodes)
        return [(rule.nodes, rule.weights, disk.normal_field(rule.nodes), divn)]
    raise ValueError(f"unknown geometry {geometry!r}")


def _volume_rule(geometry: str):
    if geometry == "square":
        return region_rule("fluid")
    if geometry == "disk":
        return Disk(1.0).volume_rule()
    raise ValueError(f"unknown geometry {geometry!r}")


def functional_value(fam: VFamily, tmap: TransportMap, kind: str, geometry: str) -> float:
    """``J(eps)`` on the deformed domain, by pulling back to the reference one."""
    eps = tmap.epsilon
    if kind == "volume":
        rule = _volume_rule(geometry)
        y = rule.nodes
        det = tmap.check_jacobian(y)
        return float(rule.integrate(fam.value(tmap(y), eps) * det))
    total = 0.0
    for y, w, n, _ in _boundary_quadrature(geometry):
        J = tmap.jacobian(y)
        det = tmap.check_jacobian(y)
        # surface element: det(J) |J^-T n|
        JinvT_n = np.linalg.solve(np.swapaxes(J, 1, 2), n[..., None])[..., 0]
        dS = det * np.linalg.norm(JinvT_n, axis=1)
        total += float(np.sum(w * fam.value(tmap(y), eps) * dS))
    return total


def hadamard_formula(fam: VFamily, tmap: TransportMap, kind: str, geometry: str) -> float:
    """``int v' + oint v kappa`` (volume) or ``oint v' + oint (dv/dn + div_G(n) v) kappa``."""
    total = 0.0
    if kind == "volume":
        rule = _volume_rule(geometry)
        total += float(rule.integrate(fam.derivative(rule.nodes)))
    for y, w, n, divn in _boundary_quadrature(geometry):
        kappa = np.einsum("ni,ni->n", tmap.velocity(y), n)
        v = fam.v0(y)
        if kind == "volume":
            total += float(np.sum(w * v * kappa))
        else:
            dv_dn = np.einsum("ni,ni->n", fam.v0.grad(y), n)
            total += float(np.sum(w * (fam.derivative(y) + (dv_dn + divn * v) * kappa)))
    return total


@dataclass(frozen=True)
class HadamardResult:
    report: ConvergenceReport
    quotients: tuple
    formula: float


def hadamard_functional_derivative(
    fam: VFamily,
    kind: str,
    tmap: TransportMap,
    geometry: str = "square",
    eps_list: Sequence[float] = HADAMARD_EPS,
    target: float = 0.9,
    floor: float = 1e-9,
) -> HadamardResult:
    """Forward quotients ``(J(eps) - J(0)) / eps`` against the Hadamard formula."""
    if kind not in ("volume", "boundary"):
        raise ValueError("kind must be 'volume' or 'boundary'")
    eps = np.asarray(eps_list, dtype=float)
    if np.any(eps <= 0) or np.any(eps > tmap.eps_max):
        raise ValueError(f"epsilon values must lie in (0, {tmap.eps_max}]")
    J0 = functional_value(fam, tmap.with_eps(0.0), kind, geometry)
    formula = hadamard_formula(fam, tmap.with_eps(0.0), kind, geometry)
    quot = [(functional_value(fam, tmap.with_eps(e), kind, geometry) - J0) / e for e in eps]
    err = np.abs(np.array(quot) - formula)
    rid = f"hadamard/{kind}/{geometry}/{tmap.label}/{fam.name}"
    return HadamardResult(ConvergenceReport(rid, tuple(eps), tuple(err), target, floor), tuple(quot), formula)


def hadamard_suite(a: float = 0.8, eps_list=HADAMARD_EPS) -> list[HadamardResult]:
    """Volume and boundary checks, each with the translation and the dilation map.

    Volume checks use the square; boundary checks use the unit disk, since
    on a polygon the boundary formula misses corner contributions.
    """
    fam = exponential_family()
    maps = [translation_map(a), dilation_map(a)]
    out = [hadamard_functional_derivative(fam, "volume", m, "square", eps_list) for m in maps]
    out += [hadamard_functional_derivative(fam, "boundary", m, "disk", eps_list) for m in maps]
    out.append(hadamard_functional_derivative(pressure_family(a), "volume", translation_map(a), "square", eps_list))
    return out


# -- normal and material derivatives -----------------------------------------------------


def normal_shape_derivative(seg: Segment, kappa: ScalarField) -> VectorField:
    """``n' = -grad_G kappa`` on a flat side."""
    return VectorField(lambda x: -tangential_gradient(kappa, x, seg), 2, None, None, "n'")


def material_derivative(v_prime: Field, v0: Field, tmap: TransportMap) -> Field:
    """``v_dot = v' + grad v0 . V``."""

    def value(x):
        return v_prime(x) + np.einsum("n...k,nk->n...", v0.grad(x), tmap.velocity(x))

    return type(v0)(value, v0.dim, None, None, f"mat({v0.label})")


def material_derivative_fd(fam: VFamily, tmap: TransportMap, x, eps: float) -> np.ndarray:
    """Pullback quotient ``(v^eps(T^eps x) - v0(x)) / eps``."""
    pts, single = as_points(x, 2)
    m = tmap.with_eps(eps)
    out = (fam.value(m(pts), eps) - fam.v0(pts)) / eps
    return out[0] if single else out
