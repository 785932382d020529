"""Closed-form solid/fluid example on the square geometry.

Unperturbed fields (solid displacement ``u``, stress ``sigma``, fluid
pressure ``p``), their translated versions for a random amplitude ``a``,
first and second shape derivatives, the body force and the printed boundary
data.  Every field carries hand-derived first and second partials.

Shorthand used below: ``S = sin pi(x+y)``, ``C = cos pi(x+y)``,
``sx = sin pi x`` and so on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .fields import ScalarField, TensorField, VectorField, as_points
from .geometry import Segment
from .tensor import divergence_field

PI = math.pi
EPS_MAX = 0.25


@dataclass(frozen=True)
class ExampleParams:
    mu2: float = 6 * PI**2
    rho_S: float = 3.0
    rho_F: float = 1.0
    lam: float = 1.0
    nu: float = 1.0
    # not given for the example; fixed by requiring mu2 / c^2 = 2 pi^2
    c: float = math.sqrt(3.0)
    g_gravity: float = 0.0

    def __post_init__(self):
        for name in ("mu2", "rho_S", "rho_F", "lam", "nu", "c"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def k2(self) -> float:
        """Fluid wavenumber squared ``mu2 / c^2``."""
        return self.mu2 / self.c**2

    @property
    def solid_coeff(self) -> float:
        """``mu2 * rho_S``, the zeroth-order coefficient of the solid equation."""
        return self.mu2 * self.rho_S


@dataclass(frozen=True)
class PerturbationSample:
    epsilon: float = 0.0
    a: float = 0.0
    b: Optional[float] = None

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        if abs(self.a) > 1 or (self.b is not None and abs(self.b) > 1):
            raise ValueError("amplitudes must lie in [-1, 1]")
        if self.b is None:
            object.__setattr__(self, "b", self.a)


# -- scalar building blocks ---------------------------------------------------

# f, f', f'' for sin and cos
_TRIG = {
    "sin": (np.sin, np.cos, lambda t: -np.sin(t)),
    "cos": (np.cos, lambda t: -np.sin(t), lambda t: -np.cos(t)),
}


def separable(kx: str, ky: str, label: str = "") -> ScalarField:
    """``fx(pi x) * fy(pi y)`` with fx, fy in {sin, cos}."""
    fx, fx1, fx2 = _TRIG[kx]
    fy, fy1, fy2 = _TRIG[ky]

    def value(p):
        return fx(PI * p[:, 0]) * fy(PI * p[:, 1])

    def grad(p):
        X, Y = PI * p[:, 0], PI * p[:, 1]
        return PI * np.stack([fx1(X) * fy(Y), fx(X) * fy1(Y)], axis=-1)

    def hess(p):
        X, Y = PI * p[:, 0], PI * p[:, 1]
        xx, yy, xy = fx2(X) * fy(Y), fx(X) * fy2(Y), fx1(X) * fy1(Y)
        return PI**2 * np.stack([np.stack([xx, xy], -1), np.stack([xy, yy], -1)], -2)

    return ScalarField(value, 2, grad, hess, label or f"{kx}(pi x){ky}(pi y)")


def plane_wave(kind: str) -> ScalarField:
    """``f(pi (x + y))`` with f in {sin, cos}."""
    f, f1, f2 = _TRIG[kind]
    ones = np.ones((2, 2))

    def value(p):
        return f(PI * (p[:, 0] + p[:, 1]))

    def grad(p):
        return PI * np.multiply.outer(f1(PI * (p[:, 0] + p[:, 1])), np.ones(2))

    def hess(p):
        return PI**2 * np.multiply.outer(f2(PI * (p[:, 0] + p[:, 1])), ones)

    return ScalarField(value, 2, grad, hess, f"{kind}(pi(x+y))")


S_WAVE = plane_wave("sin")
C_WAVE = plane_wave("cos")
ONES = np.ones(2)


# -- exact fields --------------------------------------------------------------


def exact_fields(params: ExampleParams | None = None):
    """Return ``(u, p, sigma)`` of the unperturbed problem."""
    u = separable("sin", "sin").outer(ONES)
    p = separable("cos", "cos", "p")
    sigma = (
        S_WAVE.outer(PI * np.ones((2, 2)))
        + separable("cos", "sin").outer([[2 * PI, 0.0], [0.0, 0.0]])
        + separable("sin", "cos").outer([[0.0, 0.0], [0.0, 2 * PI]])
    )
    return (
        _relabel(u, "u"),
        p,
        _relabel(sigma, "sigma"),
    )


def _relabel(f, label):
    return type(f)(f.value_fn, f.dim, f.grad_fn, f.hess_fn, label)


def _check_eps(sample: PerturbationSample):
    if sample.epsilon > EPS_MAX:
        raise ValueError(f"epsilon={sample.epsilon} exceeds eps_max={EPS_MAX}")


def perturbed_fields(params: ExampleParams | None, sample: PerturbationSample):
    """``(u_eps, p_eps)``: the exact fields translated by ``eps * a * (1, 1)``."""
    _check_eps(sample)
    u, p, _ = exact_fields(params)
    shift = sample.epsilon * sample.a * ONES
    return u.shifted(shift), p.shifted(shift)


def perturbed_stress(params: ExampleParams | None, sample: PerturbationSample) -> TensorField:
    _check_eps(sample)
    _, _, sigma = exact_fields(params)
    return sigma.shifted(sample.epsilon * sample.a * ONES)


def shape_derivative_fields(params: ExampleParams | None, sample: PerturbationSample):
    """``(u', sigma', p')`` for the translation with amplitude ``a``."""
    a = sample.a
    du = S_WAVE.outer(-a * PI * ONES)
    dsigma = C_WAVE.outer(-a * PI**2 * np.array([[4.0, 2.0], [2.0, 4.0]]))
    dp = S_WAVE.scale(a * PI)
    return _relabel(du, "u'"), _relabel(dsigma, "sigma'"), _relabel(dp, "p'")


def shape_hessian_fields(params: ExampleParams | None, sample: PerturbationSample):
    """``(u'', sigma'', p'')`` for the amplitude pair ``(a, b)``.

    ``sigma''`` is the stress of ``u''`` (so the constitutive law holds); it
    differs in sign pattern from :func:`printed_stress_hessian`.
    """
    ab = sample.a * sample.b
    d2u = C_WAVE.outer(2 * ab * PI**2 * ONES)
    d2sigma = S_WAVE.outer(-ab * PI**3 * np.array([[8.0, 4.0], [4.0, 8.0]]))
    d2p = C_WAVE.scale(-2 * ab * PI**2)
    return _relabel(d2u, "u''"), _relabel(d2sigma, "sigma''"), _relabel(d2p, "p''")


def printed_stress_hessian(sample: PerturbationSample) -> TensorField:
    """Second stress derivative with the sign pattern as published,
    ``ab pi^3 S [[-8, 4], [4, 8]]``.  It is not ``C E(u'')``."""
    ab = sample.a * sample.b
    return _relabel(S_WAVE.outer(ab * PI**3 * np.array([[-8.0, 4.0], [4.0, 8.0]])), "sigma''(printed)")


def body_force(params: ExampleParams | None = None) -> VectorField:
    """``F = div sigma + mu2 rho_S u``."""
    params = params or ExampleParams()
    u, _, sigma = exact_fields(params)
    return _relabel(divergence_field(sigma) + u.scale(params.solid_coeff), "F")


def G_field(params: ExampleParams | None, sample: PerturbationSample) -> TensorField:
    """Boundary datum ``G`` in its published matrix form.

    ``2 a pi^2 [[C, -sx sy], [C, -sx sy]]``.  For constant ``kappa = a`` the
    defining formula gives the vector ``a div sigma``, which equals the row
    sums of this matrix.
    """
    a = sample.a
    G = C_WAVE.outer(2 * a * PI**2 * np.array([[1.0, 0.0], [1.0, 0.0]])) + separable(
        "sin", "sin"
    ).outer(2 * a * PI**2 * np.array([[0.0, -1.0], [0.0, -1.0]]))
    return _relabel(G, "G")


def printed_H_top_interface(sample: PerturbationSample, x, seg: Segment | None = None) -> dict:
    """Published ``H2``, ``H3`` (scalar), ``H4`` on the top interface side.

    Raises ``ValueError`` for any other segment or for points off the side.
    """
    if seg is not None and seg.name != "Sigma1":
        raise ValueError(f"printed H data is only given on Sigma1, not {seg.name}")
    pts, single = as_points(x, 2)
    if not np.allclose(pts[:, 1], 1.0) or np.any(np.abs(pts[:, 0]) > 1.0):
        raise ValueError("points are not on the top interface side y = 1")
    ab = sample.a * sample.b
    X = PI * pts[:, 0]
    H2 = ab * PI**2 * np.stack([np.cos(X), np.zeros_like(X)], axis=-1)
    H3 = -12 * ab * PI**4 * np.cos(X)
    H4 = -4 * ab * PI**3 * np.sin(X)
    if single:
        return {"H2": H2[0], "H3": H3[0], "H4": H4[0]}
    return {"H2": H2, "H3": H3, "H4": H4}


# -- right-hand sides as printed for each boundary side ------------------------


def printed_derivative_rhs(seg: Segment, pts: np.ndarray, a: float) -> np.ndarray:
    """Published right-hand side of the first-order boundary condition."""
    X, Y = PI * pts[:, 0], PI * pts[:, 1]
    n = seg.name
    if n in ("Gamma1", "Gamma3"):
        return a * PI * np.multiply.outer(np.sin(X), ONES)
    if n in ("Gamma2", "Gamma4"):
        return -a * PI * np.multiply.outer(np.sin(Y), ONES)
    t = X if n in ("Sigma1", "Sigma3") else Y
    sign = -1.0 if n in ("Sigma1", "Sigma2") else 1.0
    return a * PI**2 * np.cos(t) + sign * 6 * PI**3 * a * np.sin(t)


def printed_hessian_rhs(seg: Segment, pts: np.ndarray, a: float, b: float) -> np.ndarray:
    """Published right-hand side of the second-order boundary condition."""
    X, Y = PI * pts[:, 0], PI * pts[:, 1]
    ab = a * b
    n = seg.name
    if n in ("Gamma1", "Gamma3"):
        return 2 * ab * PI**2 * np.multiply.outer(np.cos(X), ONES)
    if n in ("Gamma2", "Gamma4"):
        return 2 * ab * PI**2 * np.multiply.outer(np.cos(Y), ONES)
    t = X if n in ("Sigma1", "Sigma3") else Y
    sign = 1.0 if n in ("Sigma1", "Sigma2") else -1.0
    return -2 * ab * PI**3 * np.sin(t) + sign * 12 * ab * PI**4 * np.cos(t)
