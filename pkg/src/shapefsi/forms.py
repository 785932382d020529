"""Quadrature evaluation of the mixed-formulation bilinear forms.

``a1(s, t) = int_S div s . div t / rho_S``, ``a2(p, q) = int_F grad p . grad q / rho_F``,
``d1(s, t) = int_S C^-1 s : t``, ``d2(p, q) = int_F p q / (rho_F c^2)``,
``b(t, s) = int_S t : s`` and ``ell(t) = int_S F . div t / rho_S``, plus the
composites built from them.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .example import ExampleParams, body_force
from .fields import Field
from .geometry import (
    DEFAULT_CELLS_PER_UNIT,
    DEFAULT_GAUSS_POINTS,
    DomainSpec,
    QuadratureRule,
    region_rule,
)
from .tensor import frobenius, hooke_inverse


def _div(f: Field, pts):
    return np.trace(f.grad(pts), axis1=-2, axis2=-1)


@dataclass(frozen=True)
class FormContext:
    params: ExampleParams = ExampleParams()
    domain: DomainSpec = DomainSpec()
    cells_per_unit: int = DEFAULT_CELLS_PER_UNIT
    gauss_points: int = DEFAULT_GAUSS_POINTS

    @cached_property
    def solid(self) -> QuadratureRule:
        return region_rule("solid", self.domain, self.cells_per_unit, self.gauss_points)

    @cached_property
    def fluid(self) -> QuadratureRule:
        return region_rule("fluid", self.domain, self.cells_per_unit, self.gauss_points)

    # -- individual forms ---------------------------------------------------

    def a1(self, sigma: Field, tau: Field) -> float:
        x = self.solid.nodes
        v = np.einsum("ni,ni->n", _div(sigma, x), _div(tau, x)) / self.params.rho_S
        return float(self.solid.integrate(v))

    def a2(self, p: Field, q: Field) -> float:
        x = self.fluid.nodes
        v = np.einsum("ni,ni->n", p.grad(x), q.grad(x)) / self.params.rho_F
        return float(self.fluid.integrate(v))

    def d1(self, sigma: Field, tau: Field) -> float:
        x = self.solid.nodes
        P = self.params
        return float(self.solid.integrate(frobenius(hooke_inverse(sigma(x), P.lam, P.nu), tau(x))))

    def d2(self, p: Field, q: Field) -> float:
        x = self.fluid.nodes
        P = self.params
        return float(self.fluid.integrate(p(x) * q(x)) / (P.rho_F * P.c**2))

    def b(self, tau: Field, s: Field) -> float:
        x = self.solid.nodes
        return float(self.solid.integrate(frobenius(tau(x), s(x))))

    def ell(self, tau: Field, F: Field | None = None) -> float:
        F = F or body_force(self.params)
        x = self.solid.nodes
        v = np.einsum("ni,ni->n", F(x), _div(tau, x)) / self.params.rho_S
        return float(self.solid.integrate(v))

    # -- composites ---------------------------------------------------------

    def a(self, sp, tq) -> float:
        return self.a1(sp[0], tq[0]) + self.a2(sp[1], tq[1])

    def A(self, sp, tq) -> float:
        return self.a(sp, tq) + self.d1(sp[0], tq[0]) + self.d2(sp[1], tq[1])

    def AA(self, spr, tqs) -> float:
        """``A + b(tau, r) + b(sigma, s)`` on ``((sigma, p), r)`` and ``((tau, q), s)``."""
        (sp, r), (tq, s) = spr, tqs
        return self.A(sp, tq) + self.b(tq[0], r) + self.b(sp[0], s)

    def BB(self, spr, tqs) -> float:
        (sp, r), (tq, s) = spr, tqs
        return self.d1(sp[0], tq[0]) + self.d2(sp[1], tq[1]) + self.b(tq[0], r) + self.b(sp[0], s)

    def DD(self, spr, tqs) -> float:
        return self.AA(spr, tqs) - (1.0 + self.params.mu2) * self.BB(spr, tqs)


def evaluate_bilinear_forms(ctx: FormContext, fields, tests) -> dict[str, float]:
    """All forms for ``fields = ((sigma, p), r)`` against ``tests = ((tau, q), s)``."""
    (sigma, p), r = fields
    (tau, q), s = tests
    return {
        "a1": ctx.a1(sigma, tau),
        "a2": ctx.a2(p, q),
        "d1": ctx.d1(sigma, tau),
        "d2": ctx.d2(p, q),
        "b(tau,r)": ctx.b(tau, r),
        "b(sigma,s)": ctx.b(sigma, s),
        "ell": ctx.ell(tau),
        "a": ctx.a(fields[0], tests[0]),
        "A": ctx.A(fields[0], tests[0]),
        "AA": ctx.AA(fields, tests),
        "BB": ctx.BB(fields, tests),
        "DD": ctx.DD(fields, tests),
    }
