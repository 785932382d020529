"""Perturbation of identity ``T(x) = x + eps * V(x)`` with ``V = kappa_ext * n_ext``.

Provides the Jacobian ``J = I + eps grad V``, the coefficients of
``det J = 1 + eps g1 + eps^2 g2 + eps^3 g3``, the adjugate and inverse
expansions, the metric ``A = det(J) J^-1 J^-T`` and the stress operator
``A~(eps) sigma = det(J) J^-1 (x) L_{J^-1} sigma`` together with their
derivatives at ``eps = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .fields import Field, ScalarField, VectorField, as_points, constant_field
from .tensor import L_from_partials, kronecker

EPS_MAX = 0.25
CUTOFF_RADIUS = 4.0


class DegenerateJacobianError(ArithmeticError):
    """``det J <= 0`` somewhere; the map is not a diffeomorphism there."""

    def __init__(self, x, eps, det):
        self.x = np.asarray(x, dtype=float)
        self.eps = eps
        self.det = det
        super().__init__(f"degenerate Jacobian at x={self.x.tolist()} eps={eps:g} (det={det:g})")


def radial_cutoff(R: float = CUTOFF_RADIUS, width: float = 1.0, dim: int = 2) -> ScalarField:
    """C^2 cutoff: 1 for ``|x| <= R - width``, 0 for ``|x| >= R``, quintic smoothstep between."""
    r0 = R - width

    def parts(p):
        r = np.linalg.norm(p, axis=1)
        t = np.clip((r - r0) / width, 0.0, 1.0)
        rho = 1.0 - t**3 * (10.0 - 15.0 * t + 6.0 * t**2)
        d1 = -30.0 * t**2 * (1.0 - t) ** 2 / width
        d2 = -60.0 * t * (1.0 - t) * (1.0 - 2.0 * t) / width**2
        return r, rho, d1, d2

    def value(p):
        return parts(p)[1]

    def grad(p):
        r, _, d1, _ = parts(p)
        rs = np.where(r > 0, r, 1.0)
        return (d1 / rs)[:, None] * p

    def hess(p):
        r, _, d1, d2 = parts(p)
        rs = np.where(r > 0, r, 1.0)
        e = p / rs[:, None]
        ee = np.einsum("ni,nj->nij", e, e)
        eye = np.eye(p.shape[1])
        return d2[:, None, None] * ee + (d1 / rs)[:, None, None] * (eye - ee)

    return ScalarField(value, dim, grad, hess, "cutoff")


def _identity_field(dim: int) -> VectorField:
    eye = np.eye(dim)
    return VectorField(
        lambda p: p.copy(),
        dim,
        lambda p: np.broadcast_to(eye, (p.shape[0], dim, dim)).copy(),
        lambda p: np.zeros((p.shape[0], dim, dim, dim)),
        "x",
    )


@dataclass(frozen=True)
class JacobianBundle:
    eps: float
    grad_V: np.ndarray
    J: np.ndarray
    gamma: float
    gamma_coeffs: tuple
    Vtilde1: np.ndarray
    Vtilde2: np.ndarray
    Vhat1: np.ndarray
    A: np.ndarray

    @property
    def adjugate(self) -> np.ndarray:
        """``adj J = I + eps Vt1 + eps^2 Vt2`` (so ``J adj J = det J I``)."""
        d = self.J.shape[0]
        return np.eye(d) + self.eps * self.Vtilde1 + self.eps**2 * self.Vtilde2

    @property
    def cofactor(self) -> np.ndarray:
        """Cofactor matrix, the transpose of the adjugate."""
        return self.adjugate.T

    @property
    def J_inv(self) -> np.ndarray:
        return np.eye(self.J.shape[0]) + self.eps * self.Vhat1

    def gamma_poly(self, eps: float | None = None) -> float:
        e = self.eps if eps is None else eps
        g1, g2, g3 = self.gamma_coeffs
        return 1.0 + e * g1 + e**2 * g2 + e**3 * g3


def det_coefficients(M: np.ndarray) -> tuple[float, float, float]:
    """Coefficients of ``det(I + eps M)`` as a polynomial in ``eps``."""
    M = np.asarray(M, dtype=float)
    d = M.shape[0]
    tr = np.trace(M)
    e2 = 0.5 * (tr**2 - np.trace(M @ M))
    e3 = float(np.linalg.det(M)) if d == 3 else 0.0
    return float(tr), float(e2), e3


def adjugate_coefficients(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``(Vt1, Vt2)`` with ``adj(I + eps M) = I + eps Vt1 + eps^2 Vt2``.

    ``Vt1 = tr(M) I - M`` in any dimension; ``Vt2 = adj M`` in 3-D and 0 in 2-D.
    """
    M = np.asarray(M, dtype=float)
    d = M.shape[0]
    tr, e2, _ = det_coefficients(M)
    V1 = tr * np.eye(d) - M
    V2 = M @ M - tr * M + e2 * np.eye(d) if d == 3 else np.zeros((d, d))
    return V1, V2


@dataclass(frozen=True)
class TransportMap:
    kappa_ext: ScalarField
    normal_ext: VectorField
    epsilon: float = 0.0
    R: float = CUTOFF_RADIUS
    eps_max: float = EPS_MAX
    label: str = ""

    def __post_init__(self):
        if self.kappa_ext.dim != self.normal_ext.dim:
            raise ValueError("kappa and normal extensions must share the dimension")
        if not 0.0 <= self.epsilon <= self.eps_max:
            raise ValueError(f"epsilon={self.epsilon} outside [0, {self.eps_max}]")

    @property
    def dim(self) -> int:
        return self.kappa_ext.dim

    def with_eps(self, eps: float) -> "TransportMap":
        return replace(self, epsilon=float(eps))

    def velocity(self, x) -> np.ndarray:
        pts, single = as_points(x, self.dim)
        v = self.kappa_ext(pts)[:, None] * self.normal_ext(pts)
        return v[0] if single else v

    def grad_velocity(self, x) -> np.ndarray:
        """``(grad V)_ij = d_j V_i`` (product rule on ``kappa * n``)."""
        pts, single = as_points(x, self.dim)
        k = self.kappa_ext(pts)
        gk = self.kappa_ext.grad(pts)
        n = self.normal_ext(pts)
        gn = self.normal_ext.grad(pts)
        out = np.einsum("ni,nj->nij", n, gk) + k[:, None, None] * gn
        return out[0] if single else out

    def __call__(self, x) -> np.ndarray:
        pts, single = as_points(x, self.dim)
        out = pts + self.epsilon * self.velocity(pts)
        return out[0] if single else out

    def jacobian(self, x) -> np.ndarray:
        pts, single = as_points(x, self.dim)
        J = np.eye(self.dim) + self.epsilon * self.grad_velocity(pts)
        return J[0] if single else J

    def check_jacobian(self, x) -> np.ndarray:
        """Batched ``det J``; raises :class:`DegenerateJacobianError` on ``det <= 0``."""
        pts, _ = as_points(x, self.dim)
        det = np.linalg.det(self.jacobian(pts))
        bad = np.flatnonzero(~(det > 0))
        if bad.size:
            i = bad[0]
            raise DegenerateJacobianError(pts[i], self.epsilon, float(det[i]))
        return det


def jacobian_bundle(tmap: TransportMap, x) -> JacobianBundle:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("jacobian_bundle takes a single point")
    eps = tmap.epsilon
    d = tmap.dim
    M = tmap.grad_velocity(x)
    J = np.eye(d) + eps * M
    gamma = float(np.linalg.det(J))
    if not gamma > 0:
        raise DegenerateJacobianError(x, eps, gamma)
    V1, V2 = adjugate_coefficients(M)
    Jinv = np.linalg.inv(J)
    Vhat1 = (Jinv - np.eye(d)) / eps if eps > 0 else -M
    A = gamma * Jinv @ Jinv.T
    return JacobianBundle(eps, M, J, gamma, det_coefficients(M), V1, V2, Vhat1, 0.5 * (A + A.T))


def A_matrix(tmap: TransportMap, x) -> np.ndarray:
    return jacobian_bundle(tmap, x).A


def A_gateaux(tmap: TransportMap, x) -> np.ndarray:
    """``dA/deps`` at ``eps = 0``: ``div(V) I - grad V - grad V^T``."""
    M = tmap.grad_velocity(np.asarray(x, dtype=float))
    return np.trace(M) * np.eye(tmap.dim) - M - M.T


def A_gateaux_fd(tmap: TransportMap, x, h: float) -> np.ndarray:
    """Forward quotient ``(A(h) - I) / h``."""
    return (A_matrix(tmap.with_eps(h), x) - np.eye(tmap.dim)) / h


def A_tilde(tmap: TransportMap, sigma: Field, x, eps: float | None = None) -> np.ndarray:
    """``det(J) J^-1 (x) L_{J^-1} sigma`` as a ``d^2 x d`` array (Kronecker with a column)."""
    m = tmap if eps is None else tmap.with_eps(eps)
    b = jacobian_bundle(m, x)
    Jinv = np.linalg.inv(b.J)
    Lsig = L_from_partials(Jinv, sigma.grad(np.asarray(x, dtype=float)))
    return kronecker(b.gamma * Jinv, Lsig[:, None])


def A_tilde_gateaux(tmap: TransportMap, sigma: Field, x) -> np.ndarray:
    """Derivative of :func:`A_tilde` at ``eps = 0``:
    ``(g1 I - M) (x) L_I sigma + I (x) L_{-M} sigma``."""
    x = np.asarray(x, dtype=float)
    d = tmap.dim
    M = tmap.grad_velocity(x)
    ds = sigma.grad(x)
    eye = np.eye(d)
    return kronecker(np.trace(M) * eye - M, L_from_partials(eye, ds)[:, None]) + kronecker(
        eye, L_from_partials(-M, ds)[:, None]
    )


def pullback(field: Field, tmap: TransportMap) -> Field:
    """``y -> field(T(y))``, with the gradient by the chain rule."""

    def value(p):
        return field.value_fn(tmap(p))

    def grad(p):
        g = np.asarray(field.grad(tmap(p)))
        return np.einsum("n...k,nkj->n...j", g, tmap.jacobian(p))

    return type(field)(value, field.dim, grad, None, f"{field.label} o T")


# -- concrete maps -------------------------------------------------------------


def translation_map(a: float, eps: float = 0.0, R: float = CUTOFF_RADIUS, dim: int = 2) -> TransportMap:
    """``V = a * cutoff(|x|) * (1, ..., 1)``: a rigid shift by ``eps * a`` near the origin."""
    return TransportMap(
        radial_cutoff(R, dim=dim).scale(a),
        constant_field(np.ones(dim), dim, "1"),
        eps,
        R,
        label="translation",
    )


def dilation_map(a: float, eps: float = 0.0, R: float = CUTOFF_RADIUS, dim: int = 2) -> TransportMap:
    """``V = a * cutoff(|x|) * x``.

    On the unit square ``x . n = 1`` on every side, so this moves each side of
    the inner square outward by ``eps * a``: a normal offset with ``kappa = a``.
    """
    return TransportMap(radial_cutoff(R, dim=dim).scale(a), _identity_field(dim), eps, R, label="dilation")


def field_map(V: VectorField, eps: float = 0.0, eps_max: float = EPS_MAX) -> TransportMap:
    """Map with a prescribed velocity ``V`` (``kappa_ext = 1``, ``n_ext = V``)."""
    return TransportMap(constant_field(1.0, V.dim, "1"), V, eps, np.inf, eps_max, label="field")
