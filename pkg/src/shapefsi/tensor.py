"""Small dense matrix algebra and the differential operators built on it.

Everything here acts on plain numpy arrays; leading axes are treated as batch
axes so the same call works for one point or many.
"""

from __future__ import annotations

import numpy as np

from .fields import Field, TensorField, VectorField


def _finite_matrix(A, name: str) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or min(A.shape) < 1:
        raise ValueError(f"{name} must be a non-empty 2-D matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} has non-finite entries")
    return A


def kronecker(A, B) -> np.ndarray:
    """Kronecker product: the ``(i, j)`` block of the result is ``A[i, j] * B``."""
    A = _finite_matrix(A, "A")
    B = _finite_matrix(B, "B")
    m, n = A.shape
    p, q = B.shape
    # (m, p, n, q) with [i, k, j, l] = A[i, j] B[k, l]
    return np.einsum("ij,kl->ikjl", A, B).reshape(m * p, n * q)


def frobenius(A, B) -> np.ndarray:
    """Componentwise inner product ``A : B = Tr(A^T B)``; batched over leading axes."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape[-2:] != B.shape[-2:]:
        raise ValueError(f"dimension mismatch: {A.shape[-2:]} vs {B.shape[-2:]}")
    return np.einsum("...ij,...ij->...", A, B)


def L_from_partials(A, dsigma) -> np.ndarray:
    """Apply the L_A operator given the partials ``dsigma[..., k, j, i] = d_i sigma_kj``.

    Row ``k`` of the result is ``sum_ij A_ij d_i sigma_kj``.  ``A`` may carry
    the same batch axes as ``dsigma``.
    """
    return np.einsum("...ij,...kji->...k", np.asarray(A, dtype=float), dsigma)


def L_operator(A, sigma: Field, x) -> np.ndarray:
    """L_A sigma at ``x``; with ``A = I`` this is the row-wise divergence."""
    if sigma.rank != 2:
        raise TypeError("L_operator needs a tensor field")
    return L_from_partials(A, sigma.grad(x))


def divergence(sigma: Field, x) -> np.ndarray:
    """Row-wise divergence ``(div sigma)_i = sum_j d_j sigma_ij`` (or ``div v`` for vectors)."""
    g = sigma.grad(x)
    return np.trace(g, axis1=-2, axis2=-1)


def strain(u: Field, x) -> np.ndarray:
    """Linearised strain ``(grad u + grad u^T) / 2``."""
    if u.rank != 1:
        raise TypeError("strain needs a vector field")
    g = u.grad(x)
    return 0.5 * (g + np.swapaxes(g, -1, -2))


def rotation(u: Field, x) -> np.ndarray:
    """Skew part ``(grad u - grad u^T) / 2`` of the displacement gradient."""
    g = u.grad(x)
    return 0.5 * (g - np.swapaxes(g, -1, -2))


def _check_lame(lam: float, nu: float) -> None:
    if not (lam > 0 and nu > 0):
        raise ValueError(f"Lame constants must be positive, got lambda={lam}, nu={nu}")


def hooke(tau, lam: float = 1.0, nu: float = 1.0) -> np.ndarray:
    """Isotropic Hooke operator ``lam * tr(tau) I + 2 nu tau``."""
    _check_lame(lam, nu)
    tau = np.asarray(tau, dtype=float)
    d = tau.shape[-1]
    tr = np.trace(tau, axis1=-2, axis2=-1)
    return lam * tr[..., None, None] * np.eye(d) + 2.0 * nu * tau


def hooke_inverse(sigma, lam: float = 1.0, nu: float = 1.0) -> np.ndarray:
    """Compliance: inverse of :func:`hooke`."""
    _check_lame(lam, nu)
    sigma = np.asarray(sigma, dtype=float)
    d = sigma.shape[-1]
    tr = np.trace(sigma, axis1=-2, axis2=-1) / (d * lam + 2.0 * nu)
    return (sigma - lam * tr[..., None, None] * np.eye(d)) / (2.0 * nu)


def divergence_field(sigma: Field) -> Field:
    """Divergence of a vector/tensor field as a new field (one rank lower)."""
    cls = VectorField if sigma.rank == 2 else None
    if cls is None:
        from .fields import ScalarField

        cls = ScalarField
    grad_fn = None
    if sigma.hess_fn is not None:
        grad_fn = lambda p: np.trace(sigma.hess_fn(p), axis1=-3, axis2=-2)
    return cls(
        lambda p: np.trace(sigma.grad(p), axis1=-2, axis2=-1),
        dim=sigma.dim,
        grad_fn=grad_fn,
        label=f"div {sigma.label}",
    )


def hooke_strain_field(u: Field, lam: float = 1.0, nu: float = 1.0) -> TensorField:
    """The stress field ``C E(u)`` (analytic partials when ``u`` has a Hessian)."""
    _check_lame(lam, nu)
    d = u.dim

    def value(p):
        g = u.grad(p)
        return hooke(0.5 * (g + np.swapaxes(g, -1, -2)), lam, nu)

    grad_fn = None
    if u.hess_fn is not None:

        def grad_fn(p):
            H = u.hess_fn(p)  # [n, i, j, k] = d_k d_j u_i
            E = 0.5 * (H + np.swapaxes(H, -2, -3))
            tr = np.einsum("...iik->...k", E)
            return lam * np.einsum("...k,ij->...ijk", tr, np.eye(d)) + 2.0 * nu * E

    return TensorField(value, dim=d, grad_fn=grad_fn, label=f"C E({u.label})")
