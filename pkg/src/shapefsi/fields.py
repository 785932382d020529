"""Evaluable scalar, vector and tensor fields over R^d.

A field wraps a vectorised value function together with optional analytic
first and second partials.  Points are passed either as a single point of
shape ``(d,)`` or as a batch of shape ``(n, d)``; outputs follow the same
convention (leading batch axis only when the input was batched).

Derivative layout: for a field with value shape ``s`` the gradient has shape
``s + (d,)`` and the Hessian ``s + (d, d)``, the trailing axes being the
differentiation directions.  ``grad[..., k]`` is the partial along ``x_k``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

ArrayFn = Callable[[np.ndarray], np.ndarray]

FD_STEP = 1e-5
FD_STEP_SECOND = 1e-4


def as_points(x, dim: int) -> tuple[np.ndarray, bool]:
    """Return ``(points, single)`` with points shaped ``(n, dim)``."""
    pts = np.asarray(x, dtype=float)
    if pts.ndim == 1:
        if pts.shape[0] != dim:
            raise ValueError(f"point has {pts.shape[0]} coordinates, expected {dim}")
        return pts[None, :], True
    if pts.ndim != 2 or pts.shape[1] != dim:
        raise ValueError(f"points must have shape (n, {dim}), got {pts.shape}")
    return pts, False


def _central_diff(fn: ArrayFn, pts: np.ndarray, h: float) -> np.ndarray:
    d = pts.shape[1]
    cols = []
    for k in range(d):
        e = np.zeros(d)
        e[k] = h
        cols.append((fn(pts + e) - fn(pts - e)) / (2.0 * h))
    return np.stack(cols, axis=-1)


def _second_diff(fn: ArrayFn, pts: np.ndarray, h: float) -> np.ndarray:
    d = pts.shape[1]
    f0 = fn(pts)
    out = np.empty(f0.shape + (d, d))
    for i in range(d):
        ei = np.zeros(d)
        ei[i] = h
        out[..., i, i] = (fn(pts + ei) - 2.0 * f0 + fn(pts - ei)) / h**2
        for j in range(i + 1, d):
            ej = np.zeros(d)
            ej[j] = h
            mixed = (
                fn(pts + ei + ej) - fn(pts + ei - ej) - fn(pts - ei + ej) + fn(pts - ei - ej)
            ) / (4.0 * h**2)
            out[..., i, j] = mixed
            out[..., j, i] = mixed
    return out


@dataclass(frozen=True)
class Field:
    """Base class; use :class:`ScalarField`, :class:`VectorField` or :class:`TensorField`."""

    value_fn: ArrayFn
    dim: int = 2
    grad_fn: Optional[ArrayFn] = None
    hess_fn: Optional[ArrayFn] = None
    label: str = ""
    fd_step: float = field(default=FD_STEP, repr=False)

    rank = 0

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"dimension must be 2 or 3, got {self.dim}")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.dim,) * self.rank

    @property
    def has_analytic_grad(self) -> bool:
        return self.grad_fn is not None

    def _eval(self, fn: ArrayFn, x) -> np.ndarray:
        pts, single = as_points(x, self.dim)
        out = np.asarray(fn(pts), dtype=float)
        return out[0] if single else out

    def __call__(self, x) -> np.ndarray:
        return self._eval(self.value_fn, x)

    def grad(self, x) -> np.ndarray:
        if self.grad_fn is not None:
            return self._eval(self.grad_fn, x)
        return self._eval(lambda p: _central_diff(self.value_fn, p, self.fd_step), x)

    def hess(self, x) -> np.ndarray:
        if self.hess_fn is not None:
            return self._eval(self.hess_fn, x)
        if self.grad_fn is not None:
            return self._eval(lambda p: _central_diff(self.grad_fn, p, self.fd_step), x)
        return self._eval(lambda p: _second_diff(self.value_fn, p, FD_STEP_SECOND), x)

    # -- algebra -----------------------------------------------------------
    # Derived fields keep analytic derivatives whenever both operands have them.

    def _combine(self, other: "Field", op: Callable, label: str) -> "Field":
        if not isinstance(other, Field) or other.rank != self.rank or other.dim != self.dim:
            raise TypeError("fields must share rank and dimension")
        a, b = self, other

        def lift(fa, fb):
            if fa is None or fb is None:
                return None
            return lambda p: op(fa(p), fb(p))

        return type(self)(
            lambda p: op(a.value_fn(p), b.value_fn(p)),
            dim=self.dim,
            grad_fn=lift(a.grad_fn, b.grad_fn),
            hess_fn=lift(a.hess_fn, b.hess_fn),
            label=label,
        )

    def __add__(self, other):
        return self._combine(other, np.add, f"({self.label} + {other.label})")

    def __sub__(self, other):
        return self._combine(other, np.subtract, f"({self.label} - {other.label})")

    def scale(self, c: float) -> "Field":
        def lift(fn):
            return None if fn is None else (lambda p: c * fn(p))

        return type(self)(
            lift(self.value_fn),
            dim=self.dim,
            grad_fn=lift(self.grad_fn),
            hess_fn=lift(self.hess_fn),
            label=f"{c:g}*{self.label}",
        )

    def __mul__(self, c):
        if isinstance(c, Field):
            raise TypeError("use ScalarField.outer for products of fields")
        return self.scale(float(c))

    __rmul__ = __mul__

    def __neg__(self):
        return self.scale(-1.0)

    def shifted(self, offset) -> "Field":
        """Return ``x -> self(x - offset)``."""
        off = np.asarray(offset, dtype=float)

        def lift(fn):
            return None if fn is None else (lambda p: fn(p - off))

        return type(self)(
            lift(self.value_fn),
            dim=self.dim,
            grad_fn=lift(self.grad_fn),
            hess_fn=lift(self.hess_fn),
            label=f"{self.label}(x-{off.tolist()})",
        )


class ScalarField(Field):
    rank = 0

    def outer(self, const) -> Field:
        """Field ``x -> f(x) * const`` of the rank of ``const`` (vector or matrix)."""
        c = np.asarray(const, dtype=float)
        cls = RANK_TO_FIELD[c.ndim]
        f = self
        # grad of f*C has shape C.shape + (d,)
        grad_fn = None
        if f.grad_fn is not None:
            grad_fn = lambda p: np.einsum("...k,ij->...ijk" if c.ndim == 2 else "...k,i->...ik", f.grad_fn(p), c)
        hess_fn = None
        if f.hess_fn is not None:
            hess_fn = lambda p: np.einsum(
                "...kl,ij->...ijkl" if c.ndim == 2 else "...kl,i->...ikl", f.hess_fn(p), c
            )
        return cls(
            lambda p: np.multiply.outer(f.value_fn(p), c),
            dim=self.dim,
            grad_fn=grad_fn,
            hess_fn=hess_fn,
            label=f"{self.label}*C",
        )


class VectorField(Field):
    rank = 1


class TensorField(Field):
    rank = 2


RANK_TO_FIELD = {0: ScalarField, 1: VectorField, 2: TensorField}


def constant_field(value, dim: int = 2, label: str = "const") -> Field:
    """Field with a constant value and exactly zero derivatives."""
    v = np.asarray(value, dtype=float)
    cls = RANK_TO_FIELD[v.ndim]

    def const(p):
        return np.broadcast_to(v, (p.shape[0],) + v.shape).copy()

    return cls(
        const,
        dim=dim,
        grad_fn=lambda p: np.zeros((p.shape[0],) + v.shape + (dim,)),
        hess_fn=lambda p: np.zeros((p.shape[0],) + v.shape + (dim, dim)),
        label=label,
    )


def check_partials(f: Field, x, h: float = 1e-4) -> float:
    """Max deviation between the analytic gradient and a central difference."""
    pts, _ = as_points(x, f.dim)
    fd = _central_diff(f.value_fn, pts, h)
    return float(np.max(np.abs(np.asarray(f.grad(pts)) - fd)))
