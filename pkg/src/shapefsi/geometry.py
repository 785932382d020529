"""Square solid/fluid geometry, boundary segments, surface operators and quadrature.

The fluid occupies ``[-1, 1]^2`` and the solid the annulus ``[-2, 2]^2``
minus the fluid square.  Outer sides are ``Gamma1..Gamma4`` (top, right,
bottom, left) and interface sides ``Sigma1..Sigma4`` in the same order.  On
the outer sides the stored normal points out of the solid; on the interface
it points out of the fluid (the solid normal there is its negative).

A disk is provided as a smooth auxiliary geometry for curvature-dependent
self-tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np

from .fields import Field, as_points

CORNER_RADIUS = 1e-3
DEFAULT_GAUSS_POINTS = 5
DEFAULT_CELLS_PER_UNIT = 16


class CornerZoneError(ValueError):
    """A pointwise boundary evaluation was requested too close to a corner."""


@dataclass(frozen=True)
class Segment:
    name: str
    start: np.ndarray
    end: np.ndarray
    normal: np.ndarray
    owner: str  # "solid" for outer sides, "fluid" for the interface
    corner_radius: float = CORNER_RADIUS

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.end - self.start))

    @property
    def tangent(self) -> np.ndarray:
        return (self.end - self.start) / self.length

    @property
    def solid_normal(self) -> np.ndarray:
        """Outward normal of the solid on this side."""
        return self.normal if self.owner == "solid" else -self.normal

    def normal_field(self, x) -> np.ndarray:
        pts, single = as_points(x, 2)
        out = np.broadcast_to(self.normal, pts.shape).copy()
        return out[0] if single else out

    def contains(self, x, tol: float = 1e-12) -> np.ndarray:
        pts, single = as_points(x, 2)
        rel = pts - self.start
        s = rel @ self.tangent
        off = np.abs(rel @ self.normal)
        ok = (off <= tol) & (s >= -tol) & (s <= self.length + tol)
        return ok[0] if single else ok

    def check_point(self, x) -> np.ndarray:
        """Validate that ``x`` lies on the segment and away from its corners."""
        pts, _ = as_points(x, 2)
        if not np.all(self.contains(pts, tol=1e-9)):
            raise ValueError(f"point(s) not on segment {self.name}")
        dist = np.minimum(
            np.linalg.norm(pts - self.start, axis=1), np.linalg.norm(pts - self.end, axis=1)
        )
        if np.any(dist < self.corner_radius):
            bad = pts[np.argmin(dist)]
            raise CornerZoneError(
                f"point {bad.tolist()} is within {self.corner_radius} of a corner of {self.name}"
            )
        return pts

    def points(self, s) -> np.ndarray:
        """Points at arclength fractions ``s`` in [0, 1]."""
        s = np.asarray(s, dtype=float)
        return self.start + np.multiply.outer(s, self.end - self.start)


def _square_sides(h: float, prefix: str, owner: str, outward_sign: float) -> dict[str, Segment]:
    # counter-clockwise corners; normal = outward_sign * (outward normal of the square)
    corners = {
        "top": ((h, h), (-h, h), (0.0, 1.0)),
        "right": ((h, -h), (h, h), (1.0, 0.0)),
        "bottom": ((-h, -h), (h, -h), (0.0, -1.0)),
        "left": ((-h, h), (-h, -h), (-1.0, 0.0)),
    }
    out = {}
    for i, (start, end, n) in enumerate(corners.values(), start=1):
        out[f"{prefix}{i}"] = Segment(
            f"{prefix}{i}",
            np.array(start, dtype=float),
            np.array(end, dtype=float),
            outward_sign * np.array(n, dtype=float),
            owner,
        )
    return out


@dataclass(frozen=True)
class DomainSpec:
    """The two-square solid/fluid configuration."""

    inner: float = 1.0
    outer: float = 2.0
    segments: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not 0 < self.inner < self.outer:
            raise ValueError("need 0 < inner < outer")
        segs = {}
        segs.update(_square_sides(self.outer, "Gamma", "solid", 1.0))
        segs.update(_square_sides(self.inner, "Sigma", "fluid", 1.0))
        object.__setattr__(self, "segments", segs)

    @property
    def outer_segments(self) -> list[Segment]:
        return [self.segments[f"Gamma{i}"] for i in range(1, 5)]

    @property
    def interface_segments(self) -> list[Segment]:
        return [self.segments[f"Sigma{i}"] for i in range(1, 5)]

    def segment(self, name: str) -> Segment:
        try:
            return self.segments[name]
        except KeyError:
            raise ValueError(f"unknown segment {name!r}") from None

    def in_fluid(self, x) -> np.ndarray:
        pts, single = as_points(x, 2)
        ok = np.all(np.abs(pts) < self.inner, axis=1)
        return ok[0] if single else ok

    def in_solid(self, x) -> np.ndarray:
        pts, single = as_points(x, 2)
        m = np.max(np.abs(pts), axis=1)
        ok = (m > self.inner) & (m < self.outer)
        return ok[0] if single else ok

    @property
    def area(self) -> dict[str, float]:
        f = (2 * self.inner) ** 2
        return {"fluid": f, "solid": (2 * self.outer) ** 2 - f}


# -- quadrature -------------------------------------------------------------


@lru_cache(maxsize=None)
def gauss_legendre(npts: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes/weights on [-1, 1]."""
    if npts < 1:
        raise ValueError("need at least one Gauss point")
    x, w = np.polynomial.legendre.leggauss(npts)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def points_for_degree(degree: int) -> int:
    """Smallest Gauss rule exact for polynomials of the given degree."""
    return max(1, (degree + 2) // 2)


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    kind: str  # "volume" or "boundary-segment"
    degree: int

    def __post_init__(self):
        if np.any(self.weights <= 0):
            raise ValueError("quadrature weights must be positive")

    @property
    def measure(self) -> float:
        return float(np.sum(self.weights))

    def integrate(self, values) -> np.ndarray:
        v = np.asarray(values, dtype=float)
        wv = self.weights.reshape((-1,) + (1,) * (v.ndim - 1)) * v
        # contiguous last-axis reduction so numpy uses pairwise summation
        return np.ascontiguousarray(np.moveaxis(wv, 0, -1)).sum(axis=-1)


def interval_rule(a: float, b: float, cells: int, npts: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = gauss_legendre(npts)
    edges = np.linspace(a, b, cells + 1)
    h = np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + 0.5 * h[:, None] * x[None, :]).ravel()
    weights = (0.5 * h[:, None] * w[None, :]).ravel()
    return nodes, weights


def box_rule(lo, hi, cells: Sequence[int], npts: int) -> QuadratureRule:
    """Tensor-product per-cell Gauss rule on an axis-aligned box."""
    xs, wx = interval_rule(lo[0], hi[0], cells[0], npts)
    ys, wy = interval_rule(lo[1], hi[1], cells[1], npts)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    W = np.outer(wx, wy)
    return QuadratureRule(
        np.column_stack([X.ravel(), Y.ravel()]), W.ravel(), "volume", 2 * npts - 1
    )


def _merge(rules: Iterable[QuadratureRule]) -> QuadratureRule:
    rules = list(rules)
    return QuadratureRule(
        np.concatenate([r.nodes for r in rules]),
        np.concatenate([r.weights for r in rules]),
        rules[0].kind,
        min(r.degree for r in rules),
    )


def region_rule(
    region: str,
    domain: DomainSpec | None = None,
    cells_per_unit: int = DEFAULT_CELLS_PER_UNIT,
    npts: int = DEFAULT_GAUSS_POINTS,
) -> QuadratureRule:
    """Volume rule for ``"fluid"`` or ``"solid"``.

    The cell partition is aligned with the inner square, so the solid annulus
    is an exact union of four boxes and no cell is cut.
    """
    dom = domain or DomainSpec()
    a, b = dom.inner, dom.outer

    def n(length):
        return max(1, int(round(cells_per_unit * length)))

    if region == "fluid":
        return box_rule((-a, -a), (a, a), (n(2 * a), n(2 * a)), npts)
    if region == "solid":
        boxes = [
            ((-b, a), (b, b)),  # top strip
            ((-b, -b), (b, -a)),  # bottom strip
            ((-b, -a), (-a, a)),  # left block
            ((a, -a), (b, a)),  # right block
        ]
        return _merge(
            box_rule(lo, hi, (n(hi[0] - lo[0]), n(hi[1] - lo[1])), npts) for lo, hi in boxes
        )
    raise ValueError(f"unknown region {region!r}")


def segment_rule(seg: Segment, npts: int = 64, cells: int = 1) -> QuadratureRule:
    """Gauss rule along a segment; nodes are strictly interior."""
    s, w = interval_rule(0.0, 1.0, cells, npts)
    return QuadratureRule(seg.points(s), w * seg.length, "boundary-segment", 2 * npts - 1)


def integrate_volume(f: Callable | Field, region: str, rule: QuadratureRule | None = None, **kw):
    rule = rule or region_rule(region, **kw)
    return rule.integrate(f(rule.nodes))


def integrate_boundary(
    f: Callable, segs: Iterable[Segment], npts: int = 16, cells: int = 4
) -> np.ndarray:
    """Sum of segment integrals.  ``f`` may take ``(points, segment)`` or just points."""
    total = 0.0
    for seg in segs:
        rule = segment_rule(seg, npts, cells)
        try:
            vals = f(rule.nodes, seg)
        except TypeError:
            vals = f(rule.nodes)
        total = total + rule.integrate(vals)
    return total


# -- surface differential operators ----------------------------------------


def tangential_gradient(f: Field, x, seg: Segment) -> np.ndarray:
    """``grad f - (grad f . n) n`` at boundary points of ``seg``."""
    pts = seg.check_point(x)
    g = np.asarray(f.grad(pts))
    n = seg.normal
    out = g - np.multiply.outer(g @ n, n)
    return out[0] if np.ndim(x) == 1 else out


def tangential_divergence(w: Callable, x, normal: Callable, h: float = 1e-5) -> np.ndarray:
    """Surface divergence ``div w - (grad w n) . n`` using central differences.

    ``w`` is a vectorised extension of the tangential field and ``normal``
    returns the unit normal at each point.
    """
    pts, single = as_points(x, 2)
    d = pts.shape[1]
    J = np.empty((pts.shape[0], d, d))
    for k in range(d):
        e = np.zeros(d)
        e[k] = h
        J[:, :, k] = (w(pts + e) - w(pts - e)) / (2 * h)
    n = normal(pts)
    out = np.trace(J, axis1=1, axis2=2) - np.einsum("ni,nij,nj->n", n, J, n)
    return out[0] if single else out


def tangential_divergence_of_normal(seg, x) -> np.ndarray:
    """Surface divergence of the unit normal (``d - 1`` times the mean curvature)."""
    if isinstance(seg, Segment):
        seg.check_point(x)
    return tangential_divergence(seg.normal_extension, x, seg.normal_field)


# flat sides: the normal extends as a constant
Segment.normal_extension = Segment.normal_field


@dataclass(frozen=True)
class Disk:
    """Disk of radius ``R`` centred at the origin (smooth self-test geometry)."""

    R: float = 1.0

    def normal_field(self, x) -> np.ndarray:
        pts, single = as_points(x, 2)
        out = pts / np.linalg.norm(pts, axis=1, keepdims=True)
        return out[0] if single else out

    normal_extension = normal_field

    def boundary_points(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        return self.R * np.stack([np.cos(theta), np.sin(theta)], axis=-1)

    def boundary_rule(self, n: int = 128) -> QuadratureRule:
        # trapezoid rule: spectrally accurate for periodic integrands
        theta = 2 * np.pi * np.arange(n) / n
        return QuadratureRule(
            self.boundary_points(theta), np.full(n, 2 * np.pi * self.R / n), "boundary-segment", n - 1
        )

    def volume_rule(self, nr: int = 24, ntheta: int = 96) -> QuadratureRule:
        r, wr = interval_rule(0.0, self.R, 1, nr)
        theta = 2 * np.pi * np.arange(ntheta) / ntheta
        Rr, T = np.meshgrid(r, theta, indexing="ij")
        W = np.outer(wr * r, np.full(ntheta, 2 * np.pi / ntheta))
        nodes = np.column_stack([(Rr * np.cos(T)).ravel(), (Rr * np.sin(T)).ravel()])
        return QuadratureRule(nodes, W.ravel(), "volume", 2 * nr - 1)
