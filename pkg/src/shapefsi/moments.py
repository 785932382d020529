"""Moments of the randomly translated example fields.

The amplitude ``a`` is uniform on [-1, 1].  Because every perturbed field
depends on ``a`` only, exact moments reduce to 1-D integrals, evaluated by
64-point Gauss-Legendre (the reference), and are compared with Monte Carlo
estimates and with the shape-Taylor approximations
``E[v^eps] ~ v`` and ``Var[v^eps] ~ eps^2 E[(v')^2]``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .convergence import ConvergenceReport, check_eps_list
from .example import (
    EPS_MAX,
    PerturbationSample,
    exact_fields,
    shape_derivative_fields,
    shape_hessian_fields,
)
from .geometry import gauss_legendre

BLOCK_SIZE = 8192
ORACLE_ORDER = 64
SECOND_MOMENT = 1.0 / 3.0

# compact sets kept inside the perturbed domains for every eps <= 0.25
FLUID_K = ((-0.5, 0.5), (-0.5, 0.5))
SOLID_K = ((1.25, 1.75), (1.25, 1.75))
QUANTITIES = ("p", "u", "sigma")


@dataclass(frozen=True)
class AmplitudeDistribution:
    """Uniform amplitude on [-1, 1] with a counter-based stream per block of indices."""

    seed: int = 0
    block_size: int = BLOCK_SIZE

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    pdf = 0.5
    mean = 0.0
    second_moment = SECOND_MOMENT

    def block(self, k: int) -> np.ndarray:
        gen = np.random.Generator(np.random.Philox(key=[int(self.seed), int(k)]))
        return 2.0 * gen.random(self.block_size) - 1.0

    def sample(self, index: int) -> float:
        if index < 0:
            raise ValueError("index must be non-negative")
        k, j = divmod(int(index), self.block_size)
        return float(self.block(k)[j])

    def samples(self, n: int, workers: int = 1) -> np.ndarray:
        nblocks = -(-int(n) // self.block_size)
        if workers > 1 and nblocks > 1:
            with ThreadPoolExecutor(workers) as ex:
                blocks = list(ex.map(self.block, range(nblocks)))
        else:
            blocks = [self.block(k) for k in range(nblocks)]
        return np.concatenate(blocks)[:n] if blocks else np.empty(0)


def sample_amplitude(dist: AmplitudeDistribution, index: int) -> float:
    return dist.sample(index)


@dataclass(frozen=True)
class MomentEstimate:
    quantity: str
    point: tuple
    eps: float
    mean: np.ndarray
    variance: np.ndarray
    mean_stderr: np.ndarray
    variance_stderr: np.ndarray
    n: int
    method: str  # "monte-carlo" or "gauss-quadrature"

    def rows(self) -> list[dict]:
        """Flat rows: one per statistic and component."""
        out = []
        for stat, val, se in (("mean", self.mean, self.mean_stderr), ("variance", self.variance, self.variance_stderr)):
            v, s = np.ravel(val), np.ravel(se)
            for i in range(v.size):
                comp = "" if v.size == 1 else f"[{i}]"
                out.append(
                    {
                        "point_x": self.point[0],
                        "point_y": self.point[1],
                        "eps": self.eps,
                        "value": float(v[i]),
                        "stderr": float(s[i]),
                        "n": self.n,
                        "method": self.method,
                        "quantity": self.quantity + comp,
                        "statistic": stat,
                    }
                )
        return out


def _compact_set(quantity: str):
    if quantity == "p":
        return FLUID_K
    if quantity in ("u", "sigma"):
        return SOLID_K
    raise ValueError(f"unknown quantity {quantity!r}; choose from {QUANTITIES}")


def check_point(point, quantity: str) -> np.ndarray:
    x = np.asarray(point, dtype=float)
    K = _compact_set(quantity)
    if x.shape != (2,) or not all(lo <= xi <= hi for xi, (lo, hi) in zip(x, K)):
        raise ValueError(f"point {x.tolist()} outside the compact set {K} for {quantity}")
    return x


def perturbed_values(point, eps: float, a: np.ndarray, quantity: str = "p") -> np.ndarray:
    """``v^eps(point)`` for each amplitude in ``a``; shape ``(len(a),) + value_shape``."""
    x = check_point(point, quantity)
    if not 0 <= eps <= EPS_MAX:
        raise ValueError(f"eps must lie in [0, {EPS_MAX}]")
    u, p, sigma = exact_fields()
    f = {"p": p, "u": u, "sigma": sigma}[quantity]
    a = np.asarray(a, dtype=float)
    pts = x[None, :] - eps * a[:, None] * np.ones(2)
    return f(pts)


def _spread(dev: np.ndarray, quantity: str) -> np.ndarray:
    """Squared deviation: componentwise, or the Frobenius self-product for the stress."""
    sq = dev**2
    return sq.reshape(sq.shape[0], -1).sum(axis=1) if quantity == "sigma" else sq


def moment_oracle(point, eps: float, quantity: str = "p", order: int = ORACLE_ORDER) -> MomentEstimate:
    """Mean and variance by Gauss-Legendre in ``a`` with weight 1/2."""
    t, w = gauss_legendre(order)
    w = 0.5 * np.asarray(w)
    vals = perturbed_values(point, eps, t, quantity)
    mean = np.tensordot(w, vals, axes=(0, 0))
    var = np.tensordot(w, _spread(vals - mean, quantity), axes=(0, 0))
    zero = np.zeros_like(var)
    return MomentEstimate(
        quantity, tuple(map(float, point)), float(eps), mean, var, np.zeros_like(mean), zero, order, "gauss-quadrature"
    )


def moment_monte_carlo(
    point, eps: float, n: int, seed: int = 0, quantity: str = "p", workers: int = 1
) -> MomentEstimate:
    """Sample mean and unbiased variance with standard errors."""
    if n < 2:
        raise ValueError("need at least two samples")
    a = AmplitudeDistribution(seed).samples(n, workers)
    vals = perturbed_values(point, eps, a, quantity)
    mean = np.sum(vals, axis=0) / n
    z = _spread(vals - mean, quantity)
    var = np.sum(z, axis=0) / (n - 1)
    mean_se = np.sqrt(np.sum((vals - mean) ** 2, axis=0) / (n - 1) / n)
    if quantity == "sigma":
        mean_se = np.sqrt(var / n) * np.ones_like(mean)
    var_se = np.std(z, axis=0, ddof=1) / np.sqrt(n) * n / (n - 1)
    return MomentEstimate(quantity, tuple(map(float, point)), float(eps), mean, var, mean_se, var_se, n, "monte-carlo")


def taylor_moment_approximation(point, eps: float, quantity: str = "p"):
    """``(v(point), eps^2 E[a^2] (v'_1(point))^2)`` with ``v'_1`` the derivative for ``a = 1``."""
    x = check_point(point, quantity)
    u, p, sigma = exact_fields()
    du, ds, dp = shape_derivative_fields(None, PerturbationSample(0.0, 1.0))
    f, df = {"p": (p, dp), "u": (u, du), "sigma": (sigma, ds)}[quantity]
    d = df(x)
    sq = float(np.sum(d**2)) if quantity == "sigma" else d**2
    return f(x), eps**2 * SECOND_MOMENT * sq


def taylor_remainder(point, eps: float, a: float) -> float:
    """``|p^eps - p - eps p' - eps^2/2 p''|`` at one (point, a) pair."""
    x = check_point(point, "p")
    _, p, _ = exact_fields()
    s = PerturbationSample(0.0, a, a)
    _, _, dp = shape_derivative_fields(None, s)
    _, _, d2p = shape_hessian_fields(None, s)
    pe = perturbed_values(x, eps, np.array([a]), "p")[0]
    return abs(pe - p(x) - eps * dp(x) - 0.5 * eps**2 * d2p(x))


def remainder_pairs(n: int = 50, seed: int = 0) -> list[tuple[np.ndarray, float]]:
    rng = np.random.Generator(np.random.Philox(key=[int(seed), 2**32]))
    pts = rng.uniform(-0.5, 0.5, size=(n, 2))
    a = rng.uniform(-1.0, 1.0, size=n)
    return [(pts[i], float(a[i])) for i in range(n)]


TARGETS = {"mean": 1.9, "variance": 2.7, "taylor-remainder": 2.9}


def convergence_study(
    point,
    eps_list: Sequence[float],
    target: str = "mean",
    quantity: str = "p",
    n_pairs: int = 50,
    seed: int = 0,
    target_slope: float | None = None,
) -> ConvergenceReport:
    """Error against eps with a fitted log-log slope.

    ``mean``: ``|E[v^eps] - v|``; ``variance``: ``|Var[v^eps] - eps^2 E[(v')^2]|``
    (max over components); ``taylor-remainder``: sup over random (point, a)
    pairs of the second-order Taylor remainder of the pressure (``point`` is
    ignored).
    """
    eps = check_eps_list(eps_list, EPS_MAX)
    if target not in TARGETS:
        raise ValueError(f"unknown target {target!r}")
    errs = []
    for e in eps:
        if target == "taylor-remainder":
            errs.append(max(taylor_remainder(x, e, a) for x, a in remainder_pairs(n_pairs, seed)))
            continue
        orc = moment_oracle(point, e, quantity)
        m_approx, v_approx = taylor_moment_approximation(point, e, quantity)
        diff = orc.mean - m_approx if target == "mean" else orc.variance - v_approx
        errs.append(float(np.max(np.abs(diff))))
    tag = "p" if target == "taylor-remainder" else f"{quantity}@({point[0]:g},{point[1]:g})"
    return ConvergenceReport(
        f"convergence/{target}/{tag}", tuple(eps), tuple(errs), TARGETS[target] if target_slope is None else target_slope
    )


DEFAULT_FLUID_POINTS = ((0.0, 0.0), (0.3, 0.3), (-0.2, 0.1), (0.4, -0.3), (-0.45, -0.35))
DEFAULT_SOLID_POINTS = ((1.3, 1.4), (1.6, 1.35), (1.45, 1.7), (1.7, 1.7), (1.35, 1.3))
DEFAULT_EPS = (0.2, 0.1, 0.05, 0.025)
