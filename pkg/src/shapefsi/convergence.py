"""Log-log slope fitting for epsilon sweeps."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# errors below this are treated as exact (nothing left to converge)
ROUNDOFF_FLOOR = 1e-13


def fit_slope(eps, errors) -> tuple[float, float]:
    """Least-squares ``(slope, intercept)`` of ``log error`` against ``log eps``."""
    le = np.log(np.asarray(eps, dtype=float))
    lr = np.log(np.asarray(errors, dtype=float))
    slope, intercept = np.polyfit(le, lr, 1)
    return float(slope), float(intercept)


def pairwise_slopes(eps, errors) -> list[float]:
    le = np.log(np.asarray(eps, dtype=float))
    lr = np.log(np.asarray(errors, dtype=float))
    return [float(s) for s in np.diff(lr) / np.diff(le)]


def check_eps_list(eps_list, eps_max: float | None = None, min_len: int = 3) -> np.ndarray:
    eps = np.asarray(eps_list, dtype=float)
    if eps.ndim != 1 or eps.size < min_len:
        raise ValueError(f"need at least {min_len} epsilon values")
    if np.any(eps <= 0) or (eps_max is not None and np.any(eps > eps_max)):
        raise ValueError(f"epsilon values must lie in (0, {eps_max}]")
    if np.any(np.diff(eps) >= 0):
        raise ValueError("epsilon values must be strictly decreasing")
    return eps


@dataclass(frozen=True)
class ConvergenceReport:
    id: str
    eps_list: tuple
    error_list: tuple
    target_slope: float
    slope: float = field(init=False)
    intercept: float = field(init=False)
    pairwise: tuple = field(init=False)
    floor: float = ROUNDOFF_FLOOR

    def __post_init__(self):
        eps = np.asarray(self.eps_list, dtype=float)
        err = np.asarray(self.error_list, dtype=float)
        if eps.shape != err.shape:
            raise ValueError("eps_list and error_list differ in length")
        object.__setattr__(self, "eps_list", tuple(float(e) for e in eps))
        object.__setattr__(self, "error_list", tuple(float(e) for e in err))
        if np.all(err > 0):
            s, c = fit_slope(eps, err)
            pw = tuple(pairwise_slopes(eps, err))
        else:
            s, c, pw = float("nan"), float("nan"), ()
        object.__setattr__(self, "slope", s)
        object.__setattr__(self, "intercept", c)
        object.__setattr__(self, "pairwise", pw)

    @property
    def at_floor(self) -> bool:
        return max(self.error_list) <= self.floor

    @property
    def passed(self) -> bool:
        return self.at_floor or (np.isfinite(self.slope) and self.slope >= self.target_slope)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "eps": list(self.eps_list),
            "error": list(self.error_list),
            "slope": self.slope,
            "intercept": self.intercept,
            "pairwise_slopes": list(self.pairwise),
            "target_slope": self.target_slope,
            "pass": bool(self.passed),
        }
