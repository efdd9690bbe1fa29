"""Theoretical constants: Lai-Robbins constants, discrimination ratios and
tail exponents.

The discrimination ratio of a law ``nu`` at level ``mu`` is

    inf { KL(tilde, nu) / KL_inf(tilde, mu) : supp(tilde) in supp(nu), m(tilde) < mu }.

The objective is a quotient of convex functions, so it is searched globally
on a simplex grid and then polished locally. The open constraint is
replaced by ``m(tilde) <= mu - slack`` for a decreasing list of slacks; the
smallest slack gives the reported value and the others show the trend.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from . import _kernels as kern
from .dist import BanditInstance, FiniteDist, ModelClass, MomentBounded
from .errors import DegenerateInstance, DomainError, InvalidQuery
from .klinf import klinf, klinf_moment

__all__ = [
    "RatioResult",
    "DiscriminationReport",
    "lai_robbins_constant",
    "discrimination_ratio",
    "bernoulli_ratio",
    "tail_exponent_theory",
    "theorem3_exponent",
    "is_discrimination_equivalent",
    "SLACKS",
]

SLACKS = (1e-2, 1e-3, 1e-4)
GRID_RESOLUTION = 200
# grids larger than this are coarsened (alphabets beyond four points)
MAX_GRID_ROWS = 2_000_000
MOMENT_GRID_RESOLUTION = 20
MOMENT_KLINF_RESOLUTION = 41
REFINE_MIN_STEP = 1e-10
MOMENT_REFINE_MIN_STEP = 1e-4


@dataclass(frozen=True)
class RatioResult:
    value: float
    argmin: FiniteDist | None
    slack: float
    method: str
    trend: dict[float, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "value": _json_float(self.value),
            "argmin": self.argmin.to_dict() if self.argmin else None,
            "slack": self.slack,
            "method": self.method,
            "trend": {repr(k): _json_float(v) for k, v in self.trend.items()},
        }


def _json_float(v: float):
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def lai_robbins_constant(instance: BanditInstance, arm: int) -> float:
    """1 / KL_inf(nu_arm, mu*) under the instance's class; ``arm`` is a 0-based position."""
    value = klinf(instance.arms[arm], instance.best_mean, instance.model_class).value
    if value <= 0:
        raise DegenerateInstance(f"arm {arm} has KL_inf 0 against the best mean; it is not suboptimal")
    return 1.0 / value


# --- discrimination ratio -------------------------------------------------------


def _simplex_grid(s: int, res: int) -> np.ndarray:
    """All points of the simplex in R^s with coordinates in multiples of 1/res."""
    if s == 1:
        return np.ones((1, 1))
    bars = np.fromiter(
        (b for c in combinations(range(res + s - 1), s - 1) for b in c),
        dtype=np.int64,
    ).reshape(-1, s - 1)
    edges = np.hstack([np.full((bars.shape[0], 1), -1), bars, np.full((bars.shape[0], 1), res + s - 1)])
    return (np.diff(edges, axis=1) - 1).astype(np.float64) / res


def _grid_resolution(s: int, requested: int) -> int:
    res = requested
    while res > 1 and math.comb(res + s - 1, s - 1) > MAX_GRID_ROWS:
        res = int(res * 0.8)
    return res


class _Objective:
    """KL(tilde, nu) / KL_inf(tilde, mu) with tilde on the atoms of nu."""

    def __init__(self, nu: FiniteDist, mu: float, cls: ModelClass):
        self.pts = np.array(nu.atoms)
        self.target = np.array([nu.mass(x) for x in nu.atoms])
        self.mu = mu
        self.cls = cls
        self.compiled = not isinstance(cls, MomentBounded)
        self.upper = float(cls.upper)
        self.min_step = REFINE_MIN_STEP if self.compiled else MOMENT_REFINE_MIN_STEP

    def __call__(self, row: np.ndarray, slack: float) -> float:
        if self.compiled:
            return kern.ratio_value(row, self.pts, self.target, self.mu, self.upper, slack)
        if float(self.pts @ row) > self.mu - slack:
            return math.inf
        keep = row > 0
        num = float(np.sum(row[keep] * np.log(row[keep] / self.target[keep])))
        tilde = FiniteDist(tuple(self.pts[keep]), tuple(row[keep]))
        den = klinf_moment(
            tilde, self.mu, self.cls.B, self.cls.eps, resolution=MOMENT_KLINF_RESOLUTION
        ).value
        return num / den if den > 0 else math.inf

    def grid_values(self, grid: np.ndarray, slack: float) -> np.ndarray:
        if self.compiled:
            return kern.ratio_grid(grid, self.pts, self.target, self.mu, self.upper, slack)
        return np.array([self(row, slack) for row in grid])


def _refine(obj: _Objective, start: np.ndarray, value: float, slack: float, step: float):
    """Pairwise mass-transfer pattern search; never returns a worse point."""
    best, best_val = start.copy(), value
    s = best.shape[0]
    while step >= obj.min_step:
        improved = False
        for i in range(s):
            for j in range(s):
                if i == j or best[i] <= 0:
                    continue
                h = min(step, best[i])
                cand = best.copy()
                cand[i] -= h
                cand[j] += h
                v = obj(cand, slack)
                if v < best_val:
                    best, best_val, improved = cand, v, True
        if not improved:
            step *= 0.5
    return best, best_val


def discrimination_ratio(
    nu: FiniteDist,
    mu: float,
    cls: ModelClass,
    *,
    resolution: int | None = None,
    slacks: Sequence[float] = SLACKS,
) -> RatioResult:
    """Infimum of KL(tilde, nu) / KL_inf(tilde, mu) over laws below ``mu`` on supp(nu)."""
    if not mu < nu.mean:
        raise InvalidQuery(f"need mu < m(nu) = {nu.mean:g}, got {mu:g}")
    if not cls.admits(nu):
        raise InvalidQuery(f"{nu!r} is not admissible for {cls.describe()}")
    obj = _Objective(nu, float(mu), cls)
    s = obj.pts.shape[0]
    if resolution is None:
        resolution = GRID_RESOLUTION if obj.compiled else MOMENT_GRID_RESOLUTION
    res = _grid_resolution(s, resolution)
    grid = _simplex_grid(s, res)
    trend: dict[float, float] = {}
    result = None
    for slack in slacks:
        if obj.pts[0] > mu - slack:
            # every law on supp(nu) has mean above mu - slack
            trend[slack] = math.inf
            result = RatioResult(math.inf, None, slack, "grid", trend)
            continue
        values = obj.grid_values(grid, slack)
        k = int(np.argmin(values))
        grid_val = float(values[k])
        method = "grid"
        argmin = grid[k]
        if math.isfinite(grid_val):
            argmin, val = _refine(obj, grid[k], grid_val, slack, 1.0 / res)
            if val < grid_val:
                method = "refined"
        else:
            val = grid_val
        trend[slack] = val
        tilde = None
        if math.isfinite(val):
            keep = argmin > 0
            tilde = FiniteDist(tuple(obj.pts[keep]), tuple(argmin[keep] / argmin[keep].sum()))
        result = RatioResult(val, tilde, slack, method, trend)
    return result


def bernoulli_ratio(p: float, mu: float, slack: float = SLACKS[-1], n_grid: int = 20001) -> float:
    """The ratio for Ber(p) on {0, 1}: a one-dimensional search over Ber(r), r <= mu - slack.

    Uses the closed-form binary KL; dense grid, then a bounded scalar
    minimisation around the best grid point.
    """
    if not 0 <= mu < p <= 1:
        raise InvalidQuery(f"need 0 <= mu < p <= 1, got p={p}, mu={mu}")
    r_max = mu - slack
    if p >= 1.0 or r_max < 0:
        return math.inf

    def kl(a: float, b: float) -> float:
        out = 0.0
        if a > 0:
            out += a * math.log(a / b)
        if a < 1:
            out += (1 - a) * math.log((1 - a) / (1 - b))
        return out

    def ratio(r: float) -> float:
        return kl(r, p) / kl(r, mu)

    rs = np.linspace(0.0, r_max, n_grid)
    vals = np.array([ratio(r) for r in rs])
    k = int(np.argmin(vals))
    a, b = rs[max(k - 1, 0)], rs[min(k + 1, n_grid - 1)]
    best = float(vals[k])
    if b > a:
        res = minimize_scalar(ratio, bounds=(a, b), method="bounded", options={"xatol": 1e-12})
        if res.fun < best:
            best = float(res.fun)
    return best


def tail_exponent_theory(instance: BanditInstance, rank: int, **kwargs) -> float:
    """Theoretical slope for the ``rank``-th best arm: minus the sum of its ratios.

    ``rank`` is 1-based; each better arm j contributes
    ``discrimination_ratio(nu_j, mu_rank)``.
    """
    if rank < 2:
        raise DomainError(f"rank must be at least 2, got {rank}")
    mu = instance.means[instance.arm_of_rank(rank)]
    total = 0.0
    for j in range(1, rank):
        nu = instance.arms[instance.arm_of_rank(j)]
        total += discrimination_ratio(nu, mu, instance.model_class, **kwargs).value
    return -total


def theorem3_exponent(rank: int) -> float:
    """Class-generic slope bound -(rank - 1)."""
    if rank < 2:
        raise DomainError(f"rank must be at least 2, got {rank}")
    return -(rank - 1.0)


@dataclass(frozen=True)
class DiscriminationReport:
    values: list[float]
    results: list[RatioResult]
    tol: float
    equivalent: bool

    def to_dict(self) -> dict:
        return {
            "values": [_json_float(v) for v in self.values],
            "tol": self.tol,
            "equivalent": self.equivalent,
        }


def is_discrimination_equivalent(
    pairs: Sequence[tuple[FiniteDist, FiniteDist]], cls: ModelClass, tol: float = 1e-2, **kwargs
) -> DiscriminationReport:
    """Ratio for every pair (nu, nu') at level m(nu'); equivalent when all are within ``tol`` of 1."""
    if not pairs:
        warnings.warn("no pairs given; discrimination equivalence holds vacuously", stacklevel=2)
        return DiscriminationReport([], [], tol, True)
    results = []
    for nu, other in pairs:
        if not nu.mean > other.mean:
            raise InvalidQuery(f"pair needs m(nu) > m(nu'), got {nu.mean:g} <= {other.mean:g}")
        results.append(discrimination_ratio(nu, other.mean, cls, **kwargs))
    values = [r.value for r in results]
    ok = all(abs(v - 1.0) <= tol for v in values)
    return DiscriminationReport(values, results, tol, ok)
