"""Empirical tail probabilities P(N(T) > x) and their log-log slope."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import IO

import numpy as np
from scipy.stats import linregress
from statsmodels.regression.linear_model import WLS
from statsmodels.stats.proportion import proportion_confint
from statsmodels.tools import add_constant

from .errors import ConfigError, InsufficientData
from .sim import BatchResult

__all__ = [
    "DeviationGrid",
    "TailCurve",
    "ExponentEstimate",
    "deviation_grid",
    "tail_curve",
    "tail_exponent",
    "MIN_EXCEEDANCES",
]

MIN_EXCEEDANCES = 50
MIN_GRID_POINTS = 10


@dataclass(frozen=True)
class DeviationGrid:
    gamma: float
    T: int
    x: np.ndarray

    @property
    def lo(self) -> float:
        return float(self.x[0])

    @property
    def hi(self) -> float:
        return float(self.x[-1])


def deviation_grid(T: int, gamma: float, m: int = 40) -> DeviationGrid:
    """``m`` log-spaced points over [log(T)^(1+gamma), (1-gamma) T]."""
    if T < 3:
        raise ConfigError(f"T must be at least 3, got {T}")
    if not 0 < gamma < 1:
        raise ConfigError(f"gamma must lie in (0, 1), got {gamma}")
    if m < MIN_GRID_POINTS:
        raise ConfigError(f"grid needs at least {MIN_GRID_POINTS} points, got {m}")
    lo = math.log(T) ** (1 + gamma)
    hi = (1 - gamma) * T
    if not lo < hi:
        raise ConfigError(f"empty deviation window [{lo:.6g}, {hi:.6g}] for T={T}, gamma={gamma}")
    x = np.geomspace(lo, hi, m)
    x[0], x[-1] = lo, hi
    return DeviationGrid(gamma, T, x)


@dataclass(frozen=True)
class TailCurve:
    """Exceedance frequencies of one arm's final pull count over a grid.

    ``arm`` is a 0-based arm position.
    """

    arm: int
    x: np.ndarray
    p_hat: np.ndarray
    exceedances: np.ndarray
    R: int
    ci_lo: np.ndarray | None = None
    ci_hi: np.ndarray | None = None

    @classmethod
    def from_counts(cls, arm: int, x: np.ndarray, exceedances: np.ndarray, R: int) -> "TailCurve":
        exceedances = np.asarray(exceedances, dtype=np.int64)
        lo, hi = proportion_confint(exceedances, R, alpha=0.05, method="wilson")
        return cls(
            arm=arm,
            x=np.asarray(x, dtype=float),
            p_hat=exceedances / R,
            exceedances=exceedances,
            R=R,
            ci_lo=np.asarray(lo, dtype=float),
            ci_hi=np.asarray(hi, dtype=float),
        )

    def write_csv(self, fh: IO[str]) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "p_hat", "ci_lo", "ci_hi", "exceedances"])
        lo = self.ci_lo if self.ci_lo is not None else np.full(len(self.x), math.nan)
        hi = self.ci_hi if self.ci_hi is not None else np.full(len(self.x), math.nan)
        for row in zip(self.x, self.p_hat, lo, hi, self.exceedances):
            w.writerow([repr(float(v)) for v in row[:4]] + [int(row[4])])


def tail_curve(batch: BatchResult | np.ndarray, arm: int, grid: DeviationGrid | np.ndarray) -> TailCurve:
    """Fraction of episodes with N_arm(T) > x at each grid point, plus Wilson 95% intervals.

    ``batch`` may also be a plain R x K array of final counts.
    """
    counts = batch.counts() if isinstance(batch, BatchResult) else np.asarray(batch)
    if counts.ndim != 2 or counts.shape[0] == 0:
        raise ConfigError("need a nonempty R x K table of pull counts")
    if not 0 <= arm < counts.shape[1]:
        raise ConfigError(f"arm {arm} out of range for K = {counts.shape[1]}")
    x = grid.x if isinstance(grid, DeviationGrid) else np.asarray(grid, dtype=float)
    n = np.sort(counts[:, arm])
    R = n.shape[0]
    exceed = R - np.searchsorted(n, x, side="right")
    return TailCurve.from_counts(arm, x, exceed, R)


@dataclass(frozen=True)
class ExponentEstimate:
    arm: int
    slope: float
    stderr: float
    intercept: float
    x_lo: float
    x_hi: float
    n_points: int
    min_exceedances: int

    def to_dict(self) -> dict:
        """Summary with a 1-based arm label."""
        return {
            "arm": self.arm + 1,
            "slope": self.slope,
            "stderr": self.stderr,
            "x_lo": self.x_lo,
            "x_hi": self.x_hi,
            "n_points": self.n_points,
        }


def tail_exponent(
    curve: TailCurve, min_exceedances: int = MIN_EXCEEDANCES, weighted: bool = False
) -> ExponentEstimate:
    """Least-squares slope of log p_hat against log x over reliable points.

    A point is reliable when at least ``min_exceedances`` episodes exceed
    it. ``weighted=True`` weights each point by the inverse delta-method
    variance of log p_hat, ``R p / (1 - p)``.
    """
    keep = (curve.exceedances >= min_exceedances) & (curve.p_hat > 0)
    if keep.sum() < 3:
        raise InsufficientData(
            f"only {int(keep.sum())} grid points have >= {min_exceedances} exceedances; need 3"
        )
    lx = np.log(curve.x[keep])
    lp = np.log(curve.p_hat[keep])
    if weighted:
        p = curve.p_hat[keep]
        w = curve.R * p / np.maximum(1.0 - p, 1.0 / curve.R)
        fit = WLS(lp, add_constant(lx), weights=w).fit()
        intercept, slope = fit.params
        stderr = fit.bse[1]
    else:
        fit = linregress(lx, lp)
        slope, intercept, stderr = fit.slope, fit.intercept, fit.stderr
    return ExponentEstimate(
        arm=curve.arm,
        slope=float(slope),
        stderr=float(stderr),
        intercept=float(intercept),
        x_lo=float(curve.x[keep][0]),
        x_hi=float(curve.x[keep][-1]),
        n_points=int(keep.sum()),
        min_exceedances=min_exceedances,
    )
