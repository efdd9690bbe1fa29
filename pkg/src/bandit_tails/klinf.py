"""KL_inf: the smallest KL divergence from a law to any class member whose
mean reaches a threshold.

Finite-alphabet and bounded-support classes go through the one-dimensional
concave dual (compiled, see ``_kernels.dual_klinf``). The moment-bounded
class and the verification oracle solve the primal convex program on a
finite grid directly, which shares no code with the dual.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linprog, minimize

from . import _kernels as kern
from .dist import (
    BoundedSupport,
    FiniteAlphabet,
    FiniteDist,
    ModelClass,
    MomentBounded,
)
from .errors import InfeasibleQuery, InvalidQuery

__all__ = [
    "KlinfResult",
    "klinf",
    "klinf_finite",
    "klinf_bounded",
    "klinf_moment",
    "klinf_oracle",
    "DEFAULT_RESOLUTION",
]

DEFAULT_RESOLUTION = 101
_FEAS_TOL = 1e-9
# solver residue below this is dropped from the reported minimizer
_NOISE_MASS = 1e-13


@dataclass(frozen=True)
class KlinfResult:
    value: float
    dual_lambda: float | None = None
    minimizer: FiniteDist | None = None

    def to_dict(self) -> dict:
        return {
            "value": self.value if math.isfinite(self.value) else "inf",
            "dual_lambda": self.dual_lambda,
            "minimizer": self.minimizer.to_dict() if self.minimizer else None,
        }


def klinf(p: FiniteDist, x: float, cls: ModelClass, **kwargs) -> KlinfResult:
    """Dispatch on the reward class."""
    if isinstance(cls, FiniteAlphabet):
        return klinf_finite(p, x, cls)
    if isinstance(cls, BoundedSupport):
        return klinf_bounded(p, x, cls.a, cls.b)
    if isinstance(cls, MomentBounded):
        return klinf_moment(p, x, cls.B, cls.eps, **kwargs)
    raise TypeError(f"unknown reward class {cls!r}")


def klinf_finite(
    p: FiniteDist, x: float, alphabet: FiniteAlphabet | Sequence[float]
) -> KlinfResult:
    if not isinstance(alphabet, FiniteAlphabet):
        alphabet = FiniteAlphabet(tuple(alphabet))
    if not alphabet.admits(p):
        raise InvalidQuery(f"support {p.atoms} is not inside alphabet {alphabet.points}")
    return _dual_result(p, float(x), alphabet.upper)


def klinf_bounded(p: FiniteDist, x: float, a: float, b: float) -> KlinfResult:
    if not BoundedSupport(a, b).admits(p):
        raise InvalidQuery(f"support {p.atoms} is not inside [{a}, {b}]")
    return _dual_result(p, float(x), float(b))


def _dual_result(p: FiniteDist, x: float, upper: float) -> KlinfResult:
    if x <= p.mean:
        return KlinfResult(0.0, 0.0, p)
    value, lam = kern.dual_klinf(p.points, p.probs, 1.0, x, upper)
    if value == 0.0 and lam == 0.0:
        return KlinfResult(0.0, 0.0, p)
    if not math.isfinite(value):
        return KlinfResult(math.inf, None, None)
    return KlinfResult(float(value), float(lam), _primal_from_dual(p, x, lam, upper))


def _primal_from_dual(p: FiniteDist, x: float, lam: float, upper: float) -> FiniteDist:
    """Recover the optimal law: q_i = p_i / (1 - lam (x_i - x)), rest on ``upper``.

    The top mass is taken as the residual even when p charges ``upper``:
    near the dual endpoint its closed form is ill-conditioned, while the
    lower atoms are not.
    """
    masses: dict[float, float] = {}
    top_formula = 0.0
    for xi, pi in zip(p.support, p.weights):
        if pi <= 0:
            continue
        qi = pi / (1.0 - lam * (xi - x))
        if xi >= upper:
            top_formula = qi
        else:
            # subnormal p_i can underflow to 0; q must keep supp(p)
            masses[xi] = qi or pi
    rest = 1.0 - math.fsum(masses.values())
    if rest > 0:
        masses[upper] = rest
    elif top_formula > 0:
        masses[upper] = top_formula
    total = math.fsum(masses.values())
    return FiniteDist.from_mapping({k: v / total for k, v in masses.items()})


def klinf_moment(
    p: FiniteDist,
    x: float,
    B: float,
    eps: float,
    resolution: int = DEFAULT_RESOLUTION,
) -> KlinfResult:
    """KL_inf over ``E|X|^(1+eps) <= B``, on supp(p) plus a uniform grid.

    The grid spans ``[-B^(1/(1+eps)), B^(1/(1+eps))]``; no dual form is used.
    """
    cls = MomentBounded(B, eps)
    if not cls.admits(p):
        raise InvalidQuery(
            f"E|X|^{1 + eps:g} = {p.moment(1 + eps):.6g} exceeds B = {B:g}"
        )
    value, q = _solve_on_grid(p, float(x), cls, resolution)
    return KlinfResult(value, None, q)


def klinf_oracle(
    p: FiniteDist, x: float, cls: ModelClass, resolution: int = DEFAULT_RESOLUTION
) -> float:
    """Brute-force KL_inf: direct primal minimisation over a support grid.

    Finite alphabets use the alphabet itself, so the program is exact. The
    bounded class uses ``resolution`` evenly spaced points on [a, b] plus the
    atoms of ``p``.
    """
    if not cls.admits(p):
        raise InvalidQuery(f"{p!r} is not admissible for {cls.describe()}")
    return _solve_on_grid(p, float(x), cls, resolution)[0]


# --- primal grid program ----------------------------------------------------


def _grid(p: FiniteDist, cls: ModelClass, resolution: int) -> np.ndarray:
    if isinstance(cls, FiniteAlphabet):
        pts = np.asarray(cls.points)
    else:
        pts = np.linspace(cls.lower, cls.upper, int(resolution))
    return np.unique(np.concatenate([pts, np.asarray(p.atoms)]))


def _solve_on_grid(
    p: FiniteDist, x: float, cls: ModelClass, resolution: int
) -> tuple[float, FiniteDist | None]:
    if x <= p.mean:
        return 0.0, p
    grid = _grid(p, cls, resolution)
    moment = None
    if isinstance(cls, MomentBounded):
        moment = (np.abs(grid) ** (1.0 + cls.eps), cls.B)
        reach = _max_mean(grid, *moment)
        if x > reach + 1e-12:
            raise InfeasibleQuery(
                f"no grid law with E|X|^{1 + cls.eps:g} <= {cls.B:g} has mean >= {x:g}"
                f" (largest reachable mean {reach:.6g})"
            )
    top = grid[-1]
    if x > top:
        return math.inf, None
    if x == top:
        # Only the point mass at the top has mean >= top.
        return (0.0, p) if p.atoms == (top,) else (math.inf, None)

    pw = np.zeros(grid.size)
    for xi, wi in zip(p.support, p.weights):
        if wi > 0:
            pw[np.searchsorted(grid, xi)] += wi
    active = pw > 0
    const = float(np.sum(pw[active] * np.log(pw[active])))

    def objective(q):
        return const - float(np.sum(pw[active] * np.log(q[active])))

    def gradient(q):
        g = np.zeros_like(q)
        g[active] = -pw[active] / q[active]
        return g

    constraints = [
        {"type": "eq", "fun": lambda q: np.sum(q) - 1.0, "jac": lambda q: np.ones_like(q)},
        {"type": "ineq", "fun": lambda q: grid @ q - x, "jac": lambda q: grid.copy()},
    ]
    if moment is not None:
        h, B = moment
        constraints.append({"type": "ineq", "fun": lambda q: B - h @ q, "jac": lambda q: -h})
    bounds = [(1e-12, 1.0) if a else (0.0, 1.0) for a in active]

    best_val, best_q = math.inf, None
    for q0 in _starts(pw, grid, x, moment):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            res = minimize(
                objective,
                q0,
                jac=gradient,
                method="SLSQP",
                bounds=bounds,
                constraints=constraints,
                options={"ftol": 1e-15, "maxiter": 1000},
            )
        q = np.clip(res.x, 0.0, None)
        if abs(q.sum() - 1.0) > _FEAS_TOL or grid @ q < x - _FEAS_TOL:
            continue
        if moment is not None and moment[0] @ q > moment[1] + _FEAS_TOL:
            continue
        val = objective(np.maximum(q, 1e-300))
        if val < best_val:
            best_val, best_q = val, q
    if best_q is None:
        raise InfeasibleQuery(f"grid solver found no feasible law with mean >= {x:g}")
    keep = best_q > _NOISE_MASS
    minimizer = FiniteDist(tuple(grid[keep]), tuple(best_q[keep] / best_q[keep].sum()))
    return max(best_val, 0.0), minimizer


def _max_mean(grid: np.ndarray, h: np.ndarray, B: float) -> float:
    res = linprog(
        -grid,
        A_ub=h[None, :],
        b_ub=[B],
        A_eq=np.ones((1, grid.size)),
        b_eq=[1.0],
        bounds=[(0, None)] * grid.size,
        method="highs",
    )
    return float(-res.fun)


def _starts(pw, grid, x, moment, n_random: int = 3):
    """Multi-start points: a shifted copy of p, uniform, and Dirichlet draws."""
    n = grid.size
    top = int(np.argmax(grid))
    m = float(grid @ pw)
    theta = min(1.0, (x - m) / (grid[top] - m) + 1e-6)
    shifted = (1.0 - theta) * pw
    shifted[top] += theta
    yield 0.999 * shifted + 0.001 / n
    yield np.full(n, 1.0 / n)
    rng = np.random.default_rng(0)
    for _ in range(n_random):
        yield rng.dirichlet(np.ones(n))
