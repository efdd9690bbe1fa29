"""KL_inf-UCB decision rule: exploration schedules, index inversion and arm
selection.

Arms are addressed by 0-based position. A round counter ``t`` counts
completed rounds, so the decision for round ``t + 1`` uses the schedule at
``max(t + 1, 3)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from . import _kernels as kern
from .dist import (
    BoundedSupport,
    EmpiricalDist,
    FiniteAlphabet,
    FiniteDist,
    ModelClass,
    MomentBounded,
)
from .errors import DomainError, InfeasibleQuery, ParseError

__all__ = [
    "FiniteSupportSchedule",
    "Theorem1Schedule",
    "ExplorationSchedule",
    "parse_schedule",
    "schedule_from_dict",
    "default_schedule",
    "threshold",
    "index",
    "PolicyState",
    "select_arm",
    "update",
    "argmax_first",
]


@dataclass(frozen=True)
class FiniteSupportSchedule:
    """f(t) = log t + log log t, shared by all arms."""

    kind_code = kern.SCHED_FINITE

    @property
    def c1(self) -> float:
        return 0.0

    @property
    def c2(self) -> float:
        return 0.0

    def describe(self) -> str:
        return "finite-support"

    def to_dict(self) -> dict:
        return {"type": "finite-support"}


@dataclass(frozen=True)
class Theorem1Schedule:
    """f_a(t) = log t + 2 log log t + C1 log(1 + N_a) + C2."""

    C1: float = 1.0
    C2: float = 1.0
    kind_code = kern.SCHED_THEOREM1

    def __post_init__(self):
        if not (self.C1 > 0 and self.C2 > 0 and math.isfinite(self.C1) and math.isfinite(self.C2)):
            raise DomainError(f"C1 and C2 must be positive and finite, got {self.C1}, {self.C2}")

    @property
    def c1(self) -> float:
        return float(self.C1)

    @property
    def c2(self) -> float:
        return float(self.C2)

    def describe(self) -> str:
        return f"theorem1:C1={self.C1:g},C2={self.C2:g}"

    def to_dict(self) -> dict:
        return {"type": "theorem1", "C1": self.C1, "C2": self.C2}


ExplorationSchedule = Union[FiniteSupportSchedule, Theorem1Schedule]


def parse_schedule(spec: str) -> ExplorationSchedule:
    """Parse ``"finite-support"`` or ``"theorem1:C1=<v>,C2=<v>"``."""
    spec = spec.strip()
    if spec == "finite-support":
        return FiniteSupportSchedule()
    kind, _, rest = spec.partition(":")
    if kind != "theorem1":
        raise ParseError(f"unknown schedule {spec!r}")
    try:
        kv = dict(item.split("=", 1) for item in rest.split(",") if item)
        params = {k.strip(): float(v) for k, v in kv.items()}
    except ValueError:
        raise ParseError(f"bad schedule parameters in {spec!r}") from None
    if set(params) != {"C1", "C2"}:
        raise ParseError(f"theorem1 schedule needs exactly C1 and C2, got {sorted(params)}")
    return Theorem1Schedule(params["C1"], params["C2"])


def schedule_from_dict(data: dict | str) -> ExplorationSchedule:
    if isinstance(data, str):
        return parse_schedule(data)
    kind = data.get("type")
    if kind == "finite-support":
        return FiniteSupportSchedule()
    if kind == "theorem1":
        return Theorem1Schedule(float(data["C1"]), float(data["C2"]))
    raise ParseError(f"unknown schedule type {kind!r}")


def default_schedule(cls: ModelClass) -> ExplorationSchedule:
    if isinstance(cls, FiniteAlphabet):
        return FiniteSupportSchedule()
    if isinstance(cls, MomentBounded):
        return Theorem1Schedule(2.0, 1.0)
    return Theorem1Schedule(1.0, 1.0)


def threshold(schedule: ExplorationSchedule, t: float, n: int) -> float:
    """Exploration level f at round ``t`` for an arm pulled ``n`` times."""
    if not t >= 3:
        raise DomainError(f"schedule needs t >= 3, got {t}")
    if n < 1:
        raise DomainError(f"schedule needs n >= 1, got {n}")
    return float(kern.schedule_value(schedule.kind_code, schedule.c1, schedule.c2, float(t), float(n)))


# --- index --------------------------------------------------------------------

_MOMENT_INDEX_TOL = 1e-7


def _as_arrays(emp: EmpiricalDist | FiniteDist) -> tuple[np.ndarray, np.ndarray, float]:
    if isinstance(emp, EmpiricalDist):
        if emp.n < 1:
            raise DomainError("index needs at least one observation")
        keys = sorted(emp.counts)
        return (
            np.array(keys, dtype=np.float64),
            np.array([emp.counts[k] for k in keys], dtype=np.float64),
            float(emp.n),
        )
    return emp.points, emp.probs, 1.0


def index(emp: EmpiricalDist | FiniteDist, budget: float, cls: ModelClass) -> float:
    """sup{x : KL_inf(emp, x) <= budget}, searched over [mean, class maximum]."""
    if budget < 0:
        raise DomainError(f"budget must be nonnegative, got {budget}")
    pts, w, tot = _as_arrays(emp)
    if isinstance(cls, (FiniteAlphabet, BoundedSupport)):
        return float(kern.index_value(pts, w, tot, float(budget), cls.upper))
    return _moment_index(FiniteDist(tuple(pts), tuple(w / tot)), float(budget), cls)


def _moment_index(p: FiniteDist, budget: float, cls: MomentBounded) -> float:
    from .klinf import klinf_moment

    def cost(x: float) -> float:
        try:
            return klinf_moment(p, x, cls.B, cls.eps).value
        except InfeasibleQuery:
            return math.inf

    lo, hi = p.mean, cls.upper
    if budget == 0 or lo >= hi:
        return lo
    if cost(hi) <= budget:
        return hi
    for _ in range(kern.INDEX_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if cost(mid) <= budget:
            lo = mid
        else:
            hi = mid
        if hi - lo < _MOMENT_INDEX_TOL:
            break
    return lo


# --- policy state -------------------------------------------------------------


@dataclass
class PolicyState:
    """Per-episode state of the rule; owned by a single episode."""

    model_class: ModelClass
    schedule: ExplorationSchedule
    emps: list[EmpiricalDist]
    t: int = 0

    @classmethod
    def initial(cls, K: int, schedule: ExplorationSchedule, model_class: ModelClass) -> "PolicyState":
        if K < 2:
            raise DomainError(f"need at least two arms, got {K}")
        return cls(model_class, schedule, [EmpiricalDist() for _ in range(K)])

    @property
    def K(self) -> int:
        return len(self.emps)

    @property
    def counts(self) -> list[int]:
        return [e.n for e in self.emps]

    def indices(self) -> list[float]:
        """Index of every arm for the upcoming round ``t + 1``."""
        tt = max(self.t + 1, 3)
        out = []
        for e in self.emps:
            budget = threshold(self.schedule, tt, e.n) / e.n
            out.append(index(e, budget, self.model_class))
        return out


def argmax_first(values: Sequence[float]) -> int:
    """Position of the largest value; the smallest position wins ties."""
    best = 0
    for k in range(1, len(values)):
        if values[k] > values[best]:
            best = k
    return best


def select_arm(state: PolicyState) -> int:
    if state.t < state.K:
        return state.t
    return argmax_first(state.indices())


def update(state: PolicyState, arm: int, reward: float) -> PolicyState:
    if not 0 <= arm < state.K:
        raise DomainError(f"arm {arm} out of range for K = {state.K}")
    state.emps[arm].record(reward)
    state.t += 1
    return state
