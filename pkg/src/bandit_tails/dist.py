"""Finitely supported distributions, reward classes and bandit instances."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import ParseError, ValidationError

__all__ = [
    "FiniteDist",
    "FiniteAlphabet",
    "BoundedSupport",
    "MomentBounded",
    "ModelClass",
    "BanditInstance",
    "EmpiricalDist",
    "mean",
    "kl",
    "sample",
    "record",
    "parse_class",
    "class_from_dict",
]

WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class FiniteDist:
    """A probability distribution on finitely many real points.

    ``support`` must be strictly increasing. Weights summing to one within
    ``1e-12`` are renormalised; anything further off is rejected.
    """

    support: tuple[float, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        support = tuple(float(x) for x in self.support)
        weights = tuple(float(w) for w in self.weights)
        if not support:
            raise ValidationError([("support", "must be nonempty")])
        if len(support) != len(weights):
            raise ValidationError([("weights", "need one weight per support point")])
        if any(not math.isfinite(x) for x in support):
            raise ValidationError([("support", "points must be finite")])
        if any(b <= a for a, b in zip(support, support[1:])):
            raise ValidationError([("support", "must be strictly increasing")])
        if any(not (w >= 0.0) or not math.isfinite(w) for w in weights):
            raise ValidationError([("weights", "must be finite and nonnegative")])
        total = math.fsum(weights)
        if abs(total - 1.0) > WEIGHT_TOL:
            raise ValidationError([("weights", f"sum to {total!r}, not 1")])
        if total != 1.0:
            weights = tuple(w / total for w in weights)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def point(cls, x: float) -> "FiniteDist":
        return cls((x,), (1.0,))

    @classmethod
    def bernoulli(cls, p: float, low: float = 0.0, high: float = 1.0) -> "FiniteDist":
        """Two-point law putting mass ``p`` on ``high`` and ``1 - p`` on ``low``."""
        return cls((low, high), (1.0 - p, p))

    @classmethod
    def uniform(cls, points: Sequence[float]) -> "FiniteDist":
        pts = sorted(points)
        return cls(tuple(pts), tuple(1.0 / len(pts) for _ in pts))

    @classmethod
    def from_mapping(cls, masses: dict[float, float]) -> "FiniteDist":
        items = sorted((float(k), float(v)) for k, v in masses.items())
        return cls(tuple(k for k, _ in items), tuple(v for _, v in items))

    @classmethod
    def from_dict(cls, data: dict) -> "FiniteDist":
        """Parse the ``{"support": [...], "weights": [...]}`` literal."""
        if not isinstance(data, dict):
            raise ParseError("distribution literal must be an object")
        extra = set(data) - {"support", "weights"}
        if extra:
            raise ValidationError([(k, "unknown field") for k in sorted(extra)])
        try:
            return cls(tuple(data["support"]), tuple(data["weights"]))
        except KeyError as exc:
            raise ValidationError([(exc.args[0], "missing")]) from None
        except TypeError as exc:
            raise ValidationError([("", str(exc))]) from None

    def to_dict(self) -> dict:
        return {"support": list(self.support), "weights": list(self.weights)}

    @cached_property
    def points(self) -> np.ndarray:
        return np.asarray(self.support, dtype=np.float64)

    @cached_property
    def probs(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=np.float64)

    @cached_property
    def atoms(self) -> tuple[float, ...]:
        """Support points carrying positive mass."""
        return tuple(x for x, w in zip(self.support, self.weights) if w > 0.0)

    @cached_property
    def cdf(self) -> np.ndarray:
        mask = self.probs > 0.0
        return np.cumsum(self.probs[mask])

    @property
    def mean(self) -> float:
        return mean(self)

    def mass(self, x: float) -> float:
        for s, w in zip(self.support, self.weights):
            if s == x:
                return w
        return 0.0

    def moment(self, order: float) -> float:
        """``E|X|^order``."""
        return float(np.dot(self.probs, np.abs(self.points) ** order))

    def __repr__(self) -> str:
        body = ", ".join(f"{x:g}: {w:.6g}" for x, w in zip(self.support, self.weights))
        return f"FiniteDist({{{body}}})"


# --- reward classes -------------------------------------------------------


@dataclass(frozen=True)
class FiniteAlphabet:
    """Distributions supported on a known finite set of points."""

    points: tuple[float, ...]

    def __post_init__(self):
        pts = tuple(float(x) for x in self.points)
        errors = []
        if len(pts) < 2:
            errors.append(("points", "need at least two points"))
        if any(not math.isfinite(x) for x in pts):
            errors.append(("points", "points must be finite"))
        if any(b <= a for a, b in zip(pts, pts[1:])):
            errors.append(("points", "must be strictly increasing"))
        if errors:
            raise ValidationError(errors)
        object.__setattr__(self, "points", pts)

    @property
    def lower(self) -> float:
        return self.points[0]

    @property
    def upper(self) -> float:
        return self.points[-1]

    def admits(self, d: FiniteDist) -> bool:
        allowed = set(self.points)
        return all(x in allowed for x in d.atoms)

    def describe(self) -> str:
        return "finite:" + ",".join(_fmt(x) for x in self.points)

    def to_dict(self) -> dict:
        return {"type": "finite", "points": list(self.points)}


@dataclass(frozen=True)
class BoundedSupport:
    """Distributions supported in ``[a, b]``."""

    a: float
    b: float

    def __post_init__(self):
        a, b = float(self.a), float(self.b)
        if not (math.isfinite(a) and math.isfinite(b)) or not a < b:
            raise ValidationError([("b", "bounded support needs finite a < b")])
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def lower(self) -> float:
        return self.a

    @property
    def upper(self) -> float:
        return self.b

    def admits(self, d: FiniteDist) -> bool:
        return all(self.a <= x <= self.b for x in d.atoms)

    def describe(self) -> str:
        return f"bounded:{_fmt(self.a)},{_fmt(self.b)}"

    def to_dict(self) -> dict:
        return {"type": "bounded", "a": self.a, "b": self.b}


@dataclass(frozen=True)
class MomentBounded:
    """Distributions with ``E|X|^(1+eps) <= B``."""

    B: float
    eps: float

    def __post_init__(self):
        errors = []
        if not (float(self.B) > 0 and math.isfinite(self.B)):
            errors.append(("B", "must be positive"))
        if not (float(self.eps) > 0 and math.isfinite(self.eps)):
            errors.append(("eps", "must be positive"))
        if errors:
            raise ValidationError(errors)
        object.__setattr__(self, "B", float(self.B))
        object.__setattr__(self, "eps", float(self.eps))

    @property
    def radius(self) -> float:
        """Largest |x| a class member can put all its mass on."""
        return self.B ** (1.0 / (1.0 + self.eps))

    @property
    def lower(self) -> float:
        return -self.radius

    @property
    def upper(self) -> float:
        # Lyapunov: |m(q)| <= (E|X|^(1+eps))^(1/(1+eps)) <= radius.
        return self.radius

    def admits(self, d: FiniteDist) -> bool:
        return d.moment(1.0 + self.eps) <= self.B * (1.0 + 1e-12)

    def describe(self) -> str:
        return f"moment:B={_fmt(self.B)},eps={_fmt(self.eps)}"

    def to_dict(self) -> dict:
        return {"type": "moment", "B": self.B, "eps": self.eps}


ModelClass = Union[FiniteAlphabet, BoundedSupport, MomentBounded]


def _fmt(x: float) -> str:
    return repr(float(x)) if not float(x).is_integer() else str(int(x))


def parse_class(spec: str) -> ModelClass:
    """Parse ``finite:x1,x2,...``, ``bounded:a,b`` or ``moment:B=..,eps=..``."""
    kind, _, rest = spec.strip().partition(":")
    kind = kind.strip().lower()
    try:
        if kind == "finite":
            return FiniteAlphabet(tuple(float(v) for v in rest.split(",")))
        if kind == "bounded":
            a, b = (float(v) for v in rest.split(","))
            return BoundedSupport(a, b)
        if kind == "moment":
            kv = dict(part.split("=", 1) for part in rest.split(","))
            kv = {k.strip().lower(): float(v) for k, v in kv.items()}
            if set(kv) != {"b", "eps"}:
                raise ParseError(f"moment class needs B and eps, got {sorted(kv)}")
            return MomentBounded(kv["b"], kv["eps"])
    except ValueError as exc:
        if isinstance(exc, (ParseError, ValidationError)):
            raise
        raise ParseError(f"bad class spec {spec!r}: {exc}") from None
    raise ParseError(f"unknown class kind {kind!r} in {spec!r}")


def class_from_dict(data: dict | str) -> ModelClass:
    if isinstance(data, str):
        return parse_class(data)
    if not isinstance(data, dict) or "type" not in data:
        raise ValidationError([("type", "class needs a 'type' field")])
    kind = data["type"]
    fields = {
        "finite": {"points"},
        "bounded": {"a", "b"},
        "moment": {"B", "eps"},
    }.get(kind)
    if fields is None:
        raise ValidationError([("type", f"unknown class type {kind!r}")])
    errors = [(k, "unknown field") for k in sorted(set(data) - fields - {"type"})]
    errors += [(k, "missing") for k in sorted(fields - set(data))]
    if errors:
        raise ValidationError(errors)
    if kind == "finite":
        return FiniteAlphabet(tuple(data["points"]))
    if kind == "bounded":
        return BoundedSupport(data["a"], data["b"])
    return MomentBounded(data["B"], data["eps"])


# --- instances ------------------------------------------------------------


@dataclass(frozen=True)
class BanditInstance:
    arms: tuple[FiniteDist, ...]
    model_class: ModelClass

    def __post_init__(self):
        arms = tuple(self.arms)
        object.__setattr__(self, "arms", arms)
        errors = []
        if len(arms) < 2:
            errors.append(("arms", "need at least two arms"))
        for i, d in enumerate(arms):
            if not self.model_class.admits(d):
                errors.append(
                    (f"arms[{i}]", f"not admissible for class {self.model_class.describe()}")
                )
        means = [d.mean for d in arms]
        for i in range(len(means)):
            for j in range(i):
                if means[i] == means[j]:
                    errors.append((f"arms[{i}]", f"mean ties with arms[{j}] ({means[i]:g})"))
        if errors:
            raise ValidationError(errors)

    @property
    def K(self) -> int:
        return len(self.arms)

    @cached_property
    def means(self) -> tuple[float, ...]:
        return tuple(d.mean for d in self.arms)

    @property
    def best_mean(self) -> float:
        return max(self.means)

    @cached_property
    def gaps(self) -> tuple[float, ...]:
        best = self.best_mean
        return tuple(best - m for m in self.means)

    @cached_property
    def ranking(self) -> tuple[int, ...]:
        """Arm positions ordered from best to worst mean."""
        return tuple(sorted(range(self.K), key=lambda a: -self.means[a]))

    def arm_of_rank(self, rank: int) -> int:
        """Position of the ``rank``-th best arm (``rank`` is 1-based)."""
        if not 1 <= rank <= self.K:
            raise ValidationError([("rank", f"must lie in 1..{self.K}")])
        return self.ranking[rank - 1]

    def rank_of_arm(self, arm: int) -> int:
        return self.ranking.index(arm) + 1

    @classmethod
    def from_dict(cls, data: dict) -> "BanditInstance":
        if not isinstance(data, dict):
            raise ParseError("instance must be an object")
        errors = [(k, "unknown field") for k in sorted(set(data) - {"arms", "class"})]
        arms = []
        for i, raw in enumerate(data.get("arms", [])):
            try:
                arms.append(FiniteDist.from_dict(raw))
            except (ValidationError, ParseError) as exc:
                sub = exc.errors if isinstance(exc, ValidationError) else [("", str(exc))]
                errors += [(f"arms[{i}]" + (f".{p}" if p else ""), m) for p, m in sub]
        if "arms" not in data:
            errors.append(("arms", "missing"))
        cls_obj = None
        if "class" not in data:
            errors.append(("class", "missing"))
        else:
            try:
                cls_obj = class_from_dict(data["class"])
            except (ValidationError, ParseError) as exc:
                sub = exc.errors if isinstance(exc, ValidationError) else [("", str(exc))]
                errors += [("class" + (f".{p}" if p else ""), m) for p, m in sub]
        if errors:
            raise ValidationError(errors)
        return cls(tuple(arms), cls_obj)

    def to_dict(self) -> dict:
        return {
            "arms": [d.to_dict() for d in self.arms],
            "class": self.model_class.to_dict(),
        }


# --- empirical distributions ----------------------------------------------


@dataclass
class EmpiricalDist:
    """Running counts of observed rewards. Owned by a single episode."""

    counts: Counter = field(default_factory=Counter)
    n: int = 0

    def record(self, y: float) -> "EmpiricalDist":
        self.counts[float(y)] += 1
        self.n += 1
        return self

    def to_dist(self) -> FiniteDist:
        if self.n < 1:
            raise ValidationError([("n", "empty empirical distribution")])
        return FiniteDist.from_mapping({x: c / self.n for x, c in self.counts.items()})

    @property
    def mean(self) -> float:
        return math.fsum(x * c for x, c in self.counts.items()) / self.n

    @classmethod
    def of(cls, values: Iterable[float]) -> "EmpiricalDist":
        e = cls()
        for y in values:
            e.record(y)
        return e


# --- operations -----------------------------------------------------------


def mean(d: FiniteDist) -> float:
    return math.fsum(w * x for x, w in zip(d.support, d.weights))


def kl(p: FiniteDist, q: FiniteDist) -> float:
    """KL(p, q); ``inf`` when p charges a point q does not."""
    total = 0.0
    for x, w in zip(p.support, p.weights):
        if w <= 0.0:
            continue
        qx = q.mass(x)
        if qx <= 0.0:
            return math.inf
        total += w * math.log(w / qx)
    return max(total, 0.0)


def sample(d: FiniteDist, rng: np.random.Generator) -> float:
    """Inverse-CDF draw; consumes exactly one uniform from ``rng``."""
    return draw(d, rng.random())


def draw(d: FiniteDist, u: float) -> float:
    atoms = d.atoms
    j = int(np.searchsorted(d.cdf, u, side="right"))
    return atoms[min(j, len(atoms) - 1)]


def record(e: EmpiricalDist, y: float) -> EmpiricalDist:
    return e.record(y)
