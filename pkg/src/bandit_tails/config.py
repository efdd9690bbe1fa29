"""Experiment configuration: JSON loading with exhaustive validation."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .dist import BanditInstance
from .errors import ParseError, ValidationError
from .policy import ExplorationSchedule, default_schedule, schedule_from_dict
from .sim import ENGINES, available_workers
from .tails import MIN_EXCEEDANCES, MIN_GRID_POINTS

__all__ = ["ExperimentConfig", "load_config", "parse_config", "config_hash", "canonical_json"]

_FIELDS = {
    "instance", "schedule", "T", "R", "base_seed", "gamma", "m", "ranks",
    "out_dir", "workers", "min_exceedances", "engine", "trajectory",
}
# fields that do not change any result and stay out of the provenance hash
_UNHASHED = {"out_dir", "workers"}


@dataclass(frozen=True)
class ExperimentConfig:
    instance: BanditInstance
    schedule: ExplorationSchedule
    T: int
    R: int
    base_seed: int
    gamma: float = 0.5
    m: int = 40
    ranks: tuple[int, ...] = ()
    out_dir: str = "results"
    workers: int = field(default_factory=available_workers)
    min_exceedances: int = MIN_EXCEEDANCES
    engine: str = "auto"
    trajectory: bool = False
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def hash(self) -> str:
        return config_hash(self.raw)


def canonical_json(data: Any) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def config_hash(raw: dict) -> str:
    kept = {k: v for k, v in raw.items() if k not in _UNHASHED}
    return hashlib.sha256(canonical_json(kept).encode()).hexdigest()


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read config {path}: {exc}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"config {path} is not valid JSON: {exc}") from None
    return parse_config(raw)


def _int(raw, key, errors, minimum=None, default=None):
    if key not in raw:
        if default is None:
            errors.append((key, "missing"))
        return default
    v = raw[key]
    if isinstance(v, bool) or not isinstance(v, int):
        errors.append((key, f"must be an integer, got {v!r}"))
        return default
    if minimum is not None and v < minimum:
        errors.append((key, f"must be >= {minimum}, got {v}"))
        return default
    return v


def parse_config(raw: dict) -> ExperimentConfig:
    """Validate a config mapping, reporting every problem at once."""
    if not isinstance(raw, dict):
        raise ParseError("config must be a JSON object")
    errors: list[tuple[str, str]] = [(k, "unknown field") for k in sorted(set(raw) - _FIELDS)]

    instance = None
    if "instance" not in raw:
        errors.append(("instance", "missing"))
    else:
        try:
            instance = BanditInstance.from_dict(raw["instance"])
        except ValidationError as exc:
            errors += [(f"instance.{p}" if p else "instance", m) for p, m in exc.errors]
        except ParseError as exc:
            errors.append(("instance", str(exc)))

    schedule = None
    if "schedule" in raw:
        try:
            schedule = schedule_from_dict(raw["schedule"])
        except (ParseError, ValueError, KeyError, TypeError) as exc:
            errors.append(("schedule", str(exc)))
    elif instance is not None:
        schedule = default_schedule(instance.model_class)

    K = instance.K if instance is not None else None
    T = _int(raw, "T", errors, minimum=1)
    if T is not None and K is not None and T < K:
        errors.append(("T", f"horizon {T} is below the number of arms {K}"))
    R = _int(raw, "R", errors, minimum=1)
    base_seed = _int(raw, "base_seed", errors, minimum=0)
    m = _int(raw, "m", errors, minimum=MIN_GRID_POINTS, default=40)
    min_exc = _int(raw, "min_exceedances", errors, minimum=1, default=MIN_EXCEEDANCES)
    workers = _int(raw, "workers", errors, minimum=1, default=available_workers())

    gamma = raw.get("gamma", 0.5)
    if isinstance(gamma, bool) or not isinstance(gamma, (int, float)) or not 0 < gamma < 1:
        errors.append(("gamma", f"γ ∈ (0,1) required, got {gamma!r}"))
        gamma = 0.5
    elif T is not None and T >= 3 and not math.log(T) ** (1 + gamma) < (1 - gamma) * T:
        errors.append(("gamma", f"deviation window is empty for T={T}, γ={gamma}"))

    ranks: tuple[int, ...] = ()
    if "ranks" in raw:
        rv = raw["ranks"]
        if not isinstance(rv, list) or not all(isinstance(r, int) and not isinstance(r, bool) for r in rv):
            errors.append(("ranks", "must be a list of integers"))
        else:
            for i, r in enumerate(rv):
                if K is not None and not 2 <= r <= K:
                    errors.append((f"ranks[{i}]", f"rank must lie in 2..{K}, got {r}"))
            ranks = tuple(rv)
    elif K is not None:
        ranks = tuple(range(2, K + 1))

    engine = raw.get("engine", "auto")
    if engine not in ENGINES:
        errors.append(("engine", f"must be one of {ENGINES}, got {engine!r}"))
    out_dir = raw.get("out_dir", "results")
    if not isinstance(out_dir, str):
        errors.append(("out_dir", "must be a string"))
    trajectory = raw.get("trajectory", False)
    if not isinstance(trajectory, bool):
        errors.append(("trajectory", "must be true or false"))

    if errors:
        raise ValidationError(errors)
    return ExperimentConfig(
        instance=instance,
        schedule=schedule,
        T=T,
        R=R,
        base_seed=base_seed,
        gamma=float(gamma),
        m=m,
        ranks=ranks,
        out_dir=out_dir,
        workers=workers,
        min_exceedances=min_exc,
        engine=engine,
        trajectory=trajectory,
        raw=raw,
    )
