"""Monte Carlo episodes of the KL_inf-UCB rule and parallel batches of them.

Three engines produce identical decisions:

``binary``
    compiled, for instances whose arms all live on the same two points
    ``{lo, upper}`` (``upper`` being the class maximum);
``kernel``
    compiled, any finite-alphabet or bounded-support instance;
``reference``
    the plain Python policy loop, needed for the moment-bounded class.

``engine="auto"`` picks the fastest applicable one.
"""

from __future__ import annotations

import csv
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import IO

import numpy as np

from . import _kernels as kern
from .dist import BanditInstance, BoundedSupport, FiniteAlphabet, draw
from .errors import ConfigError, EpisodeError
from .policy import ExplorationSchedule, PolicyState, select_arm, update
from .rng import derive_seed, uniforms

__all__ = [
    "RunRecord",
    "BatchResult",
    "run_episode",
    "run_batch",
    "checkpoints",
    "available_workers",
    "ENGINES",
]

ENGINES = ("auto", "binary", "kernel", "reference")


@dataclass(frozen=True)
class RunRecord:
    rep_id: int
    seed: int
    T: int
    counts: tuple[int, ...]
    regret: float
    trajectory: tuple[tuple[int, tuple[int, ...]], ...] | None = None

    def __post_init__(self):
        if sum(self.counts) != self.T:
            raise ValueError(f"counts {self.counts} do not sum to T = {self.T}")


@dataclass
class BatchResult:
    instance: str
    schedule: str
    T: int
    records: list[RunRecord]
    wall_time: float = field(default=0.0, compare=False)

    @property
    def R(self) -> int:
        return len(self.records)

    @property
    def K(self) -> int:
        return len(self.records[0].counts)

    def counts(self) -> np.ndarray:
        """R x K matrix of final pull counts."""
        return np.array([r.counts for r in self.records], dtype=np.int64)

    def write_csv(self, fh: IO[str]) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rep_id", "seed", *(f"N_{k + 1}" for k in range(self.K)), "regret"])
        for r in self.records:
            w.writerow([r.rep_id, r.seed, *r.counts, repr(r.regret)])

    def write_trajectory_csv(self, fh: IO[str]) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rep_id", "t", "arm", "count"])
        for r in self.records:
            for t, counts in r.trajectory or ():
                for k, c in enumerate(counts):
                    w.writerow([r.rep_id, t, k + 1, c])

    @classmethod
    def read_csv(cls, fh: IO[str], instance: str = "", schedule: str = "") -> "BatchResult":
        rows = [line for line in fh if not line.startswith("#")]
        reader = csv.DictReader(rows)
        n_cols = [c for c in reader.fieldnames or () if c.startswith("N_")]
        records = []
        for row in reader:
            counts = tuple(int(row[c]) for c in n_cols)
            records.append(
                RunRecord(int(row["rep_id"]), int(row["seed"]), sum(counts), counts, float(row["regret"]))
            )
        if not records:
            raise ConfigError("batch CSV holds no records")
        return cls(instance, schedule, records[0].T, records)


def checkpoints(K: int, T: int) -> np.ndarray:
    """Rounds ceil(K * 1.5**j) inside [1, T], ascending and distinct."""
    out = []
    j = 0
    while True:
        t = math.ceil(K * 1.5**j)
        if t > T:
            break
        if not out or t != out[-1]:
            out.append(t)
        j += 1
    return np.array(out, dtype=np.int64)


# --- engine plans ---------------------------------------------------------------


@dataclass(frozen=True)
class _Plan:
    engine: str
    args: tuple = ()


def _plan(instance: BanditInstance, engine: str) -> _Plan:
    if engine not in ENGINES:
        raise ConfigError(f"unknown engine {engine!r}; choose from {ENGINES}")
    cls = instance.model_class
    compiled = isinstance(cls, (FiniteAlphabet, BoundedSupport))
    if engine == "reference" or (engine == "auto" and not compiled):
        return _Plan("reference")
    if not compiled:
        raise ConfigError(f"engine {engine!r} does not support class {cls.describe()}")
    upper = float(cls.upper)
    below = sorted({x for d in instance.arms for x in d.atoms if x < upper})
    if engine == "binary" or (engine == "auto" and len(below) <= 1):
        if len(below) > 1:
            raise ConfigError("binary engine needs every arm on the same two points")
        lo = below[0] if below else float(cls.lower)
        # inverse-CDF threshold: the cumulative weight of the lowest atom
        w_lo = np.array([d.cdf[0] if d.atoms[0] == lo else 0.0 for d in instance.arms])
        return _Plan("binary", (w_lo, lo, upper))
    pts = np.array(sorted({x for d in instance.arms for x in d.atoms} | {upper}))
    K = instance.K
    width = max(len(d.atoms) for d in instance.arms)
    cdf = np.ones((K, width))
    atom_idx = np.zeros((K, width), dtype=np.int64)
    n_atoms = np.zeros(K, dtype=np.int64)
    for a, d in enumerate(instance.arms):
        n_atoms[a] = len(d.atoms)
        cdf[a, : len(d.atoms)] = d.cdf
        atom_idx[a, : len(d.atoms)] = np.searchsorted(pts, d.atoms)
    return _Plan("kernel", (cdf, atom_idx, n_atoms, pts, upper, upper - pts[0]))


def _simulate(
    plan: _Plan,
    instance: BanditInstance,
    schedule: ExplorationSchedule,
    u: np.ndarray,
    cps: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    K = instance.K
    traj = np.zeros((cps.shape[0], K), dtype=np.int64)
    code, c1, c2 = schedule.kind_code, schedule.c1, schedule.c2
    if plan.engine == "binary":
        w_lo, lo, upper = plan.args
        N = kern.run_episode_binary(w_lo, lo, upper, code, c1, c2, u, cps, traj)
    elif plan.engine == "kernel":
        N = kern.run_episode(*plan.args, code, c1, c2, u, cps, traj)
    else:
        N = _reference_episode(instance, schedule, u, cps, traj)
    return N, traj


def _reference_episode(instance, schedule, u, cps, traj) -> np.ndarray:
    state = PolicyState.initial(instance.K, schedule, instance.model_class)
    cp = 0
    for t in range(u.shape[0]):
        a = select_arm(state)
        update(state, a, draw(instance.arms[a], u[t]))
        while cp < cps.shape[0] and cps[cp] == t + 1:
            traj[cp] = state.counts
            cp += 1
    return np.array(state.counts, dtype=np.int64)


def _record(instance, rep_id, seed, T, N, cps, traj, keep_trajectory) -> RunRecord:
    counts = tuple(int(n) for n in N)
    regret = math.fsum(g * n for g, n in zip(instance.gaps, counts))
    trajectory = None
    if keep_trajectory:
        trajectory = tuple((int(t), tuple(int(c) for c in row)) for t, row in zip(cps, traj))
    return RunRecord(rep_id, seed, T, counts, regret, trajectory)


# --- public API -------------------------------------------------------------------


def run_episode(
    instance: BanditInstance,
    schedule: ExplorationSchedule,
    T: int,
    seed: int,
    *,
    rep_id: int = 0,
    trajectory: bool = False,
    engine: str = "auto",
) -> RunRecord:
    """Play ``T`` rounds against ``instance``; one uniform per round from ``seed``."""
    if T < instance.K:
        raise ConfigError(f"horizon T = {T} is below the number of arms K = {instance.K}")
    plan = _plan(instance, engine)
    cps = checkpoints(instance.K, T) if trajectory else np.zeros(0, dtype=np.int64)
    N, traj = _simulate(plan, instance, schedule, uniforms(seed, T), cps)
    return _record(instance, rep_id, seed, T, N, cps, traj, trajectory)


def available_workers() -> int:
    env = os.environ.get("BANDIT_TAILS_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"BANDIT_TAILS_WORKERS must be an integer, got {env!r}") from None
    try:
        return max(1, len(os.sched_getaffinity(0)))
    except AttributeError:
        return max(1, os.cpu_count() or 1)


def _run_chunk(instance, schedule, T, base_seed, rep_ids, trajectory, engine) -> list[RunRecord]:
    plan = _plan(instance, engine)
    cps = checkpoints(instance.K, T) if trajectory else np.zeros(0, dtype=np.int64)
    out = []
    for r in rep_ids:
        seed = derive_seed(base_seed, r)
        try:
            N, traj = _simulate(plan, instance, schedule, uniforms(seed, T), cps)
            out.append(_record(instance, r, seed, T, N, cps, traj, trajectory))
        except Exception as exc:
            raise EpisodeError(r, exc) from exc
    return out


def _chunks(R: int, n_chunks: int) -> list[range]:
    n_chunks = max(1, min(R, n_chunks))
    bounds = np.linspace(0, R, n_chunks + 1).astype(int)
    return [range(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def run_batch(
    instance: BanditInstance,
    schedule: ExplorationSchedule,
    T: int,
    R: int,
    base_seed: int,
    workers: int | None = None,
    *,
    trajectory: bool = False,
    engine: str = "auto",
) -> BatchResult:
    """``R`` independent episodes; replication r uses ``derive_seed(base_seed, r)``.

    The result does not depend on ``workers``.
    """
    if R < 1:
        raise ConfigError(f"replication count must be positive, got {R}")
    if T < instance.K:
        raise ConfigError(f"horizon T = {T} is below the number of arms K = {instance.K}")
    _plan(instance, engine)
    workers = available_workers() if workers is None else max(1, int(workers))
    start = time.perf_counter()
    args = (instance, schedule, T, base_seed)
    if workers == 1:
        records = _run_chunk(*args, range(R), trajectory, engine)
    else:
        records = []
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_run_chunk, *args, chunk, trajectory, engine)
                for chunk in _chunks(R, 8 * workers)
            ]
            for fut in futures:
                records.extend(fut.result())
    records.sort(key=lambda r: r.rep_id)
    return BatchResult(
        instance=_describe_instance(instance),
        schedule=schedule.describe(),
        T=T,
        records=records,
        wall_time=time.perf_counter() - start,
    )


def _describe_instance(instance: BanditInstance) -> str:
    arms = "; ".join(repr(d) for d in instance.arms)
    return f"{instance.model_class.describe()} [{arms}]"
