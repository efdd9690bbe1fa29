"""Monte Carlo checks of the two concentration conditions a reward class must meet.

Condition 1 (uniform deviation): for i.i.d. samples from ``d`` with empirical
law ``emp_n``,

    P(exists n : n KL_inf(emp_n, m(d)) - g(n) >= x) <= exp(-x).

Condition 2 (lower deviation of KL_inf): for a level ``m(d) + delta``,

    P(KL_inf(emp_n, m + delta) <= KL_inf(d, m + delta) - dd) <= exp(-n c dd^2)

for some rate c > 0.

Each sample path owns the Philox stream ``derive_seed(base_seed, path)``, so
reports are reproducible and independent of the worker count.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import IO, Sequence

import numpy as np

from . import _kernels as kern
from .dist import BoundedSupport, FiniteAlphabet, FiniteDist, ModelClass, draw
from .errors import ConfigError, InfeasibleQuery, InsufficientData
from .klinf import klinf, klinf_oracle
from .rng import derive_seed, make_rng, uniforms

__all__ = [
    "Assumption1Report",
    "Assumption2Report",
    "AssumptionReport",
    "check_assumption1",
    "check_assumption2",
    "sanov_bound",
    "SAFETY_FACTOR",
]

SAFETY_FACTOR = 1.5
AUDIT_FRACTION = 0.01
AUDIT_CAP = 200
AUDIT_TOL = 1e-6
MIN_VIOLATIONS = 20


def sanov_bound(s: int, n: int, rate: float) -> float:
    """(n + 1)^s exp(-n rate)."""
    if s < 1 or n < 1 or rate < 0:
        raise ValueError(f"need s >= 1, n >= 1, rate >= 0; got {s}, {n}, {rate}")
    return math.exp(s * math.log(n + 1) - n * rate)


# --- shared path machinery ----------------------------------------------------------


@dataclass(frozen=True)
class _Law:
    pts: np.ndarray
    cdf: np.ndarray
    atom_idx: np.ndarray
    n_atoms: int
    upper: float

    @classmethod
    def of(cls, d: FiniteDist, model: ModelClass) -> "_Law":
        if not model.admits(d):
            raise ConfigError(f"{d!r} is not admissible for {model.describe()}")
        if not isinstance(model, (FiniteAlphabet, BoundedSupport)):
            raise ConfigError("path simulation needs a finite-alphabet or bounded-support class")
        pts = np.array(sorted(set(d.atoms) | {float(model.upper)}))
        return cls(
            pts=pts,
            cdf=np.asarray(d.cdf, dtype=float),
            atom_idx=np.searchsorted(pts, d.atoms).astype(np.int64),
            n_atoms=len(d.atoms),
            upper=float(model.upper),
        )


def _parallel(fn, args: tuple, paths: int, workers: int | None) -> np.ndarray:
    from .sim import _chunks, available_workers

    workers = available_workers() if workers is None else max(1, int(workers))
    if workers == 1:
        return fn(*args, range(paths))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, *args, chunk) for chunk in _chunks(paths, 8 * workers)]
        return np.concatenate([f.result() for f in futures])


def _empirical(d: FiniteDist, u: np.ndarray) -> FiniteDist:
    counts: dict[float, int] = {}
    for ui in u:
        y = draw(d, ui)
        counts[y] = counts.get(y, 0) + 1
    return FiniteDist.from_mapping({y: c / len(u) for y, c in counts.items()})


@dataclass(frozen=True)
class _Audit:
    checks: int
    max_abs_diff: float

    @property
    def ok(self) -> bool:
        return self.max_abs_diff <= AUDIT_TOL

    def to_dict(self) -> dict:
        return {"checks": self.checks, "max_abs_diff": self.max_abs_diff, "tol": AUDIT_TOL, "ok": self.ok}


def _audit(d, model, base_seed, paths, sizes, target, fast_value) -> _Audit:
    """Recompute a sample of fast KL_inf evaluations with the primal oracle."""
    total = paths * len(sizes)
    n_checks = min(AUDIT_CAP, max(1, math.ceil(AUDIT_FRACTION * total)))
    rng = make_rng(derive_seed(base_seed, 2**62))
    worst = 0.0
    for _ in range(n_checks):
        path = int(rng.integers(paths))
        n = int(sizes[int(rng.integers(len(sizes)))])
        emp = _empirical(d, uniforms(derive_seed(base_seed, path), n))
        fast = fast_value(emp)
        slow = klinf_oracle(emp, target, model)
        if math.isinf(fast) and math.isinf(slow):
            continue
        worst = max(worst, abs(fast - slow))
    return _Audit(n_checks, worst)


# --- condition 1 -----------------------------------------------------------------------


@dataclass(frozen=True)
class Assumption1Report:
    x: list[float]
    frequency: list[float]
    bound: list[float]
    g_params: tuple[float, float]
    n_max: int
    paths: int
    safety_factor: float
    audit: _Audit

    @property
    def verdict(self) -> bool:
        return all(f <= self.safety_factor * b for f, b in zip(self.frequency, self.bound))

    def rows(self) -> list[dict]:
        return [
            {"x": x, "frequency": f, "bound": b, "ok": f <= self.safety_factor * b}
            for x, f, b in zip(self.x, self.frequency, self.bound)
        ]

    def to_dict(self) -> dict:
        return {
            "g": {"C1": self.g_params[0], "C2": self.g_params[1]},
            "n_max": self.n_max,
            "paths": self.paths,
            "safety_factor": self.safety_factor,
            "table": self.rows(),
            "verdict": self.verdict,
            "audit": self.audit.to_dict(),
        }


def _running_max_chunk(law: _Law, target, c1, c2, n_max, base_seed, rep_ids) -> np.ndarray:
    out = np.empty(len(rep_ids))
    buf = np.empty(n_max)
    for i, r in enumerate(rep_ids):
        u = uniforms(derive_seed(base_seed, r), n_max)
        out[i] = kern.assumption1_path(
            u, law.cdf, law.atom_idx, law.n_atoms, law.pts, law.upper, target, c1, c2, buf
        )
    return out


def running_maxima(
    d: FiniteDist,
    model: ModelClass,
    g_params: tuple[float, float] = (1.0, 1.0),
    n_max: int = 500,
    paths: int = 1000,
    base_seed: int = 0,
    workers: int | None = None,
) -> np.ndarray:
    """M = max_{n <= n_max} [n KL_inf(emp_n, m(d)) - g(n)] for each path."""
    law = _Law.of(d, model)
    c1, c2 = map(float, g_params)
    return _parallel(_running_max_chunk, (law, d.mean, c1, c2, n_max, base_seed), paths, workers)


def check_assumption1(
    d: FiniteDist,
    model: ModelClass,
    g_params: tuple[float, float] = (1.0, 1.0),
    n_max: int = 500,
    paths: int = 100_000,
    x_grid: Sequence[float] = (1.0, 2.0, 3.0, 4.0),
    base_seed: int = 0,
    workers: int | None = None,
    safety_factor: float = SAFETY_FACTOR,
) -> Assumption1Report:
    if n_max < 10:
        raise ConfigError(f"n_max must be at least 10, got {n_max}")
    if paths < 1000:
        raise ConfigError(f"paths must be at least 1000, got {paths}")
    M = running_maxima(d, model, g_params, n_max, paths, base_seed, workers)
    xs = [float(x) for x in x_grid]
    freq = [float(np.mean(M >= x)) for x in xs]
    bound = [math.exp(-x) for x in xs]
    target = d.mean
    upper = float(model.upper)

    def fast(emp: FiniteDist) -> float:
        return kern.klinf_fast(emp.points, emp.probs, 1.0, target, upper)

    audit = _audit(d, model, base_seed, paths, np.arange(1, n_max + 1), target, fast)
    return Assumption1Report(xs, freq, bound, (float(g_params[0]), float(g_params[1])),
                             n_max, paths, safety_factor, audit)


# --- condition 2 -----------------------------------------------------------------------


@dataclass(frozen=True)
class Assumption2Report:
    delta: float
    reference: float
    cells: list[dict]
    c_hat: float | None
    c_envelope: float | None
    paths: int
    audit: _Audit
    min_violations: int = MIN_VIOLATIONS
    note: str = ""

    @property
    def verdict(self) -> bool:
        """True when the fitted rate is positive, or nothing violated at the tested scales."""
        return self.c_hat is None or self.c_hat > 0

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "klinf_reference": self.reference,
            "table": self.cells,
            "c_hat": self.c_hat,
            "c_envelope": self.c_envelope,
            "min_violations": self.min_violations,
            "paths": self.paths,
            "verdict": self.verdict,
            "note": self.note,
            "audit": self.audit.to_dict(),
        }


def _klinf_at_sizes_chunk(law: _Law, target, n_grid, base_seed, rep_ids) -> np.ndarray:
    out = np.empty((len(rep_ids), n_grid.shape[0]))
    n_max = int(n_grid[-1])
    for i, r in enumerate(rep_ids):
        u = uniforms(derive_seed(base_seed, r), n_max)
        kern.assumption2_path(u, law.cdf, law.atom_idx, law.n_atoms, law.pts, law.upper,
                              target, n_grid, out[i])
    return out


def check_assumption2(
    d: FiniteDist,
    model: ModelClass,
    delta: float,
    n_grid: Sequence[int] = (50, 100, 200),
    d_grid: Sequence[float] = (0.01, 0.02, 0.05),
    paths: int = 100_000,
    base_seed: int = 0,
    workers: int | None = None,
    min_violations: int = MIN_VIOLATIONS,
) -> Assumption2Report:
    """Violation frequencies per (n, dd) and a fitted exponential rate.

    The rate ``c_hat`` is the least-squares slope through the origin of
    ``-log P_hat`` against ``n dd^2`` over cells with at least
    ``min_violations`` violations. ``c_envelope`` is the largest c with
    ``P_hat <= exp(-n c dd^2)`` on those cells.
    """
    if not delta > 0:
        raise ConfigError(f"delta must be positive, got {delta}")
    if any(dd <= 0 for dd in d_grid):
        raise ConfigError("d_grid values must be positive")
    ns = np.array(sorted({int(n) for n in n_grid}), dtype=np.int64)
    if ns[0] < 1:
        raise ConfigError("sample sizes must be positive")
    law = _Law.of(d, model)
    target = d.mean + delta
    try:
        reference = klinf(d, target, model).value
    except InfeasibleQuery:
        reference = math.inf
    if not math.isfinite(reference):
        raise ConfigError(f"KL_inf(d, m + delta) is infinite at m + delta = {target:g}")
    K = _parallel(_klinf_at_sizes_chunk, (law, target, ns, base_seed), paths, workers)

    cells = []
    for j, n in enumerate(ns):
        for dd in sorted(d_grid):
            v = int(np.sum(K[:, j] <= reference - dd))
            cells.append({"n": int(n), "dd": float(dd), "violations": v, "frequency": v / paths})

    upper = float(model.upper)

    def fast(emp: FiniteDist) -> float:
        return kern.klinf_fast(emp.points, emp.probs, 1.0, target, upper)

    audit = _audit(d, model, base_seed, paths, ns, target, fast)
    used = [c for c in cells if c["violations"] >= min_violations]
    if not used:
        raise InsufficientData(
            f"no (n, dd) cell reached {min_violations} violations; the bound is trivially "
            "satisfied at the tested scales"
        )
    z = np.array([c["n"] * c["dd"] ** 2 for c in used])
    y = np.array([-math.log(c["frequency"]) for c in used])
    c_hat = float(z @ y / (z @ z))
    c_env = float(np.min(y / z))
    return Assumption2Report(delta, reference, cells, c_hat, c_env, paths, audit, min_violations)


# --- combined report -----------------------------------------------------------------


@dataclass
class AssumptionReport:
    distribution: FiniteDist
    model: ModelClass
    assumption1: Assumption1Report | None = None
    assumption2: Assumption2Report | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def verdict(self) -> bool:
        parts = [p.verdict for p in (self.assumption1, self.assumption2) if p is not None]
        return all(parts)

    def to_dict(self) -> dict:
        return {
            "distribution": self.distribution.to_dict(),
            "class": self.model.describe(),
            "assumption1": self.assumption1.to_dict() if self.assumption1 else None,
            "assumption2": self.assumption2.to_dict() if self.assumption2 else None,
            "notes": self.notes,
            "verdict": self.verdict,
        }

    def write_csv(self, fh: IO[str]) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["assumption", "x_or_n", "dd", "frequency", "bound", "violations"])
        if self.assumption1:
            for row in self.assumption1.rows():
                w.writerow([1, repr(row["x"]), "", repr(row["frequency"]), repr(row["bound"]), ""])
        if self.assumption2:
            for c in self.assumption2.cells:
                w.writerow([2, c["n"], repr(c["dd"]), repr(c["frequency"]), "", c["violations"]])
