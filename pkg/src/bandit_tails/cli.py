"""Command-line entry point ``bandit-tails``."""

from __future__ import annotations

import argparse
import datetime as dt
import io
import json
import math
import os
import sys
from pathlib import Path

from .assumptions import AssumptionReport, check_assumption1, check_assumption2
from .config import ExperimentConfig, config_hash, load_config
from .constants import (
    discrimination_ratio,
    lai_robbins_constant,
    theorem3_exponent,
)
from .dist import BanditInstance, FiniteDist, parse_class
from .errors import BanditTailsError, ConfigError, InsufficientData, ParseError, ValidationError
from .klinf import klinf
from .sim import BatchResult, available_workers, run_batch
from .tails import deviation_grid, tail_curve, tail_exponent

BATCH_CSV = "batch.csv"
TRAJECTORY_CSV = "trajectory.csv"


def _read_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path} is not valid JSON: {exc}") from None


def _workers(args, cfg: ExperimentConfig | None = None) -> int:
    if args.workers is not None:
        return args.workers
    if os.environ.get("BANDIT_TAILS_WORKERS"):
        return available_workers()
    return cfg.workers if cfg else 1


def _out_dir(args, cfg: ExperimentConfig | None = None) -> Path:
    out = Path(args.out or (cfg.out_dir if cfg else "results"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _header(digest: str, seed) -> str:
    created = dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")
    return f"# config_hash: {digest}\n# base_seed: {seed}\n# created: {created}\n"


def _provenance(digest: str, seed) -> dict:
    return {
        "config_hash": digest,
        "base_seed": seed,
        "created": dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds"),
    }


def _write_csv(path: Path, digest: str, seed, writer) -> None:
    buf = io.StringIO()
    writer(buf)
    path.write_text(_header(digest, seed) + buf.getvalue())


def _write_json(path: Path, data: dict) -> None:
    path.write_text(json.dumps(data, indent=2, allow_nan=False) + "\n")


def _finite(v: float):
    return v if math.isfinite(v) else ("inf" if v > 0 else "-inf")


# --- subcommands -------------------------------------------------------------------


def cmd_simulate(args) -> dict:
    cfg = load_config(args.config)
    out = _out_dir(args, cfg)
    batch = run_batch(cfg.instance, cfg.schedule, cfg.T, cfg.R, cfg.base_seed,
                      _workers(args, cfg), trajectory=cfg.trajectory, engine=cfg.engine)
    _write_csv(out / BATCH_CSV, cfg.hash, cfg.base_seed, batch.write_csv)
    files = [str(out / BATCH_CSV)]
    if cfg.trajectory:
        _write_csv(out / TRAJECTORY_CSV, cfg.hash, cfg.base_seed, batch.write_trajectory_csv)
        files.append(str(out / TRAJECTORY_CSV))
    return {"files": files, "R": batch.R, "T": batch.T, "wall_time": batch.wall_time}


def cmd_tail(args) -> dict:
    cfg = load_config(args.config)
    out = _out_dir(args, cfg)
    src = Path(args.batch) if args.batch else out / BATCH_CSV
    try:
        with src.open() as fh:
            batch = BatchResult.read_csv(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read batch results {src}: {exc}; run `simulate` first") from None
    if batch.K != cfg.instance.K:
        raise ConfigError(f"batch has {batch.K} arms, config instance has {cfg.instance.K}")
    grid = deviation_grid(cfg.T, cfg.gamma, cfg.m)
    files, summaries = [], []
    for rank in cfg.ranks:
        arm = cfg.instance.arm_of_rank(rank)
        curve = tail_curve(batch, arm, grid)
        csv_path = out / f"tail_rank{rank}.csv"
        _write_csv(csv_path, cfg.hash, cfg.base_seed, curve.write_csv)
        files.append(str(csv_path))
        try:
            est = tail_exponent(curve, cfg.min_exceedances)
        except InsufficientData as exc:
            summaries.append({"rank": rank, "arm": arm + 1, "error": str(exc)})
            continue
        summary = est.to_dict()
        json_path = out / f"exponent_rank{rank}.json"
        _write_json(json_path, {**summary, "rank": rank,
                                "provenance": _provenance(cfg.hash, cfg.base_seed)})
        files.append(str(json_path))
        summaries.append({**summary, "rank": rank})
    return {"files": files, "exponents": summaries}


def _constants_for(instance: BanditInstance, rank: int) -> dict:
    arm = instance.arm_of_rank(rank)
    mu = instance.means[arm]
    pairs = []
    for j in range(1, rank):
        nu = instance.arms[instance.arm_of_rank(j)]
        res = discrimination_ratio(nu, mu, instance.model_class)
        pairs.append({"better_rank": j, **res.to_dict()})
    theory = -sum(p["value"] if p["value"] != "inf" else math.inf for p in pairs)
    return {
        "rank": rank,
        "arm": arm + 1,
        "lai_robbins": lai_robbins_constant(instance, arm),
        "theory_exponent": _finite(theory),
        "per_pair_ratios": pairs,
        "theorem3_exponent": theorem3_exponent(rank),
    }


def cmd_constants(args) -> dict:
    if args.config:
        cfg = load_config(args.config)
        instance, ranks, digest, seed = cfg.instance, cfg.ranks, cfg.hash, cfg.base_seed
    elif args.instance:
        raw = _read_json(args.instance)
        instance = BanditInstance.from_dict(raw)
        ranks = (args.arm,) if args.arm else tuple(range(2, instance.K + 1))
        digest, seed = config_hash({"instance": raw, "ranks": list(ranks)}), None
        cfg = None
    else:
        raise ConfigError("constants needs --config or --instance")
    for r in ranks:
        if not 2 <= r <= instance.K:
            raise ValidationError([("arm", f"rank must lie in 2..{instance.K}, got {r}")])
    results = [_constants_for(instance, r) for r in ranks]
    out = _out_dir(args, cfg)
    files = []
    for res in results:
        path = out / f"constants_rank{res['rank']}.json"
        _write_json(path, {**res, "provenance": _provenance(digest, seed)})
        files.append(str(path))
    if len(results) == 1:
        return {**results[0], "files": files}
    return {"results": results, "files": files}


def cmd_check_assumptions(args) -> dict:
    d = FiniteDist.from_dict(_read_json(args.dist))
    model = parse_class(args.cls)
    report = AssumptionReport(d, model)
    settings = {
        "dist": d.to_dict(), "class": model.describe(), "which": args.which,
        "paths": args.paths, "n_max": args.n_max, "delta": args.delta,
        "g": [args.c1, args.c2], "seed": args.seed,
    }
    digest = config_hash(settings)
    workers = _workers(args)
    if args.which in ("1", "both"):
        report.assumption1 = check_assumption1(
            d, model, (args.c1, args.c2), args.n_max, args.paths,
            base_seed=args.seed, workers=workers,
        )
    if args.which in ("2", "both"):
        try:
            report.assumption2 = check_assumption2(
                d, model, args.delta, paths=args.paths, base_seed=args.seed, workers=workers
            )
        except InsufficientData as exc:
            report.notes.append(f"assumption 2: {exc}")
    out = _out_dir(args)
    data = {**report.to_dict(), "provenance": _provenance(digest, args.seed)}
    _write_json(out / "assumptions.json", data)
    _write_csv(out / "assumptions.csv", digest, args.seed, report.write_csv)
    return {**report.to_dict(), "files": [str(out / "assumptions.json"), str(out / "assumptions.csv")]}


def cmd_klinf(args) -> dict:
    d = FiniteDist.from_dict(_read_json(args.dist))
    model = parse_class(args.cls)
    return klinf(d, args.x, model).to_dict()


# --- parser --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bandit-tails", description="KL_inf-UCB tail experiments")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required: bool):
        sp.add_argument("--config", required=config_required, help="experiment config JSON")
        sp.add_argument("--out", help="output directory (overrides the config)")
        sp.add_argument("--workers", type=int, help="parallel workers (env BANDIT_TAILS_WORKERS)")

    sp = sub.add_parser("simulate", help="run a batch of episodes")
    common(sp, True)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("tail", help="tail curves and fitted exponents from a batch")
    common(sp, True)
    sp.add_argument("--batch", help="batch CSV (default: <out>/batch.csv)")
    sp.set_defaults(func=cmd_tail)

    sp = sub.add_parser("constants", help="theoretical constants for an instance")
    common(sp, False)
    sp.add_argument("--instance", help="instance JSON {arms, class}")
    sp.add_argument("--arm", type=int, help="rank of the arm (2 = second best)")
    sp.set_defaults(func=cmd_constants)

    sp = sub.add_parser("check-assumptions", help="Monte Carlo check of the class conditions")
    common(sp, False)
    sp.add_argument("--dist", required=True, help="distribution JSON {support, weights}")
    sp.add_argument("--class", dest="cls", required=True, help="class spec, e.g. finite:0,1")
    sp.add_argument("--which", choices=("1", "2", "both"), default="both")
    sp.add_argument("--paths", type=int, default=100_000)
    sp.add_argument("--n-max", type=int, default=500)
    sp.add_argument("--delta", type=float, default=0.2)
    sp.add_argument("--c1", type=float, default=1.0)
    sp.add_argument("--c2", type=float, default=1.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_check_assumptions)

    sp = sub.add_parser("klinf", help="evaluate KL_inf once")
    sp.add_argument("--dist", required=True, help="distribution JSON {support, weights}")
    sp.add_argument("--x", type=float, required=True)
    sp.add_argument("--class", dest="cls", required=True, help="class spec, e.g. bounded:0,1")
    sp.set_defaults(func=cmd_klinf)
    return p


def _error_payload(exc: BaseException) -> dict:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, ValidationError):
        payload["errors"] = [{"path": p, "message": m} for p, m in exc.errors]
    return payload


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        result = args.func(args)
    except (BanditTailsError, ValueError, OSError) as exc:
        print(json.dumps(_error_payload(exc)), file=sys.stderr)
        return 2 if isinstance(exc, (ParseError, ValidationError, ConfigError)) else 1
    print(json.dumps(result, indent=2, default=_finite))
    return 0


if __name__ == "__main__":
    sys.exit(main())
