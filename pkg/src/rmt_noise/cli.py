"""Command-line entry points.

One binary, subcommand style.  Long-running studies read a JSON config file
(the config overrides flags), split into per-(size, trial-range) batches,
and persist each batch as an immutable chunk under the output directory, so
interrupted runs resume with --resume and finished runs rerun idempotently.
The master seed is mandatory; there is no wall-clock default anywhere.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import FIRST_COMPLETED, ProcessPoolExecutor, wait
from pathlib import Path

from ._pairs import pair_count
from .ensemble import EnsembleSpec, EntryLaw, sample_er, sample_sparse, write_matrix
from .errors import ResumeMismatchError, RmtNoiseError, ValidationError
from .experiments.analysis import (
    best_exponent,
    gap_fit,
    gaps_from_records,
    overlap_curves,
    scaling_collapse,
    sticking_medians,
    variance_fit,
    variance_samples_from_records,
)
from .experiments.chatterjee import chatterjee_trial, report_from_records, slot_statistic
from .experiments.config import SweepConfig, config_from_dict
from .experiments.records import (
    collapse_csv,
    header_obj,
    read_records,
    records_to_lines,
    trial_summary_csv,
)
from .experiments.sweeps import drift_trial, gap_trial, trial_records, variance_trial
from .manifest import create_or_resume, write_if_changed
from .rng import (
    EXP_ER,
    EXP_GENERATE,
    EXP_OTHER_INDEX,
    EXP_SWEEP,
    EXP_VARIANCE,
    ROLE_BASE,
    ROLE_MISC,
    seed_label,
    substream,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VALIDATION = 2
EXIT_RESUME = 3

_DEFAULT_EXPONENTS = (1.5, 5.0 / 3.0, 11.0 / 6.0)

_KINDS = {
    "sweep": "trial-records",
    "er": "trial-records",
    "variance": "variance-records",
    "gaps": "gap-records",
    "resolvent": "drift-records",
    "chatterjee": "chatterjee-records",
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ResumeMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESUME
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except RmtNoiseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rmt-noise",
        description="Noise sensitivity experiments for sparse random matrices.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="draw one matrix and write it to a file")
    gen.add_argument("--n", type=int, required=True, help="matrix size")
    gen.add_argument("--q", type=float, default=None, help="sparsity parameter (default n^(1/3))")
    gen.add_argument("--model", default="centered-sparse",
                     choices=("centered-sparse", "er-adjacency"))
    gen.add_argument("--law", default="rademacher",
                     choices=("rademacher", "gaussian", "uniform-symmetric"))
    gen.add_argument("--name", default=None, help="output file name inside --out")
    _common_flags(gen)
    gen.set_defaults(func=cmd_generate)

    for name, help_text in (
        ("sweep", "coupled overlap sweep of the centered model"),
        ("er", "adjacency-model sweep with sticking residuals"),
        ("variance", "variance of the centered top eigenvalue across sizes"),
        ("gaps", "top spectral gap statistics across sizes"),
        ("resolvent", "resolvent drift under partial resampling"),
        ("chatterjee", "interpolation bound estimates for the top eigenvalue"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True, help="JSON config file")
        _common_flags(cmd)
        cmd.set_defaults(func=cmd_run, command=name)

    col = sub.add_parser("collapse", help="scaling collapse of stored sweep records")
    col.add_argument("--records", required=True, help="trial-records JSONL file")
    col.add_argument("--exponents", type=float, nargs="+", default=list(_DEFAULT_EXPONENTS))
    _common_flags(col)
    col.set_defaults(func=cmd_collapse)
    return parser


def _common_flags(cmd: argparse.ArgumentParser) -> None:
    cmd.add_argument("--seed", type=int, default=None, help="master seed (u64, mandatory)")
    cmd.add_argument("--out", default=None, help="output directory (or env RMT_NOISE_OUT)")
    cmd.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    cmd.add_argument("--dense-cap", type=int, default=4096,
                     help="largest size handled by dense eigensolvers")
    cmd.add_argument("--resume", action="store_true",
                     help="continue a partial run in the output directory")


def _out_dir(args) -> Path:
    out = args.out or os.environ.get("RMT_NOISE_OUT")
    if not out:
        raise ValidationError("no output directory: pass --out or set RMT_NOISE_OUT")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_config(args) -> SweepConfig:
    with open(args.config, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config file {args.config}: not valid JSON ({exc})") from None
    if not isinstance(obj, dict):
        raise ValidationError(f"config file {args.config}: expected a JSON object")
    if "master_seed" not in obj:
        if args.seed is None:
            raise ValidationError(
                "master seed required: pass --seed or set master_seed in the config"
            )
        obj["master_seed"] = args.seed
    return config_from_dict(obj)


def cmd_generate(args) -> int:
    if args.seed is None:
        raise ValidationError("master seed required: pass --seed")
    out = _out_dir(args)
    q = args.q if args.q is not None else float(args.n) ** (1.0 / 3.0)
    spec = EnsembleSpec(n=args.n, q=q, law=EntryLaw(args.law), model=args.model)
    rng = substream(args.seed, EXP_GENERATE, args.n, 0, ROLE_BASE)
    label = seed_label(args.seed, EXP_GENERATE, args.n, 0)
    if spec.model == "er-adjacency":
        mat = sample_er(spec, rng, seed_label=label)
    else:
        mat = sample_sparse(spec, rng, seed_label=label)
    name = args.name or f"matrix_n{args.n}_s{args.seed}.txt"
    path = out / name
    write_matrix(mat, path)
    print(path)
    return EXIT_OK


def _validate_run(command: str, cfg: SweepConfig) -> None:
    problems = []
    if command in ("sweep", "variance", "gaps", "resolvent", "chatterjee"):
        if cfg.model != "centered-sparse":
            problems.append(f"model: {command} runs on the centered-sparse model")
    if command == "er":
        if cfg.model != "er-adjacency":
            problems.append("model: er runs on the er-adjacency model")
        for n in cfg.ns:
            if cfg.q_for(n) ** 2 >= n:
                problems.append(f"q_rule: er model needs q^2 < n, violated at n={n}")
    if command == "chatterjee":
        if len(cfg.ns) != 1:
            problems.append(f"ns: chatterjee runs one size at a time, got {cfg.ns!r}")
        if not cfg.extra_ks:
            problems.append("extra_ks: chatterjee needs explicit k values")
        else:
            m = pair_count(cfg.ns[0])
            bad = [k for k in cfg.extra_ks if not 1 <= k <= m]
            if bad:
                problems.append(f"extra_ks: outside [1, {m}]: {bad}")
    if command == "resolvent" and not any(k > 0 for k in cfg.ks_for(min(cfg.ns))):
        problems.append("alphas/extra_ks: resolvent drift needs at least one k > 0")
    if command in ("variance", "gaps") and len(cfg.ns) < 2:
        problems.append(f"ns: {command} needs at least 2 sizes")
    if command == "variance" and cfg.trials < 8:
        problems.append("trials: the variance fit needs at least 8 per size")
    for n in cfg.ns:
        cfg.spec_for(n)  # EnsembleSpec re-validates (q, n) jointly
    if problems:
        raise ValidationError("invalid config: " + "; ".join(problems))


def _compute_chunk(command: str, cfg: SweepConfig, n: int, lo: int, hi: int,
                   dense_cap: int) -> tuple[str, int]:
    records = []
    trials = range(lo, hi)
    if command == "sweep":
        tag = EXP_SWEEP if cfg.index_for(n) == 1 else EXP_OTHER_INDEX
        for trial in trials:
            records.extend(trial_records(cfg, n, trial, tag))
    elif command == "er":
        for trial in trials:
            records.extend(trial_records(cfg, n, trial, EXP_ER))
    elif command == "variance":
        records.extend(variance_trial(cfg, n, trial) for trial in trials)
    elif command == "gaps":
        records.extend(gap_trial(cfg, n, trial) for trial in trials)
    elif command == "resolvent":
        for trial in trials:
            records.extend(drift_trial(cfg, n, trial, dense_cap=dense_cap))
    elif command == "chatterjee":
        f, sampler, n_vars = slot_statistic(cfg.spec_for(n))
        records.extend(
            chatterjee_trial(f, sampler, n_vars, cfg.extra_ks, trial, cfg.master_seed)
            for trial in trials
        )
    else:
        raise ValidationError(f"unknown command {command!r}")
    header = header_obj(_KINDS[command], cfg.config_hash(), cfg.master_seed)
    lines = [json.dumps(header, sort_keys=True)]
    lines.extend(records_to_lines(records))
    return "\n".join(lines) + "\n", len(records)


def cmd_run(args) -> int:
    command = args.command
    cfg = _load_config(args)
    _validate_run(command, cfg)
    out = _out_dir(args)
    plan = cfg.batches_for()
    keys = tuple(f"n{n}:t{lo}-{hi}" for n, lo, hi in plan)
    manifest = create_or_resume(out, command, cfg.config_hash(), cfg.master_seed, keys, args.resume)
    write_if_changed(out / "config.json", cfg.to_json())

    plan_by_key = dict(zip(keys, plan))
    pending = manifest.pending()
    done = len(keys) - len(pending)
    workers = max(1, args.workers)
    if pending:
        print(f"{command}: {done}/{len(keys)} batches present, computing {len(pending)}")
    if workers > 1 and len(pending) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {}
            for key in pending:
                n, lo, hi = plan_by_key[key]
                fut = pool.submit(_compute_chunk, command, cfg, n, lo, hi, args.dense_cap)
                futures[fut] = key
            remaining = set(futures)
            while remaining:
                finished, remaining = wait(remaining, return_when=FIRST_COMPLETED)
                for fut in finished:
                    key = futures[fut]
                    text, count = fut.result()
                    manifest.record_chunk(key, _chunk_name(command, key), text, count)
    else:
        for key in pending:
            n, lo, hi = plan_by_key[key]
            text, count = _compute_chunk(command, cfg, n, lo, hi, args.dense_cap)
            manifest.record_chunk(key, _chunk_name(command, key), text, count)

    records = _merge_records(manifest, cfg, command, out)
    _derived_artifacts(command, cfg, records, out)
    print(f"{command}: complete, {len(records)} records in {out}")
    return EXIT_OK


def _chunk_name(command: str, key: str) -> str:
    return f"{command}_{key.replace(':', '_')}.jsonl"


def _merge_records(manifest, cfg: SweepConfig, command: str, out: Path) -> list:
    records = []
    for key in manifest.planned:
        _, recs = read_records(manifest.chunk_path(key))
        records.extend(recs)
    header = header_obj(_KINDS[command], cfg.config_hash(), cfg.master_seed)
    lines = [json.dumps(header, sort_keys=True)]
    lines.extend(records_to_lines(records))
    write_if_changed(out / "records.jsonl", "\n".join(lines) + "\n")
    return sorted(records, key=lambda r: r.sort_key())


def _derived_artifacts(command: str, cfg: SweepConfig, records: list, out: Path) -> None:
    chash = cfg.config_hash()
    seed = cfg.master_seed
    if command in ("sweep", "er"):
        write_if_changed(out / "summary.csv", trial_summary_csv(records, chash, seed))
    report = None
    if command == "er":
        try:
            medians = sticking_medians(records)
        except ValidationError:
            medians = {}
        report = {"sticking_medians": {str(n): v for n, v in medians.items()}}
        if medians:
            vals = list(medians.values())
            report["sticking_stability_ratio"] = max(vals) / min(vals)
    elif command == "variance":
        rng = substream(seed, EXP_VARIANCE, 0, 0, ROLE_MISC)
        fit = variance_fit(variance_samples_from_records(records), rng)
        report = {
            "ns": list(fit.ns),
            "variances": list(fit.variances),
            "ci_lo": list(fit.ci_lo),
            "ci_hi": list(fit.ci_hi),
            "l_values": list(fit.l_values),
            "slope": fit.slope,
            "slope_ci": list(fit.slope_ci),
            "trials": fit.trials,
        }
    elif command == "gaps":
        fit = gap_fit(gaps_from_records(records), deltas=cfg.deltas)
        report = {
            "ns": list(fit.ns),
            "medians": list(fit.medians),
            "slope": fit.slope,
            "deltas": list(fit.deltas),
            "tail": {f"{n}:{d}": p for (n, d), p in sorted(fit.tail.items())},
            "constant": fit.constant,
            "trials": fit.trials,
        }
    elif command == "resolvent":
        cells: dict[tuple[int, int], list[float]] = {}
        for r in records:
            cells.setdefault((r.n, r.k), []).append(r.drift)
        report = {"cells": []}
        for (n, k) in sorted(cells):
            drifts = sorted(cells[(n, k)])
            mid = drifts[len(drifts) // 2]
            report["cells"].append(
                {"n": n, "k": k, "trials": len(drifts), "min": drifts[0],
                 "median": mid, "max": drifts[-1]}
            )
    elif command == "chatterjee":
        rep = report_from_records(records, cfg.extra_ks)
        report = {
            "n_vars": rep.n_vars,
            "ks": list(rep.ks),
            "estimates": list(rep.estimates),
            "ses": list(rep.ses),
            "bounds": list(rep.bounds),
            "var_f": rep.var_f,
            "f_mean": rep.f_mean,
            "trials": rep.trials,
        }
    if report is not None:
        report = {"artifact": f"{command}-report", "config": chash, "seed": seed, **report}
        write_if_changed(out / "report.json", json.dumps(report, indent=2, sort_keys=True) + "\n")


def cmd_collapse(args) -> int:
    out = _out_dir(args)
    header, records = read_records(args.records)
    if header.get("artifact") != "trial-records":
        raise ValidationError(f"{args.records}: collapse needs trial-records input")
    curves = overlap_curves(records)
    reports = scaling_collapse(curves, args.exponents)
    text = collapse_csv(reports, header.get("config", "-"), header.get("seed", 0))
    write_if_changed(out / "collapse.csv", text)
    best = best_exponent(reports)
    for rep in reports:
        status = f"error={rep.error:.6g}" if rep.ok else f"no overlap ({rep.note})"
        print(f"exponent {rep.exponent:.6g}: {status}")
    print(f"best exponent: {best:.6g}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
