"""Record types and deterministic artifact files.

Every study emits JSON-lines records (one object per line, keys sorted) under
a single header line carrying the artifact kind, version, config hash and
master seed.  Summaries are CSV with a matching comment header.  All writers
sort records by their natural key and go through an atomic replace, so a
fixed (config, master_seed) always produces byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, fields
from typing import Iterable, Sequence

import numpy as np

from ..ensemble import atomic_write_text
from ..errors import ValidationError

ARTIFACT_VERSION = 1


def mean_se(values: Sequence[float]) -> tuple[float, float]:
    """Sample mean and its standard error (0 for fewer than 2 points)."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return math.nan, math.nan
    if arr.size == 1:
        return float(arr[0]), 0.0
    return float(arr.mean()), float(arr.std(ddof=1) / math.sqrt(arr.size))


@dataclass(frozen=True)
class TrialRecord:
    """One coupled-resampling measurement at a single k.

    ``lambda1``/``lambda1_k`` hold the tracked eigenvalue (the top one in the
    headline runs) for the base and resampled matrix; ``gap12`` is the
    spectral gap adjacent to the tracked index, which for index 1 is the
    top gap.  ``sticking`` is the n-scaled adjacency sticking residual,
    present only in adjacency-model runs.  Records flagged as solver
    failures carry null measurements.
    """

    n: int
    q: float
    k: int
    trial: int
    eigen_index: int
    seed: str
    overlap: float | None
    aligned_inf_dist: float | None
    lambda1: float | None
    lambda1_k: float | None
    chi: float | None
    chi_k: float | None
    gap12: float | None
    degenerate_gap: bool = False
    solver_failure: bool = False
    sticking: float | None = None

    def __post_init__(self) -> None:
        if not self.solver_failure:
            if self.overlap is None or not -1e-12 <= self.overlap <= 1.0 + 1e-12:
                raise ValidationError(f"overlap out of [0, 1]: {self.overlap!r}")
            if self.gap12 is None or self.gap12 < 0.0:
                raise ValidationError(f"gap12 must be nonnegative: {self.gap12!r}")

    def sort_key(self) -> tuple:
        return (self.n, self.eigen_index, self.k, self.trial)

    @property
    def usable(self) -> bool:
        return not (self.solver_failure or self.degenerate_gap)


@dataclass(frozen=True)
class VarianceRecord:
    """Per-trial top eigenvalue and trace correction of one base draw."""

    n: int
    q: float
    trial: int
    seed: str
    lambda1: float
    chi: float

    def sort_key(self) -> tuple:
        return (self.n, self.trial)

    @property
    def usable(self) -> bool:
        return True


@dataclass(frozen=True)
class GapRecord:
    """Per-trial top spectral gap."""

    n: int
    q: float
    trial: int
    seed: str
    lambda1: float
    lambda2: float
    gap: float

    def sort_key(self) -> tuple:
        return (self.n, self.trial)

    @property
    def usable(self) -> bool:
        return True


@dataclass(frozen=True)
class DriftRecord:
    """Resolvent and top-eigenvalue drift of one resampling step."""

    n: int
    q: float
    k: int
    trial: int
    seed: str
    drift: float
    lambda1_base: float
    lambda1_resampled: float
    lambda1_drift_scaled: float
    window_delta: float

    def sort_key(self) -> tuple:
        return (self.n, self.k, self.trial)

    @property
    def usable(self) -> bool:
        return True


@dataclass(frozen=True)
class ChatterjeeRecord:
    """One interpolation-product sample per resampling depth k.

    ``f_y`` and ``f_yj`` are the function values at the base vector and its
    single-flip; ``terms`` maps each k to the product estimating I_k.
    """

    trial: int
    seed: str
    n_vars: int
    j: int
    f_y: float
    f_yj: float
    terms: dict[str, float]

    def sort_key(self) -> tuple:
        return (self.trial,)

    @property
    def usable(self) -> bool:
        return True


RECORD_KINDS = {
    "trial-records": TrialRecord,
    "variance-records": VarianceRecord,
    "gap-records": GapRecord,
    "drift-records": DriftRecord,
    "chatterjee-records": ChatterjeeRecord,
}


def header_obj(kind: str, config_hash: str, master_seed: int) -> dict:
    if kind not in RECORD_KINDS:
        raise ValidationError(f"unknown artifact kind {kind!r}")
    return {
        "artifact": kind,
        "config": config_hash,
        "seed": master_seed,
        "version": ARTIFACT_VERSION,
    }


def records_to_lines(records: Iterable) -> list[str]:
    recs = sorted(records, key=lambda r: r.sort_key())
    return [json.dumps(asdict(r), sort_keys=True, allow_nan=False) for r in recs]


def write_records(path, kind: str, records: Iterable, config_hash: str, master_seed: int) -> None:
    lines = [json.dumps(header_obj(kind, config_hash, master_seed), sort_keys=True)]
    lines.extend(records_to_lines(records))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_records(path) -> tuple[dict, list]:
    with open(path, "r", encoding="utf-8") as fh:
        raw = fh.read().splitlines()
    if not raw:
        raise ValidationError(f"{path}: empty record file")
    header = json.loads(raw[0])
    kind = header.get("artifact")
    if kind not in RECORD_KINDS:
        raise ValidationError(f"{path}: unknown artifact kind {kind!r}")
    cls = RECORD_KINDS[kind]
    names = {f.name for f in fields(cls)}
    out = []
    for line in raw[1:]:
        if not line:
            continue
        obj = json.loads(line)
        unknown = set(obj) - names
        if unknown:
            raise ValidationError(f"{path}: unexpected record keys {sorted(unknown)}")
        out.append(cls(**obj))
    return header, out


# --- CSV summaries ----------------------------------------------------------


def _csv_text(header: dict, columns: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    buf.write(
        f"# rmt-noise {header['artifact']} v{header['version']}"
        f" config={header['config']} seed={header['seed']}\n"
    )
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def summarize_trials(records: Sequence[TrialRecord]) -> list[dict]:
    """Mean and standard error per (n, eigen_index, k), flags counted but excluded."""
    cells: dict[tuple, list[TrialRecord]] = {}
    for r in records:
        cells.setdefault((r.n, r.eigen_index, r.k), []).append(r)
    out = []
    for (n, idx, k) in sorted(cells):
        group = cells[(n, idx, k)]
        used = [r for r in group if r.usable]
        mo, so = mean_se([r.overlap for r in used])
        md, sd = mean_se([r.aligned_inf_dist for r in used])
        mg, sg = mean_se([r.gap12 for r in used])
        out.append(
            {
                "n": n,
                "q": group[0].q,
                "eigen_index": idx,
                "k": k,
                "trials": len(group),
                "used": len(used),
                "solver_failures": sum(r.solver_failure for r in group),
                "degenerate_gaps": sum(r.degenerate_gap for r in group),
                "mean_overlap": mo,
                "se_overlap": so,
                "mean_aligned_inf_dist": md,
                "se_aligned_inf_dist": sd,
                "mean_gap12": mg,
                "se_gap12": sg,
            }
        )
    return out


def trial_summary_csv(records: Sequence[TrialRecord], config_hash: str, master_seed: int) -> str:
    rows = summarize_trials(records)
    columns = [
        "n",
        "q",
        "eigen_index",
        "k",
        "trials",
        "used",
        "solver_failures",
        "degenerate_gaps",
        "mean_overlap",
        "se_overlap",
        "mean_aligned_inf_dist",
        "se_aligned_inf_dist",
        "mean_gap12",
        "se_gap12",
    ]
    header = header_obj("trial-records", config_hash, master_seed)
    header = dict(header, artifact="trial-summary")
    return _csv_text(header, columns, ([row[c] for c in columns] for row in rows))


def collapse_csv(reports, config_hash: str, master_seed: int) -> str:
    """One row per tried exponent, lowest collapse error first in ties order."""
    header = {
        "artifact": "collapse-report",
        "config": config_hash,
        "seed": master_seed,
        "version": ARTIFACT_VERSION,
    }
    columns = ["exponent", "collapse_error", "abscissa_lo", "abscissa_hi", "grid_points", "ok"]
    rows = [
        [rep.exponent, rep.error, rep.lo, rep.hi, len(rep.grid), rep.ok]
        for rep in reports
    ]
    return _csv_text(header, columns, rows)
