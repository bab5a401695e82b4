"""Statistical reductions of record streams.

Collapse, variance-scaling, margin and gap-law reports all consume plain
record lists, so they can be rerun offline on stored JSONL artifacts without
touching any matrix code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ValidationError
from .config import SweepConfig
from .records import GapRecord, TrialRecord, VarianceRecord, mean_se
from .sweeps import gap_records, variance_records

COLLAPSE_GRID_POINTS = 64


def overlap_curves(records: list[TrialRecord]) -> dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Per size: (k grid, mean overlap, SE), flagged records excluded."""
    cells: dict[tuple[int, int], list[float]] = {}
    for r in records:
        if r.usable:
            cells.setdefault((r.n, r.k), []).append(r.overlap)
    out: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
    for n in sorted({n for n, _ in cells}):
        ks = sorted(k for nn, k in cells if nn == n)
        stats = [mean_se(cells[(n, k)]) for k in ks]
        out[n] = (
            np.asarray(ks, dtype=float),
            np.asarray([s[0] for s in stats]),
            np.asarray([s[1] for s in stats]),
        )
    return out


@dataclass(frozen=True)
class CollapseReport:
    """Vertical spread of the rescaled curves at one exponent.

    Curves are interpolated onto a shared grid in log10(k / n^exponent); the
    error is the maximum over the grid of the largest pairwise vertical
    deviation.  ``ok`` is False when the rescaled abscissa ranges do not
    overlap, in which case the error is infinite.
    """

    exponent: float
    lo: float
    hi: float
    grid: tuple[float, ...]
    curves: dict[int, tuple[float, ...]] = field(repr=False)
    error: float
    ok: bool
    note: str = ""


def scaling_collapse(
    curves: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] | dict,
    exponents,
    grid_points: int = COLLAPSE_GRID_POINTS,
) -> list[CollapseReport]:
    """Collapse error per exponent for mean-overlap curves keyed by size."""
    if len(curves) < 3:
        raise ValidationError(f"collapse needs at least 3 sizes, got {len(curves)}")
    prepared = {}
    for n, curve in curves.items():
        ks = np.asarray(curve[0], dtype=float)
        ys = np.asarray(curve[1], dtype=float)
        keep = (ks > 0) & np.isfinite(ys)
        if keep.sum() < 2:
            raise ValidationError(f"size {n}: need at least 2 positive-k points")
        prepared[int(n)] = (ks[keep], ys[keep])
    reports = []
    for expo in exponents:
        expo = float(expo)
        xs = {n: np.log10(ks) - expo * math.log10(n) for n, (ks, _) in prepared.items()}
        lo = max(float(x.min()) for x in xs.values())
        hi = min(float(x.max()) for x in xs.values())
        if not hi > lo:
            reports.append(
                CollapseReport(exponent=expo, lo=lo, hi=hi, grid=(), curves={},
                               error=math.inf, ok=False,
                               note="insufficient abscissa overlap")
            )
            continue
        grid = np.linspace(lo, hi, grid_points)
        interp = {
            n: np.interp(grid, xs[n], prepared[n][1])
            for n in prepared
        }
        stack = np.stack(list(interp.values()))
        error = float((stack.max(axis=0) - stack.min(axis=0)).max())
        reports.append(
            CollapseReport(
                exponent=expo, lo=lo, hi=hi, grid=tuple(grid.tolist()),
                curves={n: tuple(v.tolist()) for n, v in interp.items()},
                error=error, ok=True,
            )
        )
    return reports


def best_exponent(reports: list[CollapseReport]) -> float:
    usable = [r for r in reports if r.ok]
    if not usable:
        raise ValidationError("no exponent had overlapping abscissa ranges")
    return min(usable, key=lambda r: r.error).exponent


# --- variance scaling ---------------------------------------------------------


@dataclass(frozen=True)
class VarianceReport:
    """log-log fit of Var(lambda_1 - L - chi) against n.

    ``l_values`` holds the per-size grand mean of lambda_1 - chi (the constant
    L; the variance itself is shift-invariant).  Confidence intervals are
    basic percentile bootstrap.
    """

    ns: tuple[int, ...]
    variances: tuple[float, ...]
    ci_lo: tuple[float, ...]
    ci_hi: tuple[float, ...]
    l_values: tuple[float, ...]
    slope: float
    intercept: float
    slope_ci: tuple[float, float]
    trials: int


def variance_fit(samples: dict[int, np.ndarray], rng: np.random.Generator,
                 bootstrap: int = 1000) -> VarianceReport:
    if len(samples) < 2:
        raise ValidationError("variance fit needs at least 2 sizes")
    ns = tuple(sorted(samples))
    arrays = [np.asarray(samples[n], dtype=float) for n in ns]
    if any(a.size < 8 for a in arrays):
        raise ValidationError("variance fit needs at least 8 trials per size")
    variances = [float(a.var(ddof=1)) for a in arrays]
    l_values = [float(a.mean()) for a in arrays]
    boots = np.empty((bootstrap, len(ns)))
    for col, a in enumerate(arrays):
        idx = rng.integers(0, a.size, size=(bootstrap, a.size))
        boots[:, col] = a[idx].var(axis=1, ddof=1)
    ci_lo = np.percentile(boots, 2.5, axis=0)
    ci_hi = np.percentile(boots, 97.5, axis=0)
    logn = np.log(np.asarray(ns, dtype=float))
    slope, intercept = np.polyfit(logn, np.log(variances), 1)
    boot_slopes = np.polyfit(logn, np.log(boots).T, 1)[0]
    slope_ci = (float(np.percentile(boot_slopes, 2.5)), float(np.percentile(boot_slopes, 97.5)))
    return VarianceReport(
        ns=ns,
        variances=tuple(variances),
        ci_lo=tuple(float(v) for v in ci_lo),
        ci_hi=tuple(float(v) for v in ci_hi),
        l_values=tuple(l_values),
        slope=float(slope),
        intercept=float(intercept),
        slope_ci=slope_ci,
        trials=min(a.size for a in arrays),
    )


def variance_samples_from_records(records: list[VarianceRecord]) -> dict[int, np.ndarray]:
    cells: dict[int, list[float]] = {}
    for r in records:
        cells.setdefault(r.n, []).append(r.lambda1 - r.chi)
    return {n: np.asarray(v) for n, v in cells.items()}


def variance_scan(cfg: SweepConfig, rng: np.random.Generator | None = None) -> VarianceReport:
    """Sample the centered statistic and fit its size scaling."""
    if len(cfg.ns) < 4:
        raise ValidationError("variance scan needs at least 4 sizes")
    if rng is None:
        from ..rng import EXP_VARIANCE, ROLE_MISC, substream

        rng = substream(cfg.master_seed, EXP_VARIANCE, 0, 0, ROLE_MISC)
    recs = variance_records(cfg)
    return variance_fit(variance_samples_from_records(recs), rng)


# --- key inequality margin ------------------------------------------------------


@dataclass(frozen=True)
class MarginReport:
    """Ratio of mean squared overlap to the variance bound n^3 Var / k."""

    n: int
    q: float
    ks: tuple[int, ...]
    overlap_sq: tuple[float, ...]
    overlap_sq_se: tuple[float, ...]
    variance: float
    ratios: tuple[float, ...]
    max_ratio: float
    decreasing: bool
    trials: int


def hmain1_margins(records: list[TrialRecord]) -> MarginReport:
    """Margins of the sensitivity inequality from one sweep's records.

    The variance of lambda_1 - chi comes from the same trials' base draws
    (one sample per trial), so sweep and variance sides match in (n, q).
    k = 0 rows are outside the inequality's domain and are skipped.
    """
    ns = {r.n for r in records}
    if len(ns) != 1:
        raise ValidationError(f"margin report needs a single size, got {sorted(ns)}")
    n = ns.pop()
    base_by_trial: dict[int, float] = {}
    cells: dict[int, list[float]] = {}
    for r in records:
        if not r.usable:
            continue
        base_by_trial[r.trial] = r.lambda1 - r.chi
        if r.k > 0:
            cells.setdefault(r.k, []).append(r.overlap**2)
    if len(base_by_trial) < 8:
        raise ValidationError("margin report needs at least 8 usable trials")
    variance = float(np.var(np.asarray(list(base_by_trial.values())), ddof=1))
    ks = tuple(sorted(cells))
    stats = [mean_se(cells[k]) for k in ks]
    ratios = tuple(s[0] * k / (float(n) ** 3 * variance) for k, s in zip(ks, stats))
    decreasing = all(ratios[i + 1] <= ratios[i] for i in range(len(ratios) - 1))
    return MarginReport(
        n=n,
        q=records[0].q,
        ks=ks,
        overlap_sq=tuple(s[0] for s in stats),
        overlap_sq_se=tuple(s[1] for s in stats),
        variance=variance,
        ratios=ratios,
        max_ratio=max(ratios),
        decreasing=decreasing,
        trials=len(base_by_trial),
    )


# --- gap statistics ---------------------------------------------------------------


@dataclass(frozen=True)
class GapReport:
    """Medians, size scaling and small-gap tail of the top spectral gap.

    ``tail`` maps (n, delta) to the empirical P(gap <= delta / n); the fitted
    constant is the largest of P / (delta log n) over all cells.
    """

    ns: tuple[int, ...]
    medians: tuple[float, ...]
    slope: float
    deltas: tuple[float, ...]
    tail: dict[tuple[int, float], float]
    constant: float
    trials: int


def gap_fit(gaps: dict[int, np.ndarray], deltas=(0.1, 0.3, 1.0)) -> GapReport:
    if len(gaps) < 2:
        raise ValidationError("gap fit needs at least 2 sizes")
    ns = tuple(sorted(gaps))
    arrays = [np.asarray(gaps[n], dtype=float) for n in ns]
    medians = [float(np.median(a)) for a in arrays]
    if any(m <= 0 for m in medians):
        raise ValidationError("nonpositive median gap; eigenvalues not sorted?")
    slope = float(np.polyfit(np.log(np.asarray(ns, dtype=float)), np.log(medians), 1)[0])
    tail = {}
    constant = 0.0
    for n, a in zip(ns, arrays):
        for d in deltas:
            p = float((a <= d / n).mean())
            tail[(n, float(d))] = p
            constant = max(constant, p / (d * math.log(n)))
    return GapReport(
        ns=ns,
        medians=tuple(medians),
        slope=slope,
        deltas=tuple(float(d) for d in deltas),
        tail=tail,
        constant=constant,
        trials=min(a.size for a in arrays),
    )


def gaps_from_records(records: list[GapRecord]) -> dict[int, np.ndarray]:
    cells: dict[int, list[float]] = {}
    for r in records:
        cells.setdefault(r.n, []).append(r.gap)
    return {n: np.asarray(v) for n, v in cells.items()}


def gap_experiment(cfg: SweepConfig) -> GapReport:
    """Sample top gaps across sizes and fit the scaling law."""
    return gap_fit(gaps_from_records(gap_records(cfg)), deltas=cfg.deltas)


def sticking_medians(records: list[TrialRecord]) -> dict[int, float]:
    """Median n-scaled sticking residual per size (k = 0 rows, one per trial)."""
    cells: dict[int, list[float]] = {}
    for r in records:
        if r.k == 0 and r.sticking is not None:
            cells.setdefault(r.n, []).append(r.sticking)
    if not cells:
        raise ValidationError("no sticking residuals in these records")
    return {n: float(np.median(v)) for n, v in sorted(cells.items())}
