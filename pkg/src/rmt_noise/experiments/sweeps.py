"""Monte Carlo drivers.

Each trial is an independent work unit: it owns its substreams, draws one
coupled pair (H, H') plus one slot ordering, and walks the whole k grid with
that fixed coupling, so curves within a trial are nested resamplings of the
same realization.  Eigen solves along the grid are warm-started from the
previous grid point.  Per-trial failures are recorded as flagged records and
never abort a run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..edge_model import EdgeModel
from ..ensemble import (
    EnsembleSpec,
    SparseSymMatrix,
    center_er,
    correction_term,
    sample_er,
    sample_sparse,
)
from ..errors import EigsolverError, ValidationError
from ..resolvent import lambda1_drift, resolvent_drift
from ..rng import (
    EXP_ER,
    EXP_GAPS,
    EXP_OTHER_INDEX,
    EXP_RESOLVENT,
    EXP_SWEEP,
    EXP_VARIANCE,
    ROLE_BASE,
    ROLE_FRESH,
    ROLE_ORDER,
    ROLE_START,
    seed_label,
    substream,
)
from ..resample import make_pair_order, make_resample_pair, resample_to
from ..spectral import (
    DEGENERATE_GAP,
    NegatedOperator,
    _Operator,
    aligned_inf_dist,
    full_spectrum,
    overlap,
    top_eigs,
)
from .config import SweepConfig
from .records import DriftRecord, GapRecord, TrialRecord, VarianceRecord


@dataclass(frozen=True)
class WindowSolve:
    """Tracked eigenpair plus enough neighbors to judge degeneracy."""

    value: float
    vector: np.ndarray
    gap: float
    warm: np.ndarray  # basis to seed the next solve of the same index


def _sample(spec: EnsembleSpec, rng, label: str) -> SparseSymMatrix:
    if spec.model == "er-adjacency":
        return sample_er(spec, rng, seed_label=label)
    return sample_sparse(spec, rng, seed_label=label)


def _chi(mat: SparseSymMatrix, spec: EnsembleSpec) -> float:
    if spec.model == "er-adjacency":
        centered, _, _ = center_er(mat, spec)
        return correction_term(centered).value
    return correction_term(mat).value


def solve_index(mat, index: int, rng, warm: np.ndarray | None = None, tol: float = 1e-10) -> WindowSolve:
    """Eigenpair at a 1-based index, solved from the nearest spectral end."""
    n = _Operator(mat).n
    if not 1 <= index <= n:
        raise ValidationError(f"eigen index {index} out of range for n={n}")
    if index == n and n > 2:
        eigs = top_eigs(NegatedOperator(mat), m=2, warm_start=warm, rng=rng, tol=tol)
        gap = float(eigs.values[0] - eigs.values[1])
        return WindowSolve(-float(eigs.values[0]), eigs.vectors[:, 0], gap, eigs.vectors)
    m = min(n, index + 1)
    eigs = top_eigs(mat, m=m, warm_start=warm, rng=rng, tol=tol)
    above = float(eigs.values[index - 2] - eigs.values[index - 1]) if index >= 2 else math.inf
    below = float(eigs.values[index - 1] - eigs.values[index]) if index < m else math.inf
    gap = min(above, below)
    if not math.isfinite(gap):
        gap = 0.0 if n == 1 else abs(float(eigs.values[0]))
    return WindowSolve(float(eigs.values[index - 1]), eigs.vectors[:, index - 1], gap, eigs.vectors)


def _failed_records(cfg: SweepConfig, n: int, trial: int, label: str, index: int) -> list[TrialRecord]:
    q = cfg.q_for(n)
    return [
        TrialRecord(
            n=n, q=q, k=k, trial=trial, eigen_index=index, seed=label,
            overlap=None, aligned_inf_dist=None, lambda1=None, lambda1_k=None,
            chi=None, chi_k=None, gap12=None, solver_failure=True,
        )
        for k in cfg.ks_for(n)
    ]


def trial_records(cfg: SweepConfig, n: int, trial: int, exp_tag: int) -> list[TrialRecord]:
    """All k-grid records of one coupled trial."""
    spec = cfg.spec_for(n)
    index = cfg.index_for(n)
    label = seed_label(cfg.master_seed, exp_tag, n, trial)
    base = _sample(spec, substream(cfg.master_seed, exp_tag, n, trial, ROLE_BASE), label)
    fresh = _sample(spec, substream(cfg.master_seed, exp_tag, n, trial, ROLE_FRESH), label)
    order = make_pair_order(n, substream(cfg.master_seed, exp_tag, n, trial, ROLE_ORDER))
    pair = make_resample_pair(base, fresh, order)
    start_rng = substream(cfg.master_seed, exp_tag, n, trial, ROLE_START)

    try:
        base_solve = solve_index(base, index, start_rng)
    except EigsolverError:
        return _failed_records(cfg, n, trial, label, index)

    sticking = None
    if spec.model == "er-adjacency":
        sticking = _sticking_residual(spec, base, base_solve, index, start_rng)

    chi_base = _chi(base, spec)
    base_degenerate = base_solve.gap < DEGENERATE_GAP
    records = []
    warm = base_solve.warm
    for k in cfg.ks_for(n):
        if k == 0:
            # The k = 0 matrix is bitwise the base matrix, so the overlap is
            # 1 by definition; recorded exactly rather than re-solved.
            records.append(
                TrialRecord(
                    n=n, q=spec.q, k=0, trial=trial, eigen_index=index, seed=label,
                    overlap=1.0, aligned_inf_dist=0.0,
                    lambda1=base_solve.value, lambda1_k=base_solve.value,
                    chi=chi_base, chi_k=chi_base, gap12=base_solve.gap,
                    degenerate_gap=base_degenerate, sticking=sticking,
                )
            )
            continue
        resampled = resample_to(pair, k)
        try:
            k_solve = solve_index(resampled, index, start_rng, warm=warm)
        except EigsolverError:
            records.append(
                TrialRecord(
                    n=n, q=spec.q, k=k, trial=trial, eigen_index=index, seed=label,
                    overlap=None, aligned_inf_dist=None, lambda1=base_solve.value,
                    lambda1_k=None, chi=chi_base, chi_k=None, gap12=base_solve.gap,
                    solver_failure=True, sticking=sticking,
                )
            )
            continue
        warm = k_solve.warm
        records.append(
            TrialRecord(
                n=n, q=spec.q, k=k, trial=trial, eigen_index=index, seed=label,
                overlap=overlap(base_solve.vector, k_solve.vector),
                aligned_inf_dist=aligned_inf_dist(base_solve.vector, k_solve.vector),
                lambda1=base_solve.value, lambda1_k=k_solve.value,
                chi=chi_base, chi_k=_chi(resampled, spec),
                gap12=min(base_solve.gap, k_solve.gap),
                degenerate_gap=base_degenerate or k_solve.gap < DEGENERATE_GAP,
                sticking=sticking,
            )
        )
    return records


def _sticking_residual(spec: EnsembleSpec, base: SparseSymMatrix, base_solve: WindowSolve,
                       index: int, rng) -> float | None:
    """n |nu_2 - (nu_ring_1 - a)| from the trial's base adjacency."""
    centered, _, shift = center_er(base, spec)
    try:
        if index == 2:
            nu2 = base_solve.value
        elif index == 1:
            # The m=2 window solve already converged nu_2, one gap below.
            nu2 = base_solve.value - base_solve.gap
        else:
            nu2 = float(top_eigs(base, m=2, rng=rng).values[1])
        ring_top = float(top_eigs(centered, m=1, rng=rng).values[0])
    except EigsolverError:
        return None
    return base.n * abs(nu2 - (ring_top - shift))


def sensitivity_sweep(cfg: SweepConfig) -> list[TrialRecord]:
    """Coupled overlap sweep of the centered model's top eigenvector."""
    if cfg.model != "centered-sparse":
        raise ValidationError("sensitivity_sweep runs on the centered-sparse model")
    if cfg.eigen_index != 1:
        raise ValidationError("sensitivity_sweep tracks eigen_index 1; see other_index_sweep")
    out = []
    for n in cfg.ns:
        for trial in range(cfg.trials):
            out.extend(trial_records(cfg, n, trial, EXP_SWEEP))
    return out


def er_experiment(cfg: SweepConfig) -> list[TrialRecord]:
    """Adjacency-model sweep; tracks w_l and the sticking residual."""
    if cfg.model != "er-adjacency":
        raise ValidationError("er_experiment runs on the er-adjacency model")
    for n in cfg.ns:
        spec = cfg.spec_for(n)
        if spec.slot_probability >= 1.0:
            raise ValidationError(f"er model needs q^2 < n, got q={spec.q}, n={n}")
    out = []
    for n in cfg.ns:
        for trial in range(cfg.trials):
            out.extend(trial_records(cfg, n, trial, EXP_ER))
    return out


def other_index_sweep(cfg: SweepConfig) -> list[TrialRecord]:
    """Exploratory sweep of a non-top eigenvector in the centered model."""
    if cfg.model != "centered-sparse":
        raise ValidationError("other_index_sweep runs on the centered-sparse model")
    for n in cfg.ns:
        if not 1 <= cfg.index_for(n) <= n - 1:
            raise ValidationError(f"eigen_index {cfg.eigen_index!r} out of range for n={n}")
    out = []
    for n in cfg.ns:
        for trial in range(cfg.trials):
            out.extend(trial_records(cfg, n, trial, EXP_OTHER_INDEX))
    return out


# --- single-matrix statistics (variance, gaps) -------------------------------


def variance_trial(cfg: SweepConfig, n: int, trial: int) -> VarianceRecord:
    spec = cfg.spec_for(n)
    label = seed_label(cfg.master_seed, EXP_VARIANCE, n, trial)
    h = _sample(spec, substream(cfg.master_seed, EXP_VARIANCE, n, trial, ROLE_BASE), label)
    rng = substream(cfg.master_seed, EXP_VARIANCE, n, trial, ROLE_START)
    lam1 = float(top_eigs(h, m=1, rng=rng).values[0])
    return VarianceRecord(n=n, q=spec.q, trial=trial, seed=label, lambda1=lam1, chi=_chi(h, spec))


def variance_records(cfg: SweepConfig) -> list[VarianceRecord]:
    out = []
    for n in cfg.ns:
        for trial in range(cfg.trials):
            out.append(variance_trial(cfg, n, trial))
    return out


def gap_trial(cfg: SweepConfig, n: int, trial: int) -> GapRecord:
    spec = cfg.spec_for(n)
    label = seed_label(cfg.master_seed, EXP_GAPS, n, trial)
    h = _sample(spec, substream(cfg.master_seed, EXP_GAPS, n, trial, ROLE_BASE), label)
    rng = substream(cfg.master_seed, EXP_GAPS, n, trial, ROLE_START)
    eigs = top_eigs(h, m=2, rng=rng)
    lam1, lam2 = float(eigs.values[0]), float(eigs.values[1])
    return GapRecord(n=n, q=spec.q, trial=trial, seed=label,
                     lambda1=lam1, lambda2=lam2, gap=lam1 - lam2)


def gap_records(cfg: SweepConfig) -> list[GapRecord]:
    out = []
    for n in cfg.ns:
        for trial in range(cfg.trials):
            out.append(gap_trial(cfg, n, trial))
    return out


# --- resolvent drift ----------------------------------------------------------


def drift_model(spec: EnsembleSpec, chi: float = 0.0) -> EdgeModel:
    """Edge model with the first sparse correction for window placement.

    The window convention centers the energy window at the measured edge of
    the base matrix, so the trial's correction term is folded into the model.
    """
    return EdgeModel(n=spec.n, q=spec.q, chi=chi,
                     quartic=spec.law.fourth_moment() / spec.q**2)


def drift_trial(cfg: SweepConfig, n: int, trial: int, dense_cap: int = 4096) -> list[DriftRecord]:
    spec = cfg.spec_for(n)
    if spec.model != "centered-sparse":
        raise ValidationError("drift trials run on the centered-sparse model")
    label = seed_label(cfg.master_seed, EXP_RESOLVENT, n, trial)
    base = _sample(spec, substream(cfg.master_seed, EXP_RESOLVENT, n, trial, ROLE_BASE), label)
    fresh = _sample(spec, substream(cfg.master_seed, EXP_RESOLVENT, n, trial, ROLE_FRESH), label)
    order = make_pair_order(n, substream(cfg.master_seed, EXP_RESOLVENT, n, trial, ROLE_ORDER))
    pair = make_resample_pair(base, fresh, order)
    model = drift_model(spec, chi=_chi(base, spec))
    eigs_base = full_spectrum(base.to_dense(), dense_cap=dense_cap, check=False)
    records = []
    for k in cfg.ks_for(n):
        if k == 0:
            continue
        eigs_k = full_spectrum(resample_to(pair, k).to_dense(), dense_cap=dense_cap, check=False)
        report = resolvent_drift(eigs_base, eigs_k, model, delta=cfg.window_delta)
        _, lam_scaled = lambda1_drift(eigs_base.values[0], eigs_k.values[0], n, cfg.window_delta)
        records.append(
            DriftRecord(
                n=n, q=spec.q, k=k, trial=trial, seed=label,
                drift=report.drift,
                lambda1_base=float(eigs_base.values[0]),
                lambda1_resampled=float(eigs_k.values[0]),
                lambda1_drift_scaled=lam_scaled,
                window_delta=cfg.window_delta,
            )
        )
    return records


def drift_records(cfg: SweepConfig, dense_cap: int = 4096) -> list[DriftRecord]:
    out = []
    for n in cfg.ns:
        for trial in range(cfg.trials):
            out.extend(drift_trial(cfg, n, trial, dense_cap=dense_cap))
    return out
