"""Monte Carlo studies of noise sensitivity and their analyses."""

from .analysis import (
    CollapseReport,
    GapReport,
    MarginReport,
    VarianceReport,
    best_exponent,
    gap_experiment,
    gap_fit,
    gaps_from_records,
    hmain1_margins,
    overlap_curves,
    scaling_collapse,
    sticking_medians,
    variance_fit,
    variance_samples_from_records,
    variance_scan,
)
from .chatterjee import (
    ChatterjeeReport,
    chatterjee_bound,
    chatterjee_ik,
    chatterjee_trial,
    flip_after_prefix,
    flip_single,
    linear_ik_exact,
    replace_subset,
    report_from_records,
    sigma_prefix,
    slot_statistic,
)
from .config import DEFAULT_ALPHAS, SweepConfig, config_from_dict, parse_q_rule, read_config
from .records import (
    ARTIFACT_VERSION,
    ChatterjeeRecord,
    DriftRecord,
    GapRecord,
    TrialRecord,
    VarianceRecord,
    collapse_csv,
    mean_se,
    read_records,
    summarize_trials,
    trial_summary_csv,
    write_records,
)
from .sweeps import (
    drift_records,
    drift_trial,
    er_experiment,
    gap_records,
    gap_trial,
    other_index_sweep,
    sensitivity_sweep,
    solve_index,
    trial_records,
    variance_records,
    variance_trial,
)

__all__ = [
    "ARTIFACT_VERSION",
    "ChatterjeeRecord",
    "ChatterjeeReport",
    "CollapseReport",
    "DEFAULT_ALPHAS",
    "DriftRecord",
    "GapRecord",
    "GapReport",
    "MarginReport",
    "SweepConfig",
    "TrialRecord",
    "VarianceRecord",
    "VarianceReport",
    "best_exponent",
    "chatterjee_bound",
    "chatterjee_ik",
    "chatterjee_trial",
    "collapse_csv",
    "config_from_dict",
    "drift_records",
    "drift_trial",
    "er_experiment",
    "flip_after_prefix",
    "flip_single",
    "gap_experiment",
    "gap_fit",
    "gap_records",
    "gap_trial",
    "gaps_from_records",
    "hmain1_margins",
    "linear_ik_exact",
    "mean_se",
    "other_index_sweep",
    "overlap_curves",
    "parse_q_rule",
    "read_config",
    "read_records",
    "replace_subset",
    "report_from_records",
    "scaling_collapse",
    "sensitivity_sweep",
    "sigma_prefix",
    "slot_statistic",
    "solve_index",
    "sticking_medians",
    "summarize_trials",
    "trial_records",
    "trial_summary_csv",
    "variance_fit",
    "variance_records",
    "variance_samples_from_records",
    "variance_scan",
    "variance_trial",
    "write_records",
]
