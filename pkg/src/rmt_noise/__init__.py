"""Noise sensitivity of extreme eigenvectors of sparse random symmetric matrices.

Samplers for sparse Wigner-type and Erdos-Renyi ensembles, entrywise
resampling sweeps, iterative/dense eigensolvers, a deterministic spectral-edge
model, resolvent probes, and the Monte Carlo experiments built on top of them.
"""

__version__ = "0.1.0"

from .ensemble import (
    EntryLaw,
    EnsembleSpec,
    SparseSymMatrix,
    CenteredER,
    CorrectionTerm,
    sample_sparse,
    sample_er,
    center_er,
    correction_term,
    write_matrix,
    read_matrix,
)
from .resample import (
    PairOrder,
    ResamplePair,
    SingleResampleQuantities,
    make_pair_order,
    make_resample_pair,
    resample_to,
    resample_diffs,
    single_resample,
    single_resample_quantities,
)
from .spectral import (
    EigenPairs,
    GapStats,
    full_spectrum,
    top_eigs,
    overlap,
    aligned_inf_dist,
    delocalization_stat,
    gap_stats,
)
from .edge_model import (
    EdgeModel,
    StieltjesValue,
    QuantileTable,
    m_sc,
    m_star,
    edge_location,
    spectral_density,
    quantiles,
    rigidity_report,
)
from .resolvent import (
    ResolventProbe,
    probe,
    ward_check,
    local_law_residual,
    entry_law_residual,
    eigvec_link_residual,
    detect_top_from_resolvent,
    resolvent_drift,
    lambda1_drift,
)
from . import experiments
from .experiments.config import SweepConfig

__all__ = [name for name in dir() if not name.startswith("_")]
