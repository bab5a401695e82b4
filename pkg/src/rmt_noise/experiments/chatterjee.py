"""Interpolation estimator for the variance noise-sensitivity bound.

For a function f of an n-vector with i.i.d. components, the quantity

    I_k = E[(f(Y) - f(Y^(j))) (f(Y^sigma[k-1]) - f(Y^(j) o sigma[k-1]))]

with uniform j and uniform permutation sigma satisfies
I_k <= ((n+1)/n) (2 Var f / k).  The vector constructions follow the
four-copy convention: Y^(j) swaps component j for the Y' copy;
Y^(j) o sigma[i-1] starts from Y^sigma[i-1] and swaps component j for Y''
when j already lies in the prefix, and for Y''' otherwise.

The constructions are generic over sequences, so they work on symbolic
tuples as well as on the slot vectors of a sparse matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .._pairs import decode_pair, pair_count
from ..ensemble import EnsembleSpec
from ..errors import ValidationError
from ..rng import (
    EXP_CHATTERJEE,
    ROLE_BASE,
    ROLE_FRESH,
    ROLE_ORDER,
    ROLE_PROBE,
    ROLE_SINGLE,
    ROLE_SINGLE_ALT,
    seed_label,
    substream,
)
from .records import ChatterjeeRecord, mean_se


def sigma_prefix(sigma: Sequence[int], count: int) -> frozenset[int]:
    """The set sigma[count] = {sigma(1), ..., sigma(count)} of 1-based labels."""
    if not 0 <= count <= len(sigma):
        raise ValidationError(f"prefix size {count} outside [0, {len(sigma)}]")
    return frozenset(sigma[:count])


def replace_subset(y: Sequence, y_prime: Sequence, subset) -> tuple:
    """Y^I: components in the 1-based index set I taken from the copy."""
    _check_lengths(y, y_prime)
    subset = set(subset)
    bad = [i for i in subset if not 1 <= i <= len(y)]
    if bad:
        raise ValidationError(f"indices out of range: {sorted(bad)}")
    return tuple(y_prime[i - 1] if i in subset else y[i - 1] for i in range(1, len(y) + 1))


def flip_single(y: Sequence, y_prime: Sequence, j: int) -> tuple:
    """Y^(j): component j (1-based) taken from the copy."""
    return replace_subset(y, y_prime, {j})


def flip_after_prefix(
    y: Sequence,
    y_prime: Sequence,
    y_dprime: Sequence,
    y_tprime: Sequence,
    sigma: Sequence[int],
    prefix: int,
    j: int,
) -> tuple:
    """Y^(j) o sigma[prefix]: resample the prefix, then flip component j.

    The flip uses the third copy when j is inside the prefix set (its value
    there came from Y') and the fourth copy otherwise (its value is still
    the original Y_j).
    """
    _check_lengths(y, y_prime, y_dprime, y_tprime)
    if not 1 <= j <= len(y):
        raise ValidationError(f"component index {j} out of range")
    pref = sigma_prefix(sigma, prefix)
    out = list(replace_subset(y, y_prime, pref))
    out[j - 1] = y_dprime[j - 1] if j in pref else y_tprime[j - 1]
    return tuple(out)


def _check_lengths(*seqs: Sequence) -> None:
    sizes = {len(s) for s in seqs}
    if len(sizes) != 1:
        raise ValidationError(f"copies must share one length, got {sorted(sizes)}")


def chatterjee_bound(var_f: float, n_vars: int, k: int) -> float:
    return (n_vars + 1) / n_vars * 2.0 * var_f / k


def linear_ik_exact(component_var: float, n_vars: int, k: int) -> float:
    """Closed form for f = sum of components: I_k = v (1 - 2(k-1)/n)."""
    return component_var * (1.0 - 2.0 * (k - 1) / n_vars)


@dataclass(frozen=True)
class ChatterjeeReport:
    n_vars: int
    ks: tuple[int, ...]
    estimates: tuple[float, ...]
    ses: tuple[float, ...]
    bounds: tuple[float, ...]
    var_f: float
    f_mean: float
    trials: int


def chatterjee_trial(
    f: Callable[[np.ndarray], float],
    sample_components: Callable[[np.random.Generator, int], np.ndarray],
    n_vars: int,
    ks: Sequence[int],
    trial: int,
    master_seed: int,
) -> ChatterjeeRecord:
    """One interpolation sample, sharing the four copies across the k grid.

    Sharing (Y, Y', Y'', Y''', j, sigma) across k values leaves each I_k
    estimate unbiased and couples their errors, which is what the bound
    comparison wants.
    """
    ks = _check_ks(ks, n_vars)
    key = (EXP_CHATTERJEE, n_vars, trial)
    y = np.asarray(sample_components(substream(master_seed, *key, ROLE_BASE), n_vars))
    y_p = np.asarray(sample_components(substream(master_seed, *key, ROLE_FRESH), n_vars))
    y_dp = np.asarray(sample_components(substream(master_seed, *key, ROLE_SINGLE), n_vars))
    y_tp = np.asarray(sample_components(substream(master_seed, *key, ROLE_SINGLE_ALT), n_vars))
    sigma = substream(master_seed, *key, ROLE_ORDER).permutation(n_vars)
    pos = np.empty(n_vars, dtype=np.int64)
    pos[sigma] = np.arange(n_vars)
    j = int(substream(master_seed, *key, ROLE_PROBE).integers(n_vars))

    f_y = float(f(y))
    flipped = y.copy()
    flipped[j] = y_p[j]
    f_yj = float(f(flipped))
    first = f_y - f_yj
    terms = {}
    for k in ks:
        prefix = sigma[: k - 1]
        y_sig = y.copy()
        y_sig[prefix] = y_p[prefix]
        y_sig_j = y_sig.copy()
        y_sig_j[j] = y_dp[j] if pos[j] < k - 1 else y_tp[j]
        terms[str(k)] = first * float(f(y_sig) - f(y_sig_j))
    return ChatterjeeRecord(
        trial=trial,
        seed=seed_label(master_seed, *key),
        n_vars=n_vars,
        j=j + 1,
        f_y=f_y,
        f_yj=f_yj,
        terms=terms,
    )


def report_from_records(records: Sequence[ChatterjeeRecord],
                        ks: Sequence[int] | None = None) -> ChatterjeeReport:
    if len(records) < 2:
        raise ValidationError("need at least 2 trials")
    n_vars = records[0].n_vars
    if any(r.n_vars != n_vars for r in records):
        raise ValidationError("records mix different variable counts")
    if ks is None:
        ks = sorted(int(k) for k in records[0].terms)
    ks = _check_ks(ks, n_vars)
    f_values = np.asarray([r.f_y for r in records])
    var_f = float(f_values.var(ddof=1))
    stats = [mean_se([r.terms[str(k)] for r in records]) for k in ks]
    return ChatterjeeReport(
        n_vars=n_vars,
        ks=ks,
        estimates=tuple(s[0] for s in stats),
        ses=tuple(s[1] for s in stats),
        bounds=tuple(chatterjee_bound(var_f, n_vars, k) for k in ks),
        var_f=var_f,
        f_mean=float(f_values.mean()),
        trials=len(records),
    )


def chatterjee_ik(
    f: Callable[[np.ndarray], float],
    sample_components: Callable[[np.random.Generator, int], np.ndarray],
    n_vars: int,
    ks: Sequence[int],
    trials: int,
    master_seed: int,
) -> tuple[ChatterjeeReport, list[ChatterjeeRecord]]:
    """Monte Carlo I_k estimates with the lemma's bound per k."""
    ks = _check_ks(ks, n_vars)
    records = [
        chatterjee_trial(f, sample_components, n_vars, ks, trial, master_seed)
        for trial in range(trials)
    ]
    return report_from_records(records, ks), records


def _check_ks(ks: Sequence[int], n_vars: int) -> tuple[int, ...]:
    out = tuple(int(k) for k in ks)
    if not out or any(not 1 <= k <= n_vars for k in out):
        raise ValidationError(f"every k must lie in [1, {n_vars}], got {tuple(ks)!r}")
    return out


def slot_statistic(spec: EnsembleSpec) -> tuple[Callable, Callable, int]:
    """f = lambda_1 - chi over slot vectors, plus the matching sampler.

    Returns (f, sample_components, n_vars) where n_vars = M(n) is the slot
    count.  Any constant recentering L drops out of the I_k differences and
    leaves the variance unchanged.
    """
    n = spec.n
    m = pair_count(n)
    rows, cols = decode_pair(np.arange(m), n)
    off = (rows != cols).astype(float)
    weight = 1.0 + off  # Frobenius weight: 2 off the diagonal, 1 on it
    p = spec.slot_probability

    def f(y: np.ndarray) -> float:
        a = np.zeros((n, n))
        a[rows, cols] = y
        a[cols, rows] = y
        lam1 = float(np.linalg.eigvalsh(a)[-1])
        chi = float((weight * y * y).sum() / n - 1.0)
        return lam1 - chi

    def sample_components(rng: np.random.Generator, size: int) -> np.ndarray:
        live = rng.random(size) < p
        return np.where(live, spec.law.sample(rng, size) / spec.q, 0.0)

    return f, sample_components, m
