"""Experiment configuration.

One config type drives every study; each command reads the fields it needs.
Configs are value objects: the canonical JSON form is hashed and stamped into
every artifact so records can be traced back to the exact run parameters.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields

from .._pairs import pair_count
from ..ensemble import LAW_KINDS, EntryLaw, EnsembleSpec
from ..errors import ValidationError

# Exponent grid bracketing the sensitivity threshold, denser near 5/3.
DEFAULT_ALPHAS = (1.2, 1.4, 1.5, 1.6, 1.667, 1.75, 1.85, 1.95)

_U64_MAX = 2**64 - 1
_MODELS = ("centered-sparse", "er-adjacency")


def parse_q_rule(rule: str | float, n: int) -> float:
    """Evaluate a sparsity rule, either a constant or ``N^beta``."""
    if isinstance(rule, (int, float)):
        return float(rule)
    text = rule.strip()
    if text.upper().startswith("N^"):
        expo = text[2:]
        if "/" in expo:
            num, den = expo.split("/", 1)
            beta = float(num) / float(den)
        else:
            beta = float(expo)
        return float(n) ** beta
    return float(text)


@dataclass(frozen=True)
class SweepConfig:
    """Parameters of a Monte Carlo study.

    ``alphas`` and ``extra_ks`` define the resampling grid k = round(N^alpha)
    plus explicit values, deduplicated and capped at the slot count M(N).
    ``eigen_index`` is 1-based; the string "last" tracks the bottom
    eigenvector.  ``batch`` sets the resumable work-unit size in trials.
    """

    master_seed: int
    ns: tuple[int, ...]
    trials: int
    q_rule: str | float = "N^1/3"
    alphas: tuple[float, ...] = DEFAULT_ALPHAS
    extra_ks: tuple[int, ...] = ()
    include_zero: bool = True
    include_full: bool = False
    model: str = "centered-sparse"
    law: str = "rademacher"
    eigen_index: int | str = 1
    deltas: tuple[float, ...] = (0.1, 0.3, 1.0)
    window_delta: float = 0.05
    batch: int = 10

    def __post_init__(self) -> None:
        problems = []
        if not isinstance(self.master_seed, int) or not 0 <= self.master_seed <= _U64_MAX:
            problems.append(f"master_seed: need an unsigned 64-bit integer, got {self.master_seed!r}")
        if not self.ns or any(not isinstance(n, int) or n < 2 for n in self.ns):
            problems.append(f"ns: need a nonempty list of sizes >= 2, got {self.ns!r}")
        if len(set(self.ns)) != len(self.ns):
            problems.append(f"ns: duplicate sizes in {self.ns!r}")
        if not isinstance(self.trials, int) or self.trials < 1:
            problems.append(f"trials: need a count >= 1, got {self.trials!r}")
        try:
            for n in self.ns or (16,):
                q = parse_q_rule(self.q_rule, n)
                if not q > 0.0:
                    raise ValueError(q)
        except (TypeError, ValueError):
            problems.append(f"q_rule: need a positive constant or 'N^beta', got {self.q_rule!r}")
        if any(a <= 0 for a in self.alphas):
            problems.append(f"alphas: exponents must be positive, got {self.alphas!r}")
        if any(not isinstance(k, int) or k < 0 for k in self.extra_ks):
            problems.append(f"extra_ks: need nonnegative integers, got {self.extra_ks!r}")
        if self.model not in _MODELS:
            problems.append(f"model: expected one of {_MODELS}, got {self.model!r}")
        if self.law not in LAW_KINDS:
            problems.append(f"law: expected one of {LAW_KINDS}, got {self.law!r}")
        if self.eigen_index != "last" and (not isinstance(self.eigen_index, int) or self.eigen_index < 1):
            problems.append(f"eigen_index: need a 1-based index or 'last', got {self.eigen_index!r}")
        if any(d <= 0 for d in self.deltas):
            problems.append(f"deltas: gap-tail thresholds must be positive, got {self.deltas!r}")
        if not 0.0 < self.window_delta < 0.5:
            problems.append(f"window_delta: need an exponent in (0, 0.5), got {self.window_delta!r}")
        if not isinstance(self.batch, int) or self.batch < 1:
            problems.append(f"batch: need a count >= 1, got {self.batch!r}")
        if problems:
            raise ValidationError("invalid config: " + "; ".join(problems))

    def q_for(self, n: int) -> float:
        return parse_q_rule(self.q_rule, n)

    def spec_for(self, n: int) -> EnsembleSpec:
        return EnsembleSpec(n=n, q=self.q_for(n), law=EntryLaw(self.law), model=self.model)

    def index_for(self, n: int) -> int:
        idx = n if self.eigen_index == "last" else int(self.eigen_index)
        if not 1 <= idx <= n:
            raise ValidationError(f"eigen_index {self.eigen_index!r} out of range for n={n}")
        return idx

    def ks_for(self, n: int) -> tuple[int, ...]:
        """Resampling grid for one size, capped at the slot count."""
        m = pair_count(n)
        grid = set()
        if self.include_zero:
            grid.add(0)
        for alpha in self.alphas:
            grid.add(min(int(round(float(n) ** alpha)), m))
        for k in self.extra_ks:
            grid.add(min(k, m))
        if self.include_full:
            grid.add(m)
        return tuple(sorted(grid))

    def batches_for(self) -> tuple[tuple[int, int, int], ...]:
        """Work units (n, trial_lo, trial_hi) covering the whole run."""
        out = []
        for n in self.ns:
            for lo in range(0, self.trials, self.batch):
                out.append((n, lo, min(lo + self.batch, self.trials)))
        return tuple(out)

    def canonical(self) -> dict:
        obj = asdict(self)
        for f in fields(self):
            if isinstance(obj[f.name], tuple):
                obj[f.name] = list(obj[f.name])
        return obj

    def to_json(self) -> str:
        return json.dumps(self.canonical(), sort_keys=True, indent=2) + "\n"

    def config_hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def config_from_dict(obj: dict) -> SweepConfig:
    if not isinstance(obj, dict):
        raise ValidationError(f"config must be a JSON object, got {type(obj).__name__}")
    known = {f.name for f in fields(SweepConfig)}
    unknown = sorted(set(obj) - known)
    if unknown:
        raise ValidationError("invalid config: unknown keys: " + ", ".join(unknown))
    kwargs = dict(obj)
    for name in ("ns", "alphas", "extra_ks", "deltas"):
        if name in kwargs:
            if not isinstance(kwargs[name], (list, tuple)):
                raise ValidationError(f"invalid config: {name} must be a list")
            kwargs[name] = tuple(kwargs[name])
    return SweepConfig(**kwargs)


def read_config(path: str) -> SweepConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config file {path}: not valid JSON ({exc})") from None
    return config_from_dict(obj)
