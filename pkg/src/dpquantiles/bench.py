"""Experiment runner: repeated trials per (mechanism, m), bootstrap CIs, CSV/JSON output.

Every random choice is derived from the base seed and the trial coordinates,
so the records are a pure function of the configuration and do not depend on
the order in which trials execute.
"""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .baseline_aq import AQBudget, aq_quantiles, calibrate_zcdp
from .continual_counting import TreeMechanismConfig, cc_tail_bound
from .datasets import PreprocessSpec, load_csv, preprocess, quantile_grid, synthesize
from .errors import ConfigError, DPQuantilesError, GapTooSmallError
from .exp_mechanism import SortedDataset, slice_median_param
from .slice_quantiles import (PrivacyBudget, QuantileQuery, SliceParams, good_set_contains, max_rank_error,
                              slice_quantiles)

MECHANISMS = ("slice", "aq-pure", "aq-zcdp")
SCHEMA_VERSION = 1
CSV_FIELDS = ("mechanism", "m", "adjacency", "seed", "max_rank_error", "fallback", "wall_ms")


class AuditFailure(DPQuantilesError):
    """The quantile grid is too dense for the slice mechanism's parameters."""


@dataclass(frozen=True)
class RunConfig:
    """Benchmark configuration; see the README for the JSON schema."""

    dataset: dict
    mechanisms: tuple[str, ...]
    epsilon: float
    delta: float
    adjacency: str
    m_sweep: tuple[int, ...]
    trials: int
    seed: int
    output: str = "results"
    epsilon1: float | None = None
    epsilon2: float | None = None
    beta: float = 0.05
    quantile_count: int = 250
    resample_quantiles: bool = True
    audit: bool = True
    timing: bool = False
    cc_branching: int = 4
    cc_noise: str = "two_sided_geometric"
    bootstrap_resamples: int = 10_000

    REQUIRED = ("dataset", "mechanisms", "epsilon", "delta", "adjacency", "m_sweep", "trials", "seed")

    def __post_init__(self):
        bad = [m for m in self.mechanisms if m not in MECHANISMS]
        if bad or not self.mechanisms:
            raise ConfigError(f"mechanisms must be a non-empty subset of {MECHANISMS}, got {list(self.mechanisms)}")
        if self.adjacency not in ("add_remove", "substitute"):
            raise ConfigError(f"adjacency must be add_remove or substitute, got {self.adjacency!r}")
        if not self.epsilon > 0 or not 0 < self.delta < 1:
            raise ConfigError("need epsilon > 0 and 0 < delta < 1")
        if not self.m_sweep or any(m < 1 or m > self.quantile_count for m in self.m_sweep):
            raise ConfigError(f"every m must lie in [1, quantile_count={self.quantile_count}]")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.bootstrap_resamples < 1000:
            raise ConfigError("bootstrap_resamples must be >= 1000")
        if self.dataset.get("kind") not in ("synthetic", "csv"):
            raise ConfigError("dataset.kind must be 'synthetic' or 'csv'")

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        missing = [k for k in cls.REQUIRED if k not in d]
        if missing:
            raise ConfigError(f"config is missing {missing}")
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config keys {unknown}")
        d = dict(d)
        mech = d["mechanisms"]
        d["mechanisms"] = (mech,) if isinstance(mech, str) else tuple(mech)
        d["m_sweep"] = tuple(int(m) for m in d["m_sweep"])
        d["adjacency"] = str(d["adjacency"]).replace("-", "_")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_json(cls, path) -> "RunConfig":
        try:
            d = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(d)

    def with_overrides(self, **kw) -> "RunConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    @property
    def stage_budgets(self) -> tuple[float, float]:
        e1 = self.epsilon1 if self.epsilon1 is not None else self.epsilon / 2
        e2 = self.epsilon2 if self.epsilon2 is not None else self.epsilon / 2
        return e1, e2


@dataclass(frozen=True)
class TrialRecord:
    mechanism: str
    m: int
    adjacency: str
    seed: int
    max_rank_error: int
    fallback: bool
    wall_ms: float | None = None
    trial: int = field(default=0, compare=False)


def build_dataset(spec: dict) -> SortedDataset:
    bounds = tuple(spec.get("bounds", (0.0, 100.0)))
    seed = int(spec.get("seed", 0))
    if spec["kind"] == "synthetic":
        return synthesize(spec.get("dist", "lognormal"), int(spec["n"]), bounds, seed)
    raw = load_csv(spec["path"], spec.get("column", 0), spec.get("header"))
    pre = PreprocessSpec(float(spec.get("jitter_sigma", 0.01)), int(spec.get("duplication", 10)), bounds, seed)
    return preprocess(raw, pre)


def _mech_index(mechanism: str) -> int:
    return MECHANISMS.index(mechanism)


def trial_seed(base: int, mechanism: str, m: int, trial: int) -> int:
    ss = np.random.SeedSequence([base, _mech_index(mechanism) + 1, m, trial])
    return int(ss.generate_state(1, np.uint64)[0])


def _quantile_rng(base: int, m: int, trial: int) -> np.random.Generator:
    # shared by all mechanisms so they answer the same queries
    return np.random.default_rng([base, 0, m, trial])


@dataclass(frozen=True)
class SliceSetup:
    budget: PrivacyBudget
    cc_config: TreeMechanismConfig
    params: SliceParams
    audit_ok: bool


def slice_setup(config: RunConfig, m: int, n: int, b: float) -> SliceSetup:
    """Parameters of the slice mechanism for one m.

    ``w`` is the tail bound of the configured tree at ``delta``; the audit
    requires the full quantile grid to satisfy the rank requirement, which
    covers every subsample of it.
    """
    e1, e2 = config.stage_budgets
    budget = PrivacyBudget(e1, e2, delta=config.delta, adjacency=config.adjacency)
    cc = TreeMechanismConfig(m, e1, config.cc_branching, config.cc_noise)
    w = cc_tail_bound(cc, config.delta)
    params = SliceParams(w=w, ell=slice_median_param(e2, config.beta, b, 1.0 / n, m))
    grid = QuantileQuery(np.arange(1, config.quantile_count + 1) / (config.quantile_count + 1))
    ok = good_set_contains(grid.ranks(n), grid.m, n, params.require_margin)
    return SliceSetup(budget, cc, params, ok)


def _run_trial(config, X, mechanism, m, trial, Q, setup, rho) -> TrialRecord:
    seed = trial_seed(config.seed, mechanism, m, trial)
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    fallback = False
    if mechanism == "slice":
        try:
            est = slice_quantiles(X, Q, setup.budget, setup.params, rng, cc_config=setup.cc_config)
            z, fallback = est.values, est.failure_flag
        except GapTooSmallError:
            a, b = X.bounds
            z, fallback = rng.uniform(a, b, size=m), True
    elif mechanism == "aq-pure":
        z = aq_quantiles(X, Q, AQBudget("pure", config.epsilon, m), rng=rng)
    else:
        z = aq_quantiles(X, Q, AQBudget("zcdp", rho, m), rng=rng)
    wall = (time.perf_counter() - t0) * 1000 if config.timing else None
    return TrialRecord(mechanism, m, config.adjacency, seed, max_rank_error(X, Q, z), bool(fallback), wall, trial)


def run_experiment(config: RunConfig, X: SortedDataset | None = None) -> list[TrialRecord]:
    """One record per (mechanism, m, trial), in canonical order.

    Raises :class:`AuditFailure` if auditing is on and some m fails the audit.
    """
    X = build_dataset(config.dataset) if X is None else X
    n, b = X.n, X.bounds[1]
    rho = calibrate_zcdp(config.epsilon, config.delta)
    records = []
    for mechanism in sorted(set(config.mechanisms)):
        for m in sorted(set(config.m_sweep)):
            setup = slice_setup(config, m, n, b) if mechanism == "slice" else None
            if setup is not None and config.audit and not setup.audit_ok:
                raise AuditFailure(
                    f"m={m}: grid of {config.quantile_count} quantiles on n={n} is too dense for "
                    f"w={setup.params.w}, h={setup.params.h}"
                )
            fixed = None if config.resample_quantiles else quantile_grid(
                config.quantile_count, m, _quantile_rng(config.seed, m, 2**32 - 1))
            for trial in range(config.trials):
                Q = fixed if fixed is not None else quantile_grid(config.quantile_count, m, _quantile_rng(config.seed, m, trial))
                records.append(_run_trial(config, X, mechanism, m, trial, Q, setup, rho))
    return records


def bootstrap_ci(samples, level: float = 0.95, resamples: int = 10_000,
                 rng: np.random.Generator | None = None) -> tuple[float, float]:
    """Percentile bootstrap interval for the mean."""
    x = np.asarray(samples, dtype=np.float64)
    if x.size == 0:
        raise ValueError("samples must be non-empty")
    if resamples < 1000:
        raise ValueError("resamples must be >= 1000")
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    rng = np.random.default_rng() if rng is None else rng
    means = np.empty(resamples)
    chunk = max(1, 2_000_000 // x.size)
    for start in range(0, resamples, chunk):
        stop = min(resamples, start + chunk)
        idx = rng.integers(0, x.size, size=(stop - start, x.size))
        means[start:stop] = x[idx].mean(axis=1)
    tail = (1 - level) / 2 * 100
    lo, hi = np.percentile(means, [tail, 100 - tail])
    mean = x.mean()
    return float(min(lo, mean)), float(max(hi, mean))


def summarize(records, base_seed: int = 0, resamples: int = 10_000) -> dict:
    groups: dict[tuple[str, int], list[TrialRecord]] = {}
    for r in records:
        groups.setdefault((r.mechanism, r.m), []).append(r)
    runs = []
    for (mech, m), rs in sorted(groups.items()):
        errs = [r.max_rank_error for r in rs]
        rng = np.random.default_rng([base_seed, _mech_index(mech) + 1, m, 2**32 - 1])
        lo, hi = bootstrap_ci(errs, resamples=resamples, rng=rng)
        runs.append({
            "mechanism": mech,
            "m": m,
            "mean": float(np.mean(errs)),
            "ci_lo": lo,
            "ci_hi": hi,
            "fallback_rate": float(np.mean([r.fallback for r in rs])),
            "trials": len(rs),
        })
    return {"schema_version": SCHEMA_VERSION, "runs": runs}


def records_to_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in records:
        w.writerow([r.mechanism, r.m, r.adjacency, r.seed, r.max_rank_error, int(r.fallback),
                    "" if r.wall_ms is None else f"{r.wall_ms:.3f}"])
    return buf.getvalue()


def read_records(path) -> list[TrialRecord]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            out.append(TrialRecord(row["mechanism"], int(row["m"]), row["adjacency"], int(row["seed"]),
                                   int(row["max_rank_error"]), row["fallback"] == "1",
                                   float(row["wall_ms"]) if row["wall_ms"] else None))
    return out


def emit_results(records, out_dir, base_seed: int = 0, resamples: int = 10_000) -> tuple[Path, Path]:
    """Write ``records.csv`` and ``summary.json`` into ``out_dir``."""
    if not records:
        raise ValueError("no records to write")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path, json_path = out / "records.csv", out / "summary.json"
    csv_path.write_text(records_to_csv(records), encoding="utf-8")
    summary = summarize(records, base_seed, resamples)
    json_path.write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    return csv_path, json_path


def config_dict(config: RunConfig) -> dict:
    return asdict(config)
