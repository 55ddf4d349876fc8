"""Monte Carlo harness: rates, equivalence of the constrained estimators,
finite-n versus limit laws, and the local empirical process.

Every replication draws its sample from a seed hashed from
(master seed, experiment id, n, replication), so results do not depend on
execution order or on the number of worker processes.
"""
from __future__ import annotations

import csv
import dataclasses
import functools
import hashlib
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import ks_2samp

from . import __version__
from .cylinder import DriftSpec, IntervalShifts, RadialGraph, magnify, m_measure
from .errors import (
    InsufficientDraws,
    LevelSetError,
    OutputExists,
    UnsupportedBody,
    ValidationError,
)
from .estimators import (
    ExcessMass,
    MaxProb,
    MaxProbEqualVol,
    MinVolume,
    SearchConfig,
    estimate,
    required_count,
)
from .geometry import Ball, Interval, hausdorff_distance, sym_diff_volume
from .limit import WienerGrid, draw_Z_interval, draw_Z_interval_constrained, z_distribution
from .models import builtin_model, probability, probability_symdiff

SCHEMA_VERSION = 1
RECORD_FIELDS = ("experiment_id", "n", "rep", "estimator", "mu_symdiff", "p_symdiff", "hausdorff",
                 "m_magnified", "pair_mu")
ESTIMATORS = ("excess-mass", "min-volume", "max-prob", "max-prob-equal-vol")
KS_THRESHOLD = 0.1
MIN_KS_SAMPLE = 100


def estimator_kind(name: str, model):
    o = model.oracle
    kinds = {
        "excess-mass": lambda: ExcessMass(o.lam),
        "min-volume": lambda: MinVolume(o.p_lambda),
        "max-prob": lambda: MaxProb(o.v_lambda),
        "max-prob-equal-vol": lambda: MaxProbEqualVol(o.v_lambda),
    }
    if name not in kinds:
        raise ValidationError(f"unknown estimator {name!r}; choose from {', '.join(ESTIMATORS)}")
    return kinds[name]()


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment. The magnification scale is always n^(-1/3)."""

    model: str = "triangular1d"
    lam: float = 0.5
    estimators: tuple = ("excess-mass", "min-volume", "max-prob")
    set_class: str = "intervals"
    n_grid: tuple = (1000, 8000, 64000)
    replications: int = 500
    seed: int = 0
    experiment_id: str = "rates"
    limit_draws: int = 10_000
    limit_step: float = 0.01
    limit_c_max: float = 8.0
    search_restarts: int = 16
    output_dir: str | None = None
    force: bool = False

    def __post_init__(self):
        object.__setattr__(self, "estimators", tuple(self.estimators))
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        if self.replications < 1:
            raise ValidationError("replications must be at least 1")
        if not self.n_grid or any(n < 1 for n in self.n_grid):
            raise ValidationError("n_grid must hold positive sample sizes")
        if any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ValidationError("n_grid must be strictly increasing")
        if not self.estimators:
            raise ValidationError("at least one estimator is required")
        for name in self.estimators:
            if name not in ESTIMATORS:
                raise ValidationError(f"unknown estimator {name!r}")
        model = self.build_model()
        want = ("intervals",) if model.dimension == 1 else ("balls", "ellipsoids")
        if self.set_class not in want:
            raise ValidationError(f"model {self.model} needs set class in {want}, got {self.set_class!r}")

    def build_model(self):
        return builtin_model(self.model, self.lam)

    @staticmethod
    def eps(n: int) -> float:
        return n ** (-1.0 / 3.0)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["estimators"] = list(self.estimators)
        d["n_grid"] = list(self.n_grid)
        d.pop("output_dir")
        d.pop("force")
        return d

    def config_hash(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


def replication_seed(seed: int, experiment_id: str, n: int, rep: int) -> int:
    digest = hashlib.blake2b(f"{seed}|{experiment_id}|{n}|{rep}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big")


@dataclass
class RateRecord:
    experiment_id: str
    n: int
    rep: int
    estimator: str
    mu_symdiff: float
    p_symdiff: float
    hausdorff: float
    m_magnified: float
    pair_mu: float
    # audit fields, kept in memory and summarised but not written to records.csv
    count: int = field(default=0, repr=False)
    volume: float = field(default=0.0, repr=False)

    def row(self) -> list:
        out = []
        for name in RECORD_FIELDS:
            v = getattr(self, name)
            out.append(repr(float(v)) if isinstance(v, float) else str(v))
        return out


def _replicate(config: ExperimentConfig, n: int, rep: int) -> list:
    model = config.build_model()
    L = model.oracle.body
    eps = config.eps(n)
    x = model.sample(n, replication_seed(config.seed, config.experiment_id, n, rep))
    cls = "balls" if config.set_class == "intervals" else config.set_class
    search = SearchConfig(restarts=config.search_restarts, seed=replication_seed(config.seed, "search", n, rep) % 2**32)
    sets, records = {}, []
    try:
        for name in config.estimators:
            res = estimate(x, estimator_kind(name, model), cls, search)
            A = res.set
            sets[name] = A
            records.append(RateRecord(
                config.experiment_id, n, rep, name,
                mu_symdiff=float(sym_diff_volume(A, L)),
                p_symdiff=float(probability_symdiff(model, A)),
                hausdorff=float(hausdorff_distance(A, L)),
                m_magnified=float(m_measure(magnify(L, A, eps))),
                pair_mu=math.nan,
                count=int(res.empirical_mass * n),
                volume=float(A.volume),
            ))
        if "min-volume" in sets and "max-prob" in sets:
            pair = float(sym_diff_volume(sets["min-volume"], sets["max-prob"]))
            for r in records:
                r.pair_mu = pair
    except LevelSetError as exc:
        raise type(exc)(f"n={n}, replication={rep}: {exc}") from exc
    return records


def _replicate_job(args):
    return _replicate(*args)


def _map(jobs, workers):
    if workers is None or workers <= 1:
        return [_replicate_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_replicate_job, jobs, chunksize=max(1, len(jobs) // (8 * workers))))


def records_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RECORD_FIELDS)
    for r in records:
        w.writerow(r.row())
    return buf.getvalue()


def _median(values) -> float:
    values = np.asarray(values, dtype=float)
    return float(np.median(values)) if values.size else math.nan


def feasibility_audit(records, config: ExperimentConfig) -> dict:
    """Count constraint violations: exact count for min-volume, volume cap for max-prob."""
    o = config.build_model().oracle
    count_bad = sum(1 for r in records if r.estimator == "min-volume" and r.count != required_count(r.n, o.p_lambda))
    vol_bad = sum(1 for r in records if r.estimator == "max-prob" and r.volume > o.v_lambda)
    checked = sum(1 for r in records if r.estimator in ("min-volume", "max-prob"))
    return {"records_checked": checked, "min_volume_count_violations": count_bad,
            "max_prob_volume_violations": vol_bad, "pass": count_bad == 0 and vol_bad == 0}


def rate_summary(records, config: ExperimentConfig) -> dict:
    by = {}
    for name in config.estimators:
        rows = []
        for n in config.n_grid:
            mu = [r.mu_symdiff for r in records if r.estimator == name and r.n == n]
            mm = [r.m_magnified for r in records if r.estimator == name and r.n == n]
            med = _median(mu)
            rows.append({"n": n, "median_mu_symdiff": med,
                         "median_normalized": med * n ** (1 / 3),
                         "q90_normalized": float(np.quantile(mu, 0.9)) * n ** (1 / 3) if mu else math.nan,
                         "median_m_magnified": _median(mm)})
        meds = [row["median_mu_symdiff"] for row in rows]
        norm = [row["median_normalized"] for row in rows]
        factors = [a / b if b > 0 else math.inf for a, b in zip(meds, meds[1:])]
        band = max(norm) / min(norm) if min(norm) > 0 else math.inf
        by[name] = {
            "per_n": rows,
            "shrink_factors": factors,
            "normalized_band": band,
            "rate_pass": bool(factors) and all(1.6 <= f <= 2.6 for f in factors) and band <= 1.5,
        }
    return by


def equivalence_summary(records, config: ExperimentConfig) -> dict:
    """Median and 0.9-quantile of n^(1/3) mu(L2 symdiff L3) per n, with the pass rule."""
    rows = []
    for n in config.n_grid:
        vals = np.array([r.pair_mu for r in records if r.n == n and r.estimator == "min-volume"])
        vals = vals[np.isfinite(vals)] * n ** (1 / 3)
        rows.append({"n": n, "median": _median(vals),
                     "q90": float(np.quantile(vals, 0.9)) if vals.size else math.nan})
    meds = [row["median"] for row in rows]
    monotone = all(b < a for a, b in zip(meds, meds[1:]))
    drop = meds[0] / meds[-1] if meds[-1] > 0 else math.inf
    return {"per_n": rows, "monotone": monotone, "overall_drop": drop,
            "pass": bool(monotone and drop >= 1.5 and len(meds) > 1)}


def _write_outputs(config: ExperimentConfig, files: dict):
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name in files:
        if (out / name).exists() and not config.force:
            raise OutputExists(f"{out / name} exists; pass force to overwrite")
    for name, text in files.items():
        (out / name).write_text(text)


def _manifest(config: ExperimentConfig, records_text: str) -> str:
    return json.dumps({
        "schema_version": SCHEMA_VERSION,
        "tool_version": __version__,
        "experiment_id": config.experiment_id,
        "seed": config.seed,
        "config": config.to_dict(),
        "config_hash": config.config_hash(),
        "content_hash": hashlib.sha256(records_text.encode()).hexdigest(),
        "record_fields": list(RECORD_FIELDS),
    }, indent=2, sort_keys=True) + "\n"


def collect_records(config: ExperimentConfig, workers: int | None = 1) -> list:
    jobs = [(config, n, rep) for n in config.n_grid for rep in range(config.replications)]
    return [r for batch in _map(jobs, workers) for r in batch]


def run_rates(config: ExperimentConfig, workers: int | None = 1, extra_summary: dict | None = None):
    """Run every (n, replication) cell; write records, manifest and summary if an output dir is set."""
    records = collect_records(config, workers)
    summary = {"rates": rate_summary(records, config), "feasibility": feasibility_audit(records, config)}
    if "min-volume" in config.estimators and "max-prob" in config.estimators:
        summary["equivalence"] = equivalence_summary(records, config)
    if extra_summary:
        summary.update(extra_summary)
    if config.output_dir is not None:
        text = records_csv(records)
        _write_outputs(config, {
            "records.csv": text,
            "manifest.json": _manifest(config, text),
            "summary.json": json.dumps(summary, indent=2, sort_keys=True) + "\n",
        })
    return records, summary


def run_equivalence(config: ExperimentConfig, workers: int | None = 1, records=None) -> dict:
    """Equivalence summary for L2/L3; runs the Monte Carlo unless ``records`` are supplied."""
    if records is None:
        cfg = dataclasses.replace(config, estimators=("min-volume", "max-prob"))
        records, summary = run_rates(cfg, workers)
        return summary["equivalence"]
    return equivalence_summary(records, config)


def ks_statistic(a, b) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.size < MIN_KS_SAMPLE or b.size < MIN_KS_SAMPLE:
        raise InsufficientDraws(f"KS comparison needs >= {MIN_KS_SAMPLE} values per side, got {a.size} and {b.size}")
    return float(ks_2samp(a, b).statistic)


def limit_samples(config: ExperimentConfig, constrained: bool, workers: int | None = 1) -> np.ndarray:
    model = config.build_model()
    if model.dimension != 1:
        raise UnsupportedBody("the limit comparison is implemented for 1D models")
    op = draw_Z_interval_constrained if constrained else draw_Z_interval
    grid = WienerGrid(config.limit_step, config.limit_c_max)
    draw = functools.partial(op, DriftSpec.from_model(model), model.lam, grid)
    seed = replication_seed(config.seed, "limit-constrained" if constrained else "limit", 0, 0)
    return np.sort(z_distribution(draw, config.limit_draws, seed, workers).values("M_total"))


def run_limit_comparison(config: ExperimentConfig, workers: int | None = 1, records=None) -> dict:
    """KS distances between magnified finite-n sets at the largest n and the limit laws.

    Excess mass is compared with the free argmax set, min-volume and max-prob
    with the balanced one; min-volume against the free law is reported as a
    contrast.
    """
    if records is None:
        records = collect_records(dataclasses.replace(config, n_grid=(config.n_grid[-1],)), workers)
    n = max(r.n for r in records)
    free = limit_samples(config, False, workers)
    balanced = limit_samples(config, True, workers)

    def finite(name):
        return np.sort([r.m_magnified for r in records if r.n == n and r.estimator == name])

    out = {"n": n, "threshold": KS_THRESHOLD, "samples": {"Z_free": free.tolist(), "Z_balanced": balanced.tolist()}}
    pairs = {"excess-mass": ("ks_excess_mass_vs_free", free), "min-volume": ("ks_min_volume_vs_balanced", balanced),
             "max-prob": ("ks_max_prob_vs_balanced", balanced)}
    for name, (key, ref) in pairs.items():
        if name in config.estimators:
            sample = finite(name)
            out[key] = ks_statistic(sample, ref)
            out["samples"][name] = sample.tolist()
    if "min-volume" in config.estimators:
        out["ks_min_volume_vs_free"] = ks_statistic(finite("min-volume"), free)
    checked = [k for k in ("ks_excess_mass_vs_free", "ks_min_volume_vs_balanced") if k in out]
    out["pass"] = all(out[k] <= KS_THRESHOLD for k in checked)
    return out


def boundary_process(sample, model, B, eps: float) -> float:
    """Local empirical process: n^(2/3) [(P_n - P)(outer part) - (P_n - P)(inner part)].

    The outer and inner parts are the preimages of the s > 0 and s <= 0 parts of B.
    """
    x = np.asarray(sample, dtype=float)
    n = x.shape[0]
    L = model.oracle.body
    if isinstance(B, IntervalShifts):
        x = x.reshape(-1)
        pieces = {+1: [], -1: []}
        for t, edge, out_dir in ((B.t_left, L.a, -1.0), (B.t_right, L.b, 1.0)):
            if t == 0:
                continue
            far = edge + out_dir * eps * t
            lo, hi = min(edge, far), max(edge, far)
            pieces[1 if t > 0 else -1].append((lo, hi))

        def part(sign):
            # boundary points carry no mass, so closed pieces are used throughout
            return sum(np.mean((x >= lo) & (x <= hi)) - probability(model, Interval(lo, hi))
                       for lo, hi in pieces[sign])

        return n ** (2 / 3) * (part(+1) - part(-1))
    if isinstance(B, RadialGraph):
        if not (isinstance(L, Ball) and np.allclose(L.c, 0.0) and model.radial_mass is not None):
            raise UnsupportedBody("planar boundary process needs a radial model with a centred disc level set")
        r, G = L.radius, B.theta.size
        rho = np.hypot(x[:, 0], x[:, 1])
        ang = np.mod(np.arctan2(x[:, 1], x[:, 0]), 2 * math.pi)
        cell = np.minimum((ang / (2 * math.pi) * G).round().astype(int) % G, G - 1)
        s = (rho - r) / eps
        h = B.h[cell]
        outer = (s > 0) & (s <= h)
        inner = (s <= 0) & (s > h)
        Gm = model.radial_mass
        dth = 2 * math.pi / G
        p_out = float(np.sum(np.where(B.h > 0, Gm(r + eps * np.clip(B.h, 0, None)) - Gm(r), 0.0)) * dth)
        p_in = float(np.sum(np.where(B.h < 0, Gm(r) - Gm(r + eps * np.clip(B.h, None, 0)), 0.0)) * dth)
        return n ** (2 / 3) * ((outer.mean() - p_out) - (inner.mean() - p_in))
    raise ValidationError("boundary process needs a parametric cylinder set")


def default_workers() -> int:
    env = os.environ.get("LEVELSET_WORKERS")
    if env:
        try:
            value = int(env)
        except ValueError:
            raise ValidationError(f"LEVELSET_WORKERS must be an integer, got {env!r}") from None
        if value < 1:
            raise ValidationError("LEVELSET_WORKERS must be at least 1")
        return value
    return os.cpu_count() or 1
