"""Simulated tomography experiments: trials, coverage statistics, volumes.

A trial draws a true state from the prior, feeds ``measurements`` random
Pauli outcomes through the particle filter, and at every checkpoint builds
the requested regions and records whether they contain the truth.
"""
from __future__ import annotations

import dataclasses
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator

import numpy as np
from scipy import optimize, stats

from .geometry import DegenerateEllipsoidError, DegenerateHullError, convex_hull_2d
from .inference import (
    ParticleCloud,
    ResampleConfig,
    bayes_update,
    init_cloud,
    maybe_resample,
    posterior_mean,
)
from .models import Model, random_control, sample_prior, simulate_outcome
from .regions import (
    AUTO,
    RegionEstimate,
    RegionKind,
    check_alpha,
    clustered_region,
    hpd_particle_set,
    marginal_region,
    mvee_region,
    pce_region,
    region_contains,
    region_volume,
)

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

__all__ = [
    "ConfigError",
    "TrialError",
    "ExperimentConfig",
    "RegionSummary",
    "CheckpointRecord",
    "TrialRecord",
    "CoverageEntry",
    "RelativeSizeEntry",
    "CoverageSummary",
    "default_checkpoints",
    "load_config",
    "config_from_dict",
    "run_trial",
    "run_experiment",
    "summarize",
    "beta_hpd_interval",
    "simulate_demo",
]

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


class TrialError(RuntimeError):
    def __init__(self, trial_id: int, cause: BaseException):
        super().__init__(f"trial {trial_id} failed: {type(cause).__name__}: {cause}")
        self.trial_id = trial_id


# ---------------------------------------------------------------------------
# configuration


def default_checkpoints(measurements: int) -> list[int]:
    """1, 2, 5, 10, 20, 50, ... up to and including ``measurements``."""
    out = []
    decade = 1
    while decade <= measurements:
        out.extend(c for c in (decade, 2 * decade, 5 * decade) if c <= measurements)
        decade *= 10
    if measurements >= 1 and measurements not in out:
        out.append(measurements)
    return sorted(set(out))


@dataclass(frozen=True)
class ExperimentConfig:
    model: Model = field(default_factory=Model)
    particles: int = 5000
    measurements: int = 100
    trials: int = 50
    alpha: float = 0.05
    resample: ResampleConfig = field(default_factory=ResampleConfig)
    mvee_tolerance: float = 1e-6
    dbscan_eps: float | str = AUTO
    dbscan_min_pts: int | str = AUTO
    kinds: tuple[str, ...] = ("pce", "mvee")
    checkpoints: tuple[int, ...] | None = None
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.particles < 1 or self.trials < 1:
            raise ConfigError("particles and trials must be >= 1")
        if self.measurements < 0:
            raise ConfigError("measurements must be >= 0")
        try:
            check_alpha(self.alpha)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.mvee_tolerance <= 0:
            raise ConfigError("mvee_tolerance must be positive")
        kinds = tuple(str(k).lower() for k in self.kinds)
        for k in kinds:
            if k not in {r.value for r in RegionKind}:
                raise ConfigError(f"unknown region kind {k!r}")
        if not kinds:
            raise ConfigError("at least one region kind is required")
        object.__setattr__(self, "kinds", kinds)
        cps = self.checkpoints
        if cps is None:
            cps = default_checkpoints(self.measurements) or [0]
        cps = tuple(sorted({int(c) for c in cps}))
        if not cps or cps[0] < 0 or cps[-1] > self.measurements:
            raise ConfigError(f"checkpoints {list(cps)} must lie in [0, {self.measurements}]")
        object.__setattr__(self, "checkpoints", cps)
        if isinstance(self.dbscan_eps, str) and self.dbscan_eps.lower() != AUTO:
            raise ConfigError("dbscan eps must be a positive number or 'auto'")
        if not isinstance(self.dbscan_eps, str) and self.dbscan_eps <= 0:
            raise ConfigError("dbscan eps must be positive")
        if isinstance(self.dbscan_min_pts, str) and self.dbscan_min_pts.lower() != AUTO:
            raise ConfigError("dbscan min_pts must be a positive integer or 'auto'")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def to_dict(self) -> dict[str, Any]:
        m = self.model
        model: dict[str, Any] = {"kind": m.kind, "qubits": m.qubits}
        if m.visibility is not None:
            model["visibility"] = m.visibility
        if m.visibility_interval is not None:
            model["visibility_interval"] = list(m.visibility_interval)
        return {
            "seed": self.seed,
            "particles": self.particles,
            "measurements": self.measurements,
            "trials": self.trials,
            "alpha": self.alpha,
            "kinds": list(self.kinds),
            "checkpoints": list(self.checkpoints),
            "mvee_tolerance": self.mvee_tolerance,
            "workers": self.workers,
            "model": model,
            "resample": dataclasses.asdict(self.resample),
            "dbscan": {"eps": self.dbscan_eps, "min_pts": self.dbscan_min_pts},
        }


_TOP_KEYS = {
    "seed", "particles", "measurements", "trials", "alpha", "kinds", "checkpoints",
    "mvee_tolerance", "workers", "model", "resample", "dbscan",
}
_MODEL_KEYS = {"kind", "qubits", "visibility", "visibility_interval"}
_RESAMPLE_KEYS = {"ess_threshold_fraction", "liu_west_a", "max_validity_rejections"}
_DBSCAN_KEYS = {"eps", "min_pts"}


def _reject_unknown(section: str, given: dict, allowed: set):
    extra = sorted(set(given) - allowed)
    if extra:
        raise ConfigError(f"unknown key(s) in {section}: {', '.join(extra)}")


def config_from_dict(raw: dict[str, Any]) -> ExperimentConfig:
    _reject_unknown("config", raw, _TOP_KEYS)
    raw = dict(raw)
    try:
        model_raw = dict(raw.pop("model", {}))
        _reject_unknown("[model]", model_raw, _MODEL_KEYS)
        if "visibility_interval" in model_raw:
            model_raw["visibility_interval"] = tuple(model_raw["visibility_interval"])
        model = Model(**model_raw)
        res_raw = dict(raw.pop("resample", {}))
        _reject_unknown("[resample]", res_raw, _RESAMPLE_KEYS)
        resample = ResampleConfig(**res_raw)
        db_raw = dict(raw.pop("dbscan", {}))
        _reject_unknown("[dbscan]", db_raw, _DBSCAN_KEYS)
        kw = dict(raw)
        if "kinds" in kw:
            kw["kinds"] = tuple(kw["kinds"])
        if "checkpoints" in kw:
            kw["checkpoints"] = tuple(kw["checkpoints"])
        return ExperimentConfig(
            model=model,
            resample=resample,
            dbscan_eps=db_raw.get("eps", AUTO),
            dbscan_min_pts=db_raw.get("min_pts", AUTO),
            **kw,
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(raw)


# ---------------------------------------------------------------------------
# records


def _floats(a) -> list:
    return np.asarray(a, dtype=float).tolist()


@dataclass
class RegionSummary:
    kind: str
    alpha: float
    components: list[dict[str, list]]
    volume: float | None
    contains: bool
    state_contains: bool | None = None
    state_volume: float | None = None
    eta_contains: bool | None = None
    eta_volume: float | None = None

    @classmethod
    def from_region(cls, region: RegionEstimate) -> "RegionSummary":
        comps = [{"center": _floats(e.center), "shape": _floats(e.shape)} for e in region.components]
        return cls(region.kind.value, region.alpha, comps, _volume_or_none(region), False)


@dataclass
class CheckpointRecord:
    checkpoint: int
    mean: list[float]
    regions: list[RegionSummary]


@dataclass
class TrialRecord:
    trial_id: int
    seed: list[int]
    truth: list[float]
    checkpoints: list[CheckpointRecord]

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "TrialRecord":
        cps = [
            CheckpointRecord(c["checkpoint"], c["mean"], [RegionSummary(**r) for r in c["regions"]])
            for c in d["checkpoints"]
        ]
        return cls(d["trial_id"], list(d["seed"]), d["truth"], cps)


def _volume_or_none(region: RegionEstimate) -> float | None:
    try:
        return region_volume(region)
    except DegenerateEllipsoidError:
        return None


# ---------------------------------------------------------------------------
# trials


def _trial_rng(cfg: ExperimentConfig, trial_id: int) -> np.random.Generator:
    return np.random.default_rng([cfg.seed, trial_id])


def _trial_steps(cfg: ExperimentConfig, trial_id: int) -> Iterator[tuple[int, ParticleCloud, np.ndarray]]:
    """Yield ``(checkpoint, cloud, truth)`` at each checkpoint of one trial."""
    model = cfg.model
    rng = _trial_rng(cfg, trial_id)
    truth = sample_prior(model, rng)
    cloud = init_cloud(model, cfg.particles, rng)
    wanted = set(cfg.checkpoints)
    if 0 in wanted:
        yield 0, cloud, truth
    for t in range(1, cfg.measurements + 1):
        datum = simulate_outcome(model, truth, random_control(model, rng), rng)
        cloud = bayes_update(cloud, model, datum)
        # regions are read off before resampling so the weights still rank
        # the particles by posterior density
        if t in wanted:
            yield t, cloud, truth
        cloud = maybe_resample(cloud, model, cfg.resample, rng)


def build_region(cfg: ExperimentConfig, cloud: ParticleCloud, kind: str) -> RegionEstimate:
    labels = cfg.model.labels
    if kind == RegionKind.PCE.value:
        return pce_region(cloud, cfg.alpha, labels)
    if kind == RegionKind.MVEE.value:
        return mvee_region(cloud, cfg.alpha, cfg.mvee_tolerance, labels)
    min_pts = None if isinstance(cfg.dbscan_min_pts, str) else int(cfg.dbscan_min_pts)
    return clustered_region(cloud, cfg.alpha, cfg.dbscan_eps, min_pts, cfg.mvee_tolerance, labels)


def _summarize_region(cfg: ExperimentConfig, region: RegionEstimate, truth: np.ndarray) -> RegionSummary:
    s = RegionSummary.from_region(region)
    s.contains = region_contains(region, truth)
    model = cfg.model
    if model.estimates_visibility:
        state = marginal_region(region, model.state_coords)
        eta = marginal_region(region, model.visibility_coords)
        s.state_contains = region_contains(state, truth[model.state_coords])
        s.state_volume = _volume_or_none(state)
        s.eta_contains = region_contains(eta, truth[model.visibility_coords])
        s.eta_volume = _volume_or_none(eta)
    return s


def run_trial(cfg: ExperimentConfig, trial_id: int) -> TrialRecord:
    """One simulated experiment; a pure function of ``(cfg, trial_id)``."""
    try:
        cps = []
        truth = None
        for t, cloud, truth in _trial_steps(cfg, trial_id):
            regions = [_summarize_region(cfg, build_region(cfg, cloud, k), truth) for k in cfg.kinds]
            cps.append(CheckpointRecord(t, _floats(posterior_mean(cloud)), regions))
        if truth is None:
            truth = sample_prior(cfg.model, _trial_rng(cfg, trial_id))
        return TrialRecord(trial_id, [cfg.seed, trial_id], _floats(truth), cps)
    except Exception as exc:
        raise TrialError(trial_id, exc) from exc


def _run_trial_star(args):
    return run_trial(*args)


def run_experiment(cfg: ExperimentConfig, progress: bool = False) -> tuple["CoverageSummary", list[TrialRecord]]:
    ids = range(cfg.trials)
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            records = list(pool.map(_run_trial_star, [(cfg, i) for i in ids]))
    else:
        records = []
        for i in ids:
            records.append(run_trial(cfg, i))
            if progress:
                log.info("trial %d/%d done", i + 1, cfg.trials)
    records.sort(key=lambda r: r.trial_id)
    return summarize(cfg, records), records


# ---------------------------------------------------------------------------
# summaries


def beta_hpd_interval(s: int, t: int, mass: float = 0.95) -> tuple[float, float]:
    """Shortest interval holding ``mass`` of Beta(s + 1, t - s + 1).

    Found by bisection on the density level. Monotone densities (s = 0 or
    s = t) give one-sided intervals; the flat case s = t = 0 is centered.
    """
    if not 0 <= s <= t:
        raise ValueError(f"need 0 <= s <= t, got s={s}, t={t}")
    if not 0.0 < mass < 1.0:
        raise ValueError("mass must lie in (0, 1)")
    a, b = s + 1.0, t - s + 1.0
    dist = stats.beta(a, b)
    if s == 0 and t == 0:
        return (0.5 * (1.0 - mass), 0.5 * (1.0 + mass))
    if s == 0:
        return (0.0, float(dist.ppf(mass)))
    if s == t:
        return (float(dist.ppf(1.0 - mass)), 1.0)
    mode = (a - 1.0) / (a + b - 2.0)
    peak = dist.pdf(mode)

    def ends(level):
        lo = optimize.brentq(lambda x: dist.pdf(x) - level, 0.0, mode, xtol=1e-15)
        hi = optimize.brentq(lambda x: dist.pdf(x) - level, mode, 1.0, xtol=1e-15)
        return lo, hi

    def excess(level):
        lo, hi = ends(level)
        return dist.cdf(hi) - dist.cdf(lo) - mass

    level = optimize.brentq(excess, peak * 1e-12, peak * (1.0 - 1e-12), xtol=1e-14 * peak, rtol=1e-14)
    lo, hi = ends(level)
    return (float(lo), float(hi))


@dataclass
class CoverageEntry:
    checkpoint: int
    kind: str
    successes: int
    trials: int
    coverage: float
    beta_lo: float
    beta_hi: float
    vol_mean: float | None
    vol_std: float | None


@dataclass
class RelativeSizeEntry:
    """Per-checkpoint statistics of |Vol(PCE) - Vol(MVEE)| / Vol(MVEE)."""

    checkpoint: int
    trials: int
    mean: float
    std: float
    signed_mean: float


@dataclass
class CoverageSummary:
    config: dict[str, Any]
    coverage: list[CoverageEntry]
    relative_size: list[RelativeSizeEntry]

    def entry(self, checkpoint: int, kind: str) -> CoverageEntry:
        for e in self.coverage:
            if e.checkpoint == checkpoint and e.kind == kind:
                return e
        raise KeyError((checkpoint, kind))

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "CoverageSummary":
        return cls(
            d["config"],
            [CoverageEntry(**e) for e in d["coverage"]],
            [RelativeSizeEntry(**e) for e in d["relative_size"]],
        )


def _stats(vals: list) -> tuple[float | None, float | None]:
    v = [x for x in vals if x is not None]
    if not v:
        return None, None
    arr = np.array(v)
    return float(arr.mean()), float(arr.std())


def summarize(cfg: ExperimentConfig, records: list[TrialRecord]) -> CoverageSummary:
    records = sorted(records, key=lambda r: r.trial_id)
    T = len(records)
    entries: list[CoverageEntry] = []
    rel: list[RelativeSizeEntry] = []
    variants = [("", "contains", "volume")]
    if cfg.model.estimates_visibility:
        variants += [("/state", "state_contains", "state_volume"), ("/eta", "eta_contains", "eta_volume")]
    for ci, cp in enumerate(cfg.checkpoints):
        for ki, kind in enumerate(cfg.kinds):
            regs = [r.checkpoints[ci].regions[ki] for r in records]
            for suffix, flag, vol in variants:
                s = sum(bool(getattr(g, flag)) for g in regs)
                lo, hi = beta_hpd_interval(s, T)
                vm, vs = _stats([getattr(g, vol) for g in regs])
                entries.append(CoverageEntry(cp, kind + suffix, s, T, s / T, lo, hi, vm, vs))
        if "pce" in cfg.kinds and "mvee" in cfg.kinds:
            ip, im = cfg.kinds.index("pce"), cfg.kinds.index("mvee")
            pairs = [
                (r.checkpoints[ci].regions[ip].volume, r.checkpoints[ci].regions[im].volume)
                for r in records
            ]
            pairs = [(p, m) for p, m in pairs if p is not None and m is not None and m > 0]
            if pairs:
                signed = np.array([(p - m) / m for p, m in pairs])
                absd = np.abs(signed)
                rel.append(
                    RelativeSizeEntry(cp, len(pairs), float(absd.mean()), float(absd.std()), float(signed.mean()))
                )
    return CoverageSummary(cfg.to_dict(), entries, rel)


# ---------------------------------------------------------------------------
# single-trial demo snapshots


def simulate_demo(cfg: ExperimentConfig, trial_id: int = 0) -> list[dict[str, Any]]:
    """Particle clouds, HPD hull (2-D models) and regions at each checkpoint."""
    out = []
    for t, cloud, truth in _trial_steps(cfg, trial_id):
        hpd = hpd_particle_set(cloud, cfg.alpha)
        snap: dict[str, Any] = {
            "checkpoint": t,
            "labels": cfg.model.labels,
            "truth": _floats(truth),
            "mean": _floats(posterior_mean(cloud)),
            "particles": _floats(cloud.particles),
            "weights": _floats(cloud.weights),
            "hpd_members": hpd.member_indices.tolist(),
            "hull": None,
            "regions": [],
        }
        if cloud.dim == 2:
            try:
                snap["hull"] = _floats(convex_hull_2d(cloud.particles[hpd.member_indices]).vertices)
            except DegenerateHullError:
                snap["hull"] = None
        for kind in cfg.kinds:
            region = build_region(cfg, cloud, kind)
            snap["regions"].extend(
                {"kind": kind, "alpha": cfg.alpha, "center": _floats(e.center), "shape": _floats(e.shape)}
                for e in region.components
            )
        out.append(snap)
    return out

