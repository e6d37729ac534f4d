"""Sequential Monte Carlo approximation of the posterior.

The posterior is a weighted sum of point masses at the particles. Data
reweight the particles multiplicatively; when the effective sample size
drops too far the cloud is refreshed with the Liu-West resampler.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import Datum, Model, is_valid, likelihood, sample_prior

__all__ = [
    "ParticleCloud",
    "ResampleConfig",
    "ImpossibleDataError",
    "init_cloud",
    "bayes_update",
    "posterior_mean",
    "posterior_covariance",
    "effective_sample_size",
    "maybe_resample",
]

_UNDERFLOW = 1e-300


class ImpossibleDataError(RuntimeError):
    def __init__(self, datum):
        super().__init__(f"every particle assigns zero likelihood to {datum!r}")
        self.datum = datum


@dataclass(frozen=True, eq=False)
class ParticleCloud:
    particles: np.ndarray  # (n, d)
    weights: np.ndarray  # (n,)
    generation: int = 0

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.particles, dtype=float))
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if x.shape[0] != w.size or w.size == 0:
            raise ValueError(f"{x.shape[0]} particles but {w.size} weights")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(w))):
            raise ValueError("particle cloud has non-finite entries")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-10:
            raise ValueError(f"weights must be nonnegative and sum to 1 (sum={w.sum()!r})")
        x.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "particles", x)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.weights.size

    @property
    def dim(self) -> int:
        return self.particles.shape[1]


@dataclass(frozen=True)
class ResampleConfig:
    ess_threshold_fraction: float = 0.5
    liu_west_a: float = 0.98
    max_validity_rejections: int = 100

    def __post_init__(self):
        if not 0.0 < self.ess_threshold_fraction <= 1.0:
            raise ValueError("ess_threshold_fraction must lie in (0, 1]")
        if not 0.0 < self.liu_west_a <= 1.0:
            raise ValueError("liu_west_a must lie in (0, 1]")
        if self.max_validity_rejections < 1:
            raise ValueError("max_validity_rejections must be positive")


def init_cloud(model: Model, n: int, rng: np.random.Generator) -> ParticleCloud:
    if n < 1:
        raise ValueError("need at least one particle")
    return ParticleCloud(sample_prior(model, rng, size=n), np.full(n, 1.0 / n), 0)


def bayes_update(cloud: ParticleCloud, model: Model, datum: Datum) -> ParticleCloud:
    """Multiply each weight by the datum's likelihood and renormalize."""
    w = cloud.weights * likelihood(model, cloud.particles, datum)
    total = w.sum()
    if not total >= _UNDERFLOW:
        raise ImpossibleDataError(datum)
    return ParticleCloud(cloud.particles, w / total, cloud.generation + 1)


def posterior_mean(cloud: ParticleCloud) -> np.ndarray:
    return cloud.weights @ cloud.particles


def posterior_covariance(cloud: ParticleCloud) -> np.ndarray:
    mu = posterior_mean(cloud)
    dev = cloud.particles - mu
    cov = (dev * cloud.weights[:, None]).T @ dev
    return 0.5 * (cov + cov.T)


def effective_sample_size(cloud: ParticleCloud) -> float:
    return float(1.0 / np.sum(cloud.weights**2))


def _covariance_root(cov: np.ndarray) -> np.ndarray:
    eig, vec = np.linalg.eigh(cov)
    return vec * np.sqrt(np.clip(eig, 0.0, None))


def maybe_resample(
    cloud: ParticleCloud,
    model: Model,
    cfg: ResampleConfig,
    rng: np.random.Generator,
) -> ParticleCloud:
    """Liu-West resampling when ESS < ``ess_threshold_fraction * n``.

    New particle = ``a * ancestor + (1 - a) * mean + N(0, (1 - a^2) Cov)``.
    Invalid draws are retried; after ``max_validity_rejections`` failures the
    ancestor is kept as is.
    """
    n = cloud.n
    # with threshold 1 resampling always triggers (ESS can exceed n by rounding)
    if cfg.ess_threshold_fraction < 1.0 and effective_sample_size(cloud) >= cfg.ess_threshold_fraction * n:
        return cloud
    a = cfg.liu_west_a
    ancestors = rng.choice(n, size=n, p=cloud.weights)
    base = cloud.particles[ancestors]
    if a == 1.0:
        return ParticleCloud(base.copy(), np.full(n, 1.0 / n), cloud.generation)

    mu = posterior_mean(cloud)
    root = _covariance_root(posterior_covariance(cloud)) * np.sqrt(1.0 - a * a)
    locs = a * base + (1.0 - a) * mu
    out = base.copy()
    pending = np.arange(n)
    for _ in range(cfg.max_validity_rejections):
        draw = locs[pending] + rng.standard_normal((pending.size, cloud.dim)) @ root.T
        ok = is_valid(model, draw)
        out[pending[ok]] = draw[ok]
        pending = pending[~ok]
        if pending.size == 0:
            break
    return ParticleCloud(out, np.full(n, 1.0 / n), cloud.generation)
