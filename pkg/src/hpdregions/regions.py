"""Credible-region estimators built from a particle cloud.

* ``hpd_particle_set`` -- highest-weight particles carrying ``1 - alpha`` mass.
* ``pce_region``       -- posterior covariance ellipsoid scaled by a chi-square quantile.
* ``mvee_region``      -- minimum-volume ellipsoid around the HPD particles.
* ``clustered_region`` -- one MVEE per DBSCAN cluster of the HPD particles.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from .geometry import (
    DegenerateEllipsoidError,
    Ellipsoid,
    GeometryError,
    chi2_quantile,
    ellipsoid_volume,
    mvee,
    project_ellipsoid,
)
from .inference import ParticleCloud, posterior_covariance, posterior_mean

__all__ = [
    "RegionKind",
    "HPDSet",
    "RegionEstimate",
    "DegeneratePosteriorError",
    "CredibilityError",
    "AUTO",
    "check_alpha",
    "hpd_particle_set",
    "pce_region",
    "mvee_region",
    "marginal_region",
    "dbscan",
    "auto_eps",
    "auto_min_pts",
    "clustered_region",
    "region_contains",
    "region_volume",
    "components_overlap",
    "enclosed_mass",
]

AUTO = "auto"
COV_FLOOR = 1e-12
SPAN_RTOL = 1e-10


class DegeneratePosteriorError(ValueError):
    pass


class CredibilityError(AssertionError):
    pass


class RegionKind(str, Enum):
    PCE = "pce"
    MVEE = "mvee"
    CLUSTERED = "clustered"


def check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return alpha


@dataclass(frozen=True, eq=False)
class HPDSet:
    member_indices: np.ndarray
    achieved_mass: float
    threshold_weight: float

    def __len__(self):
        return self.member_indices.size


@dataclass(frozen=True)
class RegionEstimate:
    kind: RegionKind
    components: tuple[Ellipsoid, ...]
    alpha: float
    parameter_labels: tuple[str, ...] = ()
    overlapping: bool = field(default=False, compare=False)

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ValueError("a region needs at least one component")
        if len({c.dim for c in comps}) != 1:
            raise ValueError("region components disagree on dimension")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "kind", RegionKind(self.kind))
        object.__setattr__(self, "parameter_labels", tuple(self.parameter_labels))

    @property
    def dim(self) -> int:
        return self.components[0].dim


def _labels(labels, d):
    return tuple(labels) if labels else tuple(f"x{i}" for i in range(d))


# ---------------------------------------------------------------------------
# HPD particle set


def hpd_particle_set(cloud: ParticleCloud, alpha: float) -> HPDSet:
    """Shortest weight-sorted prefix with mass at least ``1 - alpha``.

    Ties in weight keep ascending particle index.
    """
    alpha = check_alpha(alpha)
    order = np.argsort(-cloud.weights, kind="stable")
    cum = np.cumsum(cloud.weights[order])
    target = 1.0 - alpha
    # round-off in the cumulative sum must not push a mass that is exactly
    # the target (e.g. 0.5 + 0.3 + 0.15) below it
    k = int(np.searchsorted(cum, target * (1.0 - 1e-12), side="left")) + 1
    k = min(k, cloud.n)
    members = order[:k]
    mass = float(np.sum(cloud.weights[members]))
    return HPDSet(members, mass, float(cloud.weights[members[-1]]))


def enclosed_mass(region: RegionEstimate, cloud: ParticleCloud) -> float:
    """SMC estimate of the posterior probability of the region."""
    inside = region_contains_many(region, cloud.particles)
    return float(np.sum(cloud.weights[inside]))


# ---------------------------------------------------------------------------
# posterior covariance ellipsoid


def pce_region(cloud: ParticleCloud, alpha: float, labels: Sequence[str] = ()) -> RegionEstimate:
    alpha = check_alpha(alpha)
    cov = posterior_covariance(cloud)
    eig, vec = np.linalg.eigh(cov)
    top = eig[-1]
    if not top > 0:
        raise DegeneratePosteriorError("posterior covariance is zero; cannot form an ellipsoid")
    eig = np.maximum(eig, COV_FLOOR * top)
    floored = (vec * eig) @ vec.T
    floored = 0.5 * (floored + floored.T)
    z2 = chi2_quantile(1.0 - alpha, cloud.dim)
    e = Ellipsoid(posterior_mean(cloud), z2 * floored)
    return RegionEstimate(RegionKind.PCE, (e,), alpha, _labels(labels, cloud.dim))


# ---------------------------------------------------------------------------
# MVEE over HPD particles


def enclosing_ellipsoid(points: np.ndarray, tolerance: float = 1e-6) -> Ellipsoid:
    """MVEE that tolerates rank-deficient point sets.

    Points spanning a lower-dimensional affine subspace get an MVEE inside
    that subspace and zero extent across it.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    m, d = pts.shape
    mean = pts.mean(axis=0)
    dev = pts - mean
    cov = dev.T @ dev / m
    eig, vec = np.linalg.eigh(cov)
    top = eig[-1]
    if not top > 0:
        return Ellipsoid(mean, np.zeros((d, d)))
    keep = eig > SPAN_RTOL * top
    r = int(keep.sum())
    if r == d and m > d:
        return mvee(pts, tolerance)
    basis = vec[:, keep]
    coords = dev @ basis
    if r == 1:
        lo, hi = coords.min(), coords.max()
        c_low = np.array([0.5 * (lo + hi)])
        a_low = np.array([[(0.5 * (hi - lo)) ** 2]])
    else:
        sub = mvee(coords, tolerance)
        c_low, a_low = sub.center, sub.shape
    center = mean + basis @ c_low
    shape = basis @ a_low @ basis.T
    return Ellipsoid(center, 0.5 * (shape + shape.T))


def mvee_region(
    cloud: ParticleCloud,
    alpha: float,
    tolerance: float = 1e-6,
    labels: Sequence[str] = (),
) -> RegionEstimate:
    alpha = check_alpha(alpha)
    hpd = hpd_particle_set(cloud, alpha)
    e = enclosing_ellipsoid(cloud.particles[hpd.member_indices], tolerance)
    region = RegionEstimate(RegionKind.MVEE, (e,), alpha, _labels(labels, cloud.dim))
    _assert_credible(region, cloud, hpd)
    return region


def _assert_credible(region: RegionEstimate, cloud: ParticleCloud, hpd: HPDSet):
    inside = region_contains_many(region, cloud.particles[hpd.member_indices])
    if not np.all(inside):
        raise CredibilityError(
            f"{np.count_nonzero(~inside)} HPD particles fall outside the {region.kind.value} region"
        )
    mass = enclosed_mass(region, cloud)
    if mass < 1.0 - region.alpha - 1e-9:
        raise CredibilityError(f"region encloses mass {mass:.6f} < {1 - region.alpha}")


# ---------------------------------------------------------------------------
# marginals


def marginal_region(region: RegionEstimate, coords: Sequence[int]) -> RegionEstimate:
    coords = list(coords)
    comps = tuple(project_ellipsoid(e, coords) for e in region.components)
    labels = tuple(region.parameter_labels[i] for i in coords) if region.parameter_labels else ()
    return RegionEstimate(region.kind, comps, region.alpha, labels, region.overlapping)


# ---------------------------------------------------------------------------
# DBSCAN


def dbscan(points, eps: float, min_pts: int) -> np.ndarray:
    """Density-based clustering; returns one label per point, -1 for noise.

    A point is core when at least ``min_pts`` points (itself included) lie
    within Euclidean distance ``eps``. Clusters are grown from cores in
    index order, so a border point reachable from several clusters joins
    the one with the lowest id.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if min_pts < 1:
        raise ValueError("min_pts must be at least 1")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    m = pts.shape[0]
    neighbors = cKDTree(pts).query_ball_point(pts, r=eps)
    core = np.array([len(nb) >= min_pts for nb in neighbors])
    labels = np.full(m, -1, dtype=int)
    cluster = 0
    for i in range(m):
        if labels[i] != -1 or not core[i]:
            continue
        labels[i] = cluster
        frontier = [i]
        while frontier:
            j = frontier.pop()
            for nb in neighbors[j]:
                if labels[nb] == -1:
                    labels[nb] = cluster
                    if core[nb]:
                        frontier.append(nb)
        cluster += 1
    return labels


def auto_min_pts(m: int, d: int) -> int:
    """``max(d + 1, ceil(m / 100))``: small fringe groups stay noise."""
    return max(d + 1, math.ceil(0.01 * m))


def auto_eps(points, min_pts: int) -> float:
    """Twice the median distance to the ``min_pts``-th nearest neighbour."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    m = pts.shape[0]
    if m < 2:
        return 1.0
    k = min(int(min_pts), m - 1)
    dist, _ = cKDTree(pts).query(pts, k=k + 1)
    kth = dist[:, k]
    med = float(np.median(kth))
    if med <= 0:
        positive = kth[kth > 0]
        med = float(positive.min()) if positive.size else 1.0
    return 2.0 * med


def clustered_region(
    cloud: ParticleCloud,
    alpha: float,
    eps: float | str = AUTO,
    min_pts: int | None = None,
    tolerance: float = 1e-6,
    labels: Sequence[str] = (),
) -> RegionEstimate:
    """Union of per-mode MVEEs over the HPD particles.

    Noise points are attached to the cluster with the nearest MVEE center,
    and that cluster's MVEE is recomputed, so the union still encloses every
    HPD particle.
    """
    alpha = check_alpha(alpha)
    hpd = hpd_particle_set(cloud, alpha)
    pts = cloud.particles[hpd.member_indices]
    if min_pts is None:
        min_pts = auto_min_pts(*pts.shape)
    if isinstance(eps, str):
        if eps.lower() != AUTO:
            raise ValueError(f"eps must be a positive number or {AUTO!r}")
        eps = auto_eps(pts, min_pts)
    lab = dbscan(pts, float(eps), int(min_pts))
    ids = np.unique(lab[lab >= 0])
    if ids.size <= 1:
        single = mvee_region(cloud, alpha, tolerance, labels)
        return RegionEstimate(RegionKind.CLUSTERED, single.components, alpha, single.parameter_labels)

    centers = np.array([enclosing_ellipsoid(pts[lab == c], tolerance).center for c in ids])
    noise = np.flatnonzero(lab < 0)
    if noise.size:
        dist = np.linalg.norm(pts[noise, None, :] - centers[None, :, :], axis=2)
        lab = lab.copy()
        lab[noise] = ids[np.argmin(dist, axis=1)]
    comps = tuple(enclosing_ellipsoid(pts[lab == c], tolerance) for c in ids)
    region = RegionEstimate(RegionKind.CLUSTERED, comps, alpha, _labels(labels, cloud.dim))
    region = RegionEstimate(
        region.kind, comps, alpha, region.parameter_labels, components_overlap(region)
    )
    _assert_credible(region, cloud, hpd)
    return region


# ---------------------------------------------------------------------------
# queries


def region_contains(region: RegionEstimate, point) -> bool:
    point = np.asarray(point, dtype=float)
    if point.ndim != 1 or point.size != region.dim:
        raise GeometryError(f"point of shape {point.shape} does not match region dimension {region.dim}")
    return any(bool(e.contains(point)) for e in region.components)


def region_contains_many(region: RegionEstimate, points) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    inside = np.zeros(pts.shape[0], dtype=bool)
    for e in region.components:
        inside |= e.contains(pts)
    return inside


def region_volume(region: RegionEstimate) -> float:
    """Sum of component volumes; overlaps are not subtracted."""
    vols = [ellipsoid_volume(e) for e in region.components]
    if any(v <= 0 for v in vols):
        raise DegenerateEllipsoidError("region has a zero-volume component")
    return float(sum(vols))


def components_overlap(region: RegionEstimate, samples: int = 1000, seed: int = 0) -> bool:
    """Monte Carlo check whether any two components intersect."""
    comps = region.components
    if len(comps) < 2:
        return False
    rng = np.random.default_rng(seed)
    for i in range(len(comps)):
        for j in range(i + 1, len(comps)):
            a, b = comps[i], comps[j]
            if np.any(b.contains(a.sample(samples, rng))) or np.any(a.contains(b.sample(samples, rng))):
                return True
    return False
