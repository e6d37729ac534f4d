"""Ellipsoids, 2-D convex hulls, minimum-volume enclosing ellipsoids and
chi-square quantiles.

An ellipsoid is stored in "covariance form": ``(center, shape)`` describes
the set ``{x : (x - c)^T shape^{-1} (x - c) <= 1}``. Every function here is
pure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import gammainc

__all__ = [
    "Ellipsoid",
    "Polytope2D",
    "GeometryError",
    "DegenerateEllipsoidError",
    "DegenerateHullError",
    "DegenerateSpanError",
    "MVEEConvergenceError",
    "ellipsoid_volume",
    "ellipsoid_log_volume",
    "ellipsoid_contains",
    "project_ellipsoid",
    "convex_hull_2d",
    "polygon_area",
    "point_in_polygon",
    "mvee",
    "chi2_quantile",
    "chi2_cdf",
]

CONTAINS_SLACK = 1e-9
# eigenvalues below this fraction of the largest are treated as zero extent
_NULL_EIG_RATIO = 1e-13


class GeometryError(ValueError):
    pass


class DegenerateEllipsoidError(GeometryError):
    pass


class DegenerateHullError(GeometryError):
    pass


class DegenerateSpanError(GeometryError):
    pass


class MVEEConvergenceError(RuntimeError):
    def __init__(self, message: str, gap: float, iterations: int):
        super().__init__(message)
        self.gap = gap
        self.iterations = iterations


@dataclass(frozen=True, eq=False)
class Ellipsoid:
    """``{x : (x - center)^T shape^{-1} (x - center) <= 1}``.

    ``shape`` must be symmetric positive semidefinite. Singular shapes are
    allowed and mean zero extent along the null directions; such an
    ellipsoid has no volume.
    """

    center: np.ndarray
    shape: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.center, dtype=float))
        a = np.atleast_2d(np.asarray(self.shape, dtype=float))
        if c.ndim != 1 or a.shape != (c.size, c.size):
            raise GeometryError(
                f"shape matrix {a.shape} does not match center of length {c.size}"
            )
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(a))):
            raise GeometryError("ellipsoid has non-finite entries")
        scale = max(np.abs(a).max(), np.finfo(float).tiny)
        if np.abs(a - a.T).max() > 1e-12 * scale:
            raise GeometryError("shape matrix is not symmetric")
        a = 0.5 * (a + a.T)
        eig = np.linalg.eigvalsh(a)
        if eig[0] < -1e-10 * max(eig[-1], 0.0):
            raise GeometryError(f"shape matrix has negative eigenvalue {eig[0]:g}")
        c.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "shape", a)

    @property
    def dim(self) -> int:
        return self.center.size

    def __eq__(self, other):
        if not isinstance(other, Ellipsoid):
            return NotImplemented
        return np.array_equal(self.center, other.center) and np.array_equal(
            self.shape, other.shape
        )

    __hash__ = None

    def quadratic_form(self, x) -> np.ndarray:
        """Normalized squared distance of each row of ``x`` from the center.

        Points with a component along a null direction of ``shape`` get
        ``inf``.
        """
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        x = np.atleast_2d(x)
        if x.shape[1] != self.dim:
            raise GeometryError(
                f"point dimension {x.shape[1]} does not match ellipsoid dimension {self.dim}"
            )
        eig, vec = np.linalg.eigh(self.shape)
        top = max(eig[-1], 0.0)
        y = (x - self.center) @ vec
        live = eig > _NULL_EIG_RATIO * top
        q = np.sum(y[:, live] ** 2 / eig[live], axis=1)
        if not np.all(live):
            null_tol = 1e-7 * (1.0 + math.sqrt(top))
            off = np.any(np.abs(y[:, ~live]) > null_tol, axis=1)
            q = np.where(off, np.inf, q)
        return q[0] if single else q

    def contains(self, x) -> np.ndarray | bool:
        q = self.quadratic_form(x)
        return q <= 1.0 + CONTAINS_SLACK

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Uniform draws from the solid ellipsoid."""
        d = self.dim
        z = rng.standard_normal((n, d))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        z *= rng.uniform(size=(n, 1)) ** (1.0 / d)
        eig, vec = np.linalg.eigh(self.shape)
        root = vec * np.sqrt(np.clip(eig, 0.0, None))
        return self.center + z @ root.T


class Polytope2D(NamedTuple):
    """Convex polygon; ``vertices`` is (k, 2) in counterclockwise order."""

    vertices: np.ndarray

    @property
    def area(self) -> float:
        return polygon_area(self.vertices)


def ellipsoid_log_volume(e: Ellipsoid) -> float:
    d = e.dim
    sign, logdet = np.linalg.slogdet(e.shape)
    if sign <= 0 or not np.isfinite(logdet):
        raise DegenerateEllipsoidError(
            f"ellipsoid shape is singular or non-finite (sign={sign}, logdet={logdet})"
        )
    return 0.5 * d * math.log(math.pi) - math.lgamma(0.5 * d + 1.0) + 0.5 * logdet


def ellipsoid_volume(e: Ellipsoid) -> float:
    """Lebesgue volume ``pi^(d/2) / Gamma(d/2 + 1) * sqrt(det shape)``."""
    return math.exp(ellipsoid_log_volume(e))


def ellipsoid_contains(e: Ellipsoid, x) -> bool:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise GeometryError("ellipsoid_contains expects a single point")
    return bool(e.contains(x))


def project_ellipsoid(e: Ellipsoid, coords: Sequence[int]) -> Ellipsoid:
    """Orthogonal shadow of ``e`` on the coordinate subspace ``coords``.

    Indices are zero-based. In covariance form the shadow is just the
    sub-vector and sub-matrix.
    """
    idx = np.asarray(list(coords), dtype=int)
    if idx.size == 0:
        raise GeometryError("projection needs at least one coordinate")
    if idx.min() < 0 or idx.max() >= e.dim:
        raise GeometryError(f"coordinates {idx.tolist()} out of range for dimension {e.dim}")
    if np.unique(idx).size != idx.size:
        raise GeometryError("duplicate projection coordinates")
    return Ellipsoid(e.center[idx], e.shape[np.ix_(idx, idx)])


# ---------------------------------------------------------------------------
# 2-D hulls


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull_2d(points) -> Polytope2D:
    """Andrew's monotone chain. Collinear boundary points are dropped."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise GeometryError(f"expected (m, 2) points, got {pts.shape}")
    if pts.shape[0] < 3:
        raise DegenerateHullError(f"need at least 3 points for a hull, got {pts.shape[0]}")
    if not np.all(np.isfinite(pts)):
        raise GeometryError("non-finite point in hull input")
    uniq = np.unique(pts, axis=0)  # lexicographic sort by (x, y)
    rows = [tuple(r) for r in uniq]

    lower: list = []
    for p in rows:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in reversed(rows):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        raise DegenerateHullError("all points are collinear")
    verts = np.array(hull)
    if polygon_area(verts) <= 1e-14 * max(np.ptp(uniq, axis=0).max(), 1.0) ** 2:
        raise DegenerateHullError("all points are collinear")
    return Polytope2D(verts)


def polygon_area(vertices) -> float:
    v = np.asarray(vertices, dtype=float)
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def point_in_polygon(poly: Polytope2D, x, tol: float = 1e-12) -> np.ndarray:
    """Inside-or-on test for a convex counterclockwise polygon."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    v = poly.vertices
    nxt = np.roll(v, -1, axis=0)
    edge = nxt - v
    rel = x[:, None, :] - v[None, :, :]
    cross = edge[None, :, 0] * rel[..., 1] - edge[None, :, 1] * rel[..., 0]
    scale = np.linalg.norm(edge, axis=1)[None, :]
    return np.all(cross >= -tol * scale * (1.0 + np.abs(rel).max()), axis=1)


# ---------------------------------------------------------------------------
# Minimum-volume enclosing ellipsoid


def _affine_rank(pts: np.ndarray, rtol: float = 1e-10) -> int:
    centered = pts - pts.mean(axis=0)
    s = np.linalg.svd(centered, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def _hull_vertices(pts: np.ndarray) -> np.ndarray:
    from scipy.spatial import ConvexHull, QhullError

    try:
        return pts[ConvexHull(pts).vertices]
    except QhullError:
        return pts


def mvee(
    points,
    tolerance: float = 1e-6,
    max_iter: int = 100_000,
    hull_prefilter: bool = True,
    polish_after: int = 2000,
) -> Ellipsoid:
    """Minimum-volume enclosing ellipsoid by Khachiyan's method.

    The iteration runs on lifted points ``q_i = (p_i, 1)`` with a probability
    vector ``u`` started uniform. Each step either moves mass toward the
    point with largest lifted Mahalanobis norm ``M_i`` (Khachiyan's step) or,
    following Todd and Yildirim, away from the supported point with the
    smallest ``M_i``, whichever is further from optimality. It stops once
    ``max M_i <= (1 + tol)(d + 1)``, which bounds the volume by
    ``(1 + tol)^((d + 1) / 2)`` times the optimum. The returned shape is
    ``d * Cov_u(p)``, rescaled so the farthest point lies exactly on the
    boundary.

    First-order steps converge linearly, and slowly when many points sit on
    the optimal boundary (a dense ring, say). After ``polish_after`` steps
    the weights are handed to a log-barrier Newton solve of the same dual
    problem (see ``_barrier_polish``), which finishes in a few dozen steps.
    ``max_iter`` bounds first-order plus Newton steps.

    For ``d <= 3`` interior points are dropped first with Qhull; the MVEE of
    a set equals the MVEE of its hull.

    Raises:
        DegenerateSpanError: the points do not affinely span R^d.
        MVEEConvergenceError: ``max_iter`` reached before the tolerance.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2:
        raise GeometryError(f"expected (m, d) points, got {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise GeometryError("non-finite point in MVEE input")
    if tolerance <= 0:
        raise GeometryError("tolerance must be positive")
    m, d = pts.shape
    if m < d + 1 or _affine_rank(pts) < d:
        raise DegenerateSpanError(
            f"{m} points span fewer than {d} affine dimensions; reduce dimension first"
        )

    all_pts = pts
    if hull_prefilter and 2 <= d <= 3 and m > 4 * (d + 1):
        pts = _hull_vertices(pts)
        m = pts.shape[0]

    # Work in centered, scaled coordinates; the method is affine-equivariant.
    shift = pts.mean(axis=0)
    scale = np.abs(pts - shift).max()
    z = (pts - shift) / scale
    q = np.hstack([z, np.ones((m, 1))])
    n1 = d + 1

    u = np.full(m, 1.0 / m)

    def refresh():
        x = (q * u[:, None]).T @ q
        xinv = np.linalg.inv(x)
        mm = np.einsum("ij,jk,ik->i", q, xinv, q)
        return xinv, mm

    xinv, M = refresh()
    it = 0
    while True:
        j = int(np.argmax(M))
        support = u > 0
        ms = np.where(support, M, np.inf)
        k = int(np.argmin(ms))
        eps_plus = M[j] / n1 - 1.0
        eps_minus = 1.0 - M[k] / n1
        if eps_plus <= tolerance:
            # confirm against a fresh factorization before stopping
            xinv, M = refresh()
            if M.max() / n1 - 1.0 <= tolerance:
                break
            continue
        if it >= min(max_iter, polish_after):
            if it < max_iter:
                u, it = _barrier_polish(q, u, M, tolerance, it, max_iter)
                break
            raise MVEEConvergenceError(
                f"Khachiyan iteration did not converge in {max_iter} steps "
                f"(residual gap {eps_plus:.3e})",
                gap=eps_plus,
                iterations=it,
            )
        it += 1
        if eps_plus > eps_minus:
            idx = j
            beta = (M[j] - n1) / (n1 * (M[j] - 1.0))
        else:
            idx = k
            # M_k > 1 always on the support; the guard only matters for round-off
            step = (n1 - M[k]) / (n1 * max(M[k] - 1.0, 1e-300))
            beta = -min(step, u[k] / (1.0 - u[k]))
        # u <- (1 - beta) u + beta e_idx and the matching rank-one update of X^{-1}
        g = q @ (xinv @ q[idx])
        bp = beta / (1.0 - beta)
        denom = 1.0 + bp * M[idx]
        M = (M - bp * g * g / denom) / (1.0 - beta)
        xq = xinv @ q[idx]
        xinv = (xinv - bp * np.outer(xq, xq) / denom) / (1.0 - beta)
        u *= 1.0 - beta
        u[idx] += beta
        if idx == k and beta < 0 and u[k] <= 1e-15:
            u[k] = 0.0
        if it % 500 == 0:
            u /= u.sum()
            xinv, M = refresh()

    u /= u.sum()
    c = u @ z
    cov = (z * u[:, None]).T @ z - np.outer(c, c)
    shape = d * cov
    shape = 0.5 * (shape + shape.T)
    center = shift + scale * c
    shape = shape * scale**2
    e = Ellipsoid(center, shape)
    r = e.quadratic_form(all_pts).max()
    return Ellipsoid(center, shape * r)


def _barrier_polish(q: np.ndarray, u0: np.ndarray, M: np.ndarray, tolerance: float, it: int, max_iter: int):
    """Finish the dual MVEE problem with a primal log-barrier Newton method.

    Maximises ``log det(Q^T diag(u) Q) + mu * sum(log u_i)`` on the simplex.
    At a barrier optimum ``M_i + mu / u_i`` is constant and ``sum u_i M_i``
    equals ``d + 1``, so ``max M_i <= d + 1 + m * mu``; mu is lowered until
    that bound meets the tolerance. Points are brought in by column
    generation: the solve runs on a working set and any outside point with
    ``M_i`` over the bound joins it.
    """
    m, n1 = q.shape
    # start from the heaviest near-boundary points; the rest enter on demand
    cand = np.flatnonzero((u0 > 0) & (M >= 0.5 * n1))
    cap = max(50, 5 * n1 * n1)
    work = np.sort(cand[np.argsort(-u0[cand], kind="stable")[:cap]])

    while True:
        k = work.size
        u = np.maximum(u0[work], 0.0)
        u = 0.5 * u / max(u.sum(), 1e-300) + 0.5 / k
        qw = q[work]
        mu_target = 0.5 * tolerance * n1 / k
        mu = max(1e-2 * n1 / k, mu_target)
        while True:
            for _ in range(100):
                if it >= max_iter:
                    raise MVEEConvergenceError(
                        f"barrier Newton phase did not converge in {max_iter} steps",
                        gap=float("nan"),
                        iterations=it,
                    )
                it += 1
                xinv = np.linalg.inv((qw * u[:, None]).T @ qw)
                g_mat = qw @ xinv @ qw.T
                grad = np.diag(g_mat) + mu / u
                hess = -(g_mat * g_mat) - np.diag(mu / u**2)
                kkt = np.zeros((k + 1, k + 1))
                kkt[:k, :k] = hess
                kkt[:k, k] = kkt[k, :k] = 1.0
                sol = np.linalg.solve(kkt, np.append(-grad, 0.0))
                du = sol[:k]
                decrement = -du @ hess @ du
                if decrement < 1e-12:
                    break
                neg = du < 0
                t = min(1.0, 0.99 * np.min(-u[neg] / du[neg])) if neg.any() else 1.0
                f0 = np.linalg.slogdet((qw * u[:, None]).T @ qw)[1] + mu * np.log(u).sum()
                while t > 1e-12:
                    un = u + t * du
                    f1 = np.linalg.slogdet((qw * un[:, None]).T @ qw)[1] + mu * np.log(un).sum()
                    if f1 >= f0 + 0.25 * t * (grad @ du):
                        break
                    t *= 0.5
                u = u + t * du
                u /= u.sum()
            if mu <= mu_target:
                break
            mu = max(0.1 * mu, mu_target)

        full = np.zeros(m)
        full[work] = u
        x = (q * full[:, None]).T @ q
        M = np.einsum("ij,jk,ik->i", q, np.linalg.inv(x), q)
        viol = np.flatnonzero(M > n1 * (1.0 + tolerance))
        viol = np.setdiff1d(viol, work)
        if viol.size == 0:
            return full, it
        viol = viol[np.argsort(-M[viol], kind="stable")[:cap]]
        # the barrier keeps every working point, so the set only grows
        work = np.union1d(work, viol)
        u0 = full


# ---------------------------------------------------------------------------
# chi-square


def chi2_cdf(x: float, dof: int) -> float:
    if x <= 0:
        return 0.0
    return float(gammainc(0.5 * dof, 0.5 * x))


def _chi2_logpdf(x: float, dof: int) -> float:
    k = 0.5 * dof
    return (k - 1.0) * math.log(x) - 0.5 * x - k * math.log(2.0) - math.lgamma(k)


def chi2_quantile(prob: float, dof: int, atol: float = 1e-12) -> float:
    """Inverse chi-square CDF by safeguarded Newton on ``P(dof/2, x/2)``.

    Stops once the CDF residual is below ``atol`` or the bracket has shrunk
    to a few ulps.
    """
    if not 0.0 < prob < 1.0:
        raise ValueError(f"prob must lie in (0, 1), got {prob}")
    if dof < 1 or int(dof) != dof:
        raise ValueError(f"dof must be a positive integer, got {dof}")
    dof = int(dof)
    lo, hi = 0.0, max(1.0, float(dof))
    while chi2_cdf(hi, dof) < prob:
        lo, hi = hi, 2.0 * hi
    x = 0.5 * (lo + hi)
    for _ in range(2000):
        f = chi2_cdf(x, dof) - prob
        if abs(f) <= atol:
            break
        if f > 0:
            hi = x
        else:
            lo = x
        if hi - lo <= 4.0 * np.finfo(float).eps * hi:
            break
        nx = x - f / math.exp(_chi2_logpdf(x, dof))
        if not (lo < nx < hi):
            # bisect in log space when the bracket spans decades
            nx = math.sqrt(lo * hi) if lo > 0 and hi > 4.0 * lo else 0.5 * (lo + hi)
            if lo == 0.0:
                nx = 0.5 * hi if hi > 1e-300 else hi
        x = nx
    return float(x)
