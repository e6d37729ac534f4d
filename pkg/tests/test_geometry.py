import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, optimize

from conftest import random_spd
from hpdregions.geometry import (
    DegenerateEllipsoidError,
    DegenerateHullError,
    DegenerateSpanError,
    Ellipsoid,
    GeometryError,
    MVEEConvergenceError,
    Polytope2D,
    chi2_cdf,
    chi2_quantile,
    convex_hull_2d,
    ellipsoid_contains,
    ellipsoid_volume,
    mvee,
    point_in_polygon,
    polygon_area,
    project_ellipsoid,
)


# ---------------------------------------------------------------------------
# independent oracles


def mc_volume(e: Ellipsoid, n: int, rng) -> float:
    """Hit-or-miss volume inside the axis-aligned bounding box."""
    half = np.sqrt(np.diag(e.shape))
    box = rng.uniform(-half, half, size=(n, e.dim)) + e.center
    inv = np.linalg.inv(e.shape)
    dev = box - e.center
    hits = np.einsum("ij,jk,ik->i", dev, inv, dev) <= 1.0
    return hits.mean() * np.prod(2 * half)


def chi2_density(x, k):
    return x ** (k / 2 - 1) * math.exp(-x / 2) / (2 ** (k / 2) * math.gamma(k / 2))


def chi2_quantile_oracle(prob, k):
    """Bisection on the quadrature-integrated density."""

    def cdf(x):
        return integrate.quad(chi2_density, 0.0, x, args=(k,), epsabs=1e-14, epsrel=1e-13, limit=200)[0]

    lo, hi = 0.0, 10.0 * k + 50.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if cdf(mid) < prob:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12:
            break
    return 0.5 * (lo + hi)


def mvee_slsqp(points):
    """Direct solve: maximize log det L subject to |L (p - c)| <= 1.

    ``L`` is lower triangular with positive diagonal; the ellipsoid shape is
    ``(L^T L)^{-1}``.
    """
    m, d = points.shape
    tri = np.tril_indices(d)
    mu = points.mean(axis=0)
    s0 = np.linalg.inv(np.linalg.cholesky(d * np.cov(points.T, bias=True) * 4)).ravel()

    def unpack(v):
        L = np.zeros((d, d))
        L[tri] = v[: len(tri[0])]
        return L, v[len(tri[0]) :]

    def obj(v):
        L, _ = unpack(v)
        return -np.sum(np.log(np.abs(np.diag(L))))

    def cons(v):
        L, c = unpack(v)
        return 1.0 - np.sum(((points - c) @ L.T) ** 2, axis=1)

    v0 = np.concatenate([s0.reshape(d, d)[tri], mu])
    res = optimize.minimize(
        obj, v0, method="SLSQP", constraints=[{"type": "ineq", "fun": cons}],
        options={"ftol": 1e-13, "maxiter": 2000},
    )
    L, c = unpack(res.x)
    return c, np.linalg.inv(L.T @ L)


# ---------------------------------------------------------------------------


class TestEllipsoid:
    def test_rejects_asymmetric(self):
        with pytest.raises(GeometryError):
            Ellipsoid(np.zeros(2), np.array([[1.0, 0.5], [0.0, 1.0]]))

    def test_rejects_indefinite(self):
        with pytest.raises(GeometryError):
            Ellipsoid(np.zeros(2), np.diag([1.0, -1.0]))

    def test_rejects_dimension_mismatch(self):
        with pytest.raises(GeometryError):
            Ellipsoid(np.zeros(3), np.eye(2))

    def test_arrays_are_readonly(self):
        e = Ellipsoid(np.zeros(2), np.eye(2))
        with pytest.raises(ValueError):
            e.center[0] = 1.0

    def test_singular_shape_has_zero_extent_off_span(self):
        e = Ellipsoid(np.zeros(2), np.diag([1.0, 0.0]))
        assert e.contains(np.array([0.5, 0.0]))
        assert not e.contains(np.array([0.0, 0.1]))

    def test_sample_is_inside_and_uniform(self, rng):
        e = Ellipsoid(np.array([1.0, -2.0]), np.diag([4.0, 1.0]))
        x = e.sample(20000, rng)
        q = e.quadratic_form(x)
        assert np.all(q <= 1 + 1e-12)
        # uniform in the solid: P(q <= r^2) = r^d
        assert np.mean(q <= 0.25) == pytest.approx(0.25, abs=0.015)


class TestVolume:
    @pytest.mark.parametrize(
        "shape, expected",
        [(np.eye(3), 4 * math.pi / 3), (np.diag([4.0, 1.0]), 2 * math.pi), (np.array([[9.0]]), 6.0)],
    )
    def test_closed_forms(self, shape, expected):
        e = Ellipsoid(np.zeros(len(shape)), shape)
        assert ellipsoid_volume(e) == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("seed", range(3))
    def test_matches_monte_carlo(self, seed):
        rng = np.random.default_rng(seed)
        a = random_spd(rng, 2) * 3
        e = Ellipsoid(rng.standard_normal(2), a)
        assert ellipsoid_volume(e) == pytest.approx(mc_volume(e, 10**6, rng), rel=0.01)

    @pytest.mark.parametrize("d", [1, 2, 3, 15])
    @pytest.mark.parametrize("s", [0.5, 2.0])
    def test_scaling(self, d, s, rng):
        e = Ellipsoid(np.zeros(d), random_spd(rng, d))
        e2 = Ellipsoid(np.zeros(d), s**2 * e.shape)
        assert ellipsoid_volume(e2) == pytest.approx(s**d * ellipsoid_volume(e), rel=1e-10)

    def test_large_dimension_does_not_overflow(self):
        e = Ellipsoid(np.zeros(63), 1e-4 * np.eye(63))
        v = ellipsoid_volume(e)
        assert 0 < v < 1e-60

    def test_singular_raises(self):
        with pytest.raises(DegenerateEllipsoidError):
            ellipsoid_volume(Ellipsoid(np.zeros(2), np.diag([1.0, 0.0])))


class TestContains:
    def test_center_and_outside(self):
        e = Ellipsoid(np.zeros(3), np.eye(3))
        assert ellipsoid_contains(e, np.zeros(3))
        assert not ellipsoid_contains(e, np.array([2.0, 0, 0]))

    def test_boundary_along_top_axis(self, rng):
        a = random_spd(rng, 4)
        c = rng.standard_normal(4)
        eig, vec = np.linalg.eigh(a)
        e = Ellipsoid(c, a)
        assert ellipsoid_contains(e, c + math.sqrt(eig[-1]) * vec[:, -1])
        assert not ellipsoid_contains(e, c + 1.001 * math.sqrt(eig[-1]) * vec[:, -1])

    def test_dimension_mismatch(self):
        with pytest.raises(GeometryError):
            ellipsoid_contains(Ellipsoid(np.zeros(2), np.eye(2)), np.zeros(3))


class TestProjection:
    def test_axis_aligned(self):
        e = Ellipsoid(np.array([3.0, 1.0]), np.diag([4.0, 1.0]))
        p = project_ellipsoid(e, [0])
        assert p.center.tolist() == [3.0]
        assert p.shape.tolist() == [[4.0]]

    def test_identity(self, rng):
        e = Ellipsoid(rng.standard_normal(3), random_spd(rng, 3))
        assert project_ellipsoid(e, [0, 1, 2]) == e

    def test_shadow_of_samples(self, rng):
        e = Ellipsoid(rng.standard_normal(3), random_spd(rng, 3))
        p = project_ellipsoid(e, [0, 1])
        x = e.sample(1000, rng)
        assert np.all(p.contains(x[:, :2]))

    def test_shadow_is_tight(self, rng):
        # boundary of the shadow is reached by points of e
        e = Ellipsoid(np.zeros(3), random_spd(rng, 3))
        p = project_ellipsoid(e, [0, 1])
        x = e.sample(200000, rng)
        assert p.quadratic_form(x[:, :2]).max() > 0.97

    @pytest.mark.parametrize("coords", [[], [3], [-1], [0, 0]])
    def test_bad_coords(self, coords):
        with pytest.raises(GeometryError):
            project_ellipsoid(Ellipsoid(np.zeros(3), np.eye(3)), coords)

    @given(st.integers(0, 10**6))
    def test_projection_commutes_with_containment(self, seed):
        rng = np.random.default_rng(seed)
        d = int(rng.integers(2, 6))
        e = Ellipsoid(rng.standard_normal(d), random_spd(rng, d))
        coords = sorted(rng.choice(d, size=int(rng.integers(1, d + 1)), replace=False).tolist())
        x = e.sample(50, rng)
        assert np.all(project_ellipsoid(e, coords).contains(x[:, coords]))


class TestConvexHull:
    def test_square_with_interior_point(self):
        pts = np.array([[0, 0], [1, 0], [1, 1], [0, 1], [0.5, 0.5]], dtype=float)
        h = convex_hull_2d(pts)
        assert sorted(map(tuple, h.vertices.tolist())) == [(0, 0), (0, 1), (1, 0), (1, 1)]
        assert h.area == pytest.approx(1.0)

    def test_triangle(self):
        pts = np.array([[0, 0], [2, 0], [0, 1]], dtype=float)
        assert len(convex_hull_2d(pts).vertices) == 3

    def test_counterclockwise(self, rng):
        h = convex_hull_2d(rng.standard_normal((100, 2)))
        assert polygon_area(h.vertices) > 0

    def test_disk(self, rng):
        r = np.sqrt(rng.uniform(size=500))
        t = rng.uniform(0, 2 * np.pi, size=500)
        pts = np.column_stack([r * np.cos(t), r * np.sin(t)])
        h = convex_hull_2d(pts)
        is_vertex = np.array([np.any(np.all(h.vertices == p, axis=1)) for p in pts])
        radius = np.linalg.norm(pts, axis=1)
        # no interior point lies beyond the outermost hull vertex
        assert radius[~is_vertex].max() <= radius[is_vertex].max()
        assert np.all(point_in_polygon(h, pts))

    def test_outside_point_rejected(self):
        h = Polytope2D(np.array([[0, 0], [1, 0], [0, 1]], dtype=float))
        assert not point_in_polygon(h, np.array([1.0, 1.0]))[0]

    @pytest.mark.parametrize(
        "pts",
        [np.zeros((2, 2)), np.array([[0, 0], [1, 1], [2, 2], [3, 3.0]]), np.ones((5, 2))],
    )
    def test_degenerate(self, pts):
        with pytest.raises(DegenerateHullError):
            convex_hull_2d(pts)

    @given(st.integers(0, 10**6), st.integers(3, 40))
    def test_area_and_idempotence(self, seed, m):
        rng = np.random.default_rng(seed)
        pts = rng.standard_normal((m, 2))
        h = convex_hull_2d(pts)
        hh = convex_hull_2d(h.vertices)
        assert np.array_equal(np.sort(h.vertices, axis=0), np.sort(hh.vertices, axis=0))
        tri = pts[rng.choice(m, 3, replace=False)]
        assert h.area >= abs(polygon_area(tri)) - 1e-12


class TestMVEE:
    def test_rectangle_corners(self):
        a, b = 1.0, 2.0
        pts = np.array([[-a, -b], [a, -b], [a, b], [-a, b]])
        e = mvee(pts)
        assert np.allclose(e.center, 0, atol=1e-8)
        assert np.allclose(e.shape, np.diag([2 * a * a, 2 * b * b]), atol=1e-4)
        assert np.allclose(e.quadratic_form(pts), 1.0, atol=1e-6)

    def test_rectangle_perturbation_cannot_improve(self, rng):
        pts = np.array([[-1, -2], [1, -2], [1, 2], [-1, 2]], dtype=float)
        e = mvee(pts)
        vol = ellipsoid_volume(e)
        for _ in range(1000):
            # random nearby ellipsoid, inflated just enough to hold the corners
            c = e.center + 0.05 * rng.standard_normal(2)
            g = np.eye(2) + 0.05 * rng.standard_normal((2, 2))
            a = g @ e.shape @ g.T
            cand = Ellipsoid(c, 0.5 * (a + a.T))
            cand = Ellipsoid(c, cand.shape * cand.quadratic_form(pts).max())
            assert ellipsoid_volume(cand) >= vol * (1 - 2e-6)

    def test_sphere_sample(self, rng):
        x = rng.standard_normal((400, 3))
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        e = mvee(x)
        assert np.abs(e.center).max() < 0.02
        assert np.abs(e.shape - np.eye(3)).max() < 0.02

    def test_simplex_touches_all_vertices(self):
        pts = np.array([[0, 0], [1, 0], [0, 1]], dtype=float)
        e = mvee(pts)
        assert np.allclose(e.quadratic_form(pts), 1.0, atol=1e-6)
        assert np.allclose(e.center, [1 / 3, 1 / 3], atol=1e-6)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_direct_optimizer(self, seed):
        rng = np.random.default_rng(seed)
        pts = rng.standard_normal((8, 2)) * [1.0, 3.0]
        e = mvee(pts, tolerance=1e-9)
        c, a = mvee_slsqp(pts)
        ref = Ellipsoid(c, 0.5 * (a + a.T))
        assert ellipsoid_volume(e) == pytest.approx(ellipsoid_volume(ref), rel=1e-5)
        assert np.allclose(e.center, c, atol=1e-4)

    def test_hull_prefilter_does_not_change_result(self, rng):
        pts = rng.standard_normal((400, 3))
        a = mvee(pts, hull_prefilter=True)
        b = mvee(pts, hull_prefilter=False)
        # both are tolerance-level approximations of the same optimum
        assert np.abs(a.shape - b.shape).max() < 1e-4 * np.abs(b.shape).max()
        assert ellipsoid_volume(a) == pytest.approx(ellipsoid_volume(b), rel=1e-5)

    @pytest.mark.parametrize("pts", [np.zeros((2, 2)), np.array([[0, 0], [1, 1], [2, 2.0]])])
    def test_degenerate_span(self, pts):
        with pytest.raises(DegenerateSpanError):
            mvee(pts)

    def test_iteration_cap(self, rng):
        with pytest.raises(MVEEConvergenceError) as info:
            mvee(rng.standard_normal((200, 5)), tolerance=1e-12, max_iter=3)
        assert info.value.gap > 0

    @pytest.mark.parametrize("d", [2, 3])
    def test_dense_shell_converges(self, rng, d):
        # many near-contact points stall first-order steps; the Newton finish handles them
        x = rng.standard_normal((3000, d))
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        x *= rng.uniform(1 - 1e-4, 1.0, size=(3000, 1))
        e = mvee(x, 1e-7)
        assert np.abs(e.shape - np.eye(d)).max() < 5e-3
        assert e.quadratic_form(x).max() <= 1 + 1e-9

    def test_newton_finish_matches_first_order(self, rng):
        x = rng.standard_normal((40, 3)) @ random_spd(rng, 3)
        fast = mvee(x, 1e-7, polish_after=50)
        slow = mvee(x, 1e-7, polish_after=10**9, max_iter=10**6)
        assert ellipsoid_volume(fast) == pytest.approx(ellipsoid_volume(slow), rel=1e-6)
        assert np.abs(fast.shape - slow.shape).max() < 1e-3 * np.abs(slow.shape).max()

    def test_one_dimensional(self):
        e = mvee(np.array([[1.0], [3.0], [2.0]]))
        assert e.center[0] == pytest.approx(2.0)
        assert e.shape[0, 0] == pytest.approx(1.0)


def _random_points(rng, d):
    m = int(rng.integers(d + 2, 4 * d + 10))
    return rng.standard_normal((m, d)) @ rng.standard_normal((d, d)) + rng.standard_normal(d)


class TestMVEEInvariants:
    """Each invariant over 200 random instances per dimension."""

    TOL = 1e-6

    @pytest.mark.parametrize("d", [2, 3, 10])
    def test_containment(self, d):
        rng = np.random.default_rng(100 + d)
        for _ in range(200):
            pts = _random_points(rng, d)
            assert mvee(pts, self.TOL).quadratic_form(pts).max() <= 1 + 10 * self.TOL

    @pytest.mark.parametrize("d", [2, 3, 10])
    def test_affine_equivariance(self, d):
        rng = np.random.default_rng(200 + d)
        for _ in range(200):
            pts = _random_points(rng, d)
            t = rng.standard_normal((d, d)) + 2 * np.eye(d)
            b = rng.standard_normal(d)
            e = mvee(pts, self.TOL)
            f = mvee(pts @ t.T + b, self.TOL)
            assert np.allclose(f.center, t @ e.center + b, atol=1e-6 * (1 + np.abs(f.center).max()))
            ref = t @ e.shape @ t.T
            assert np.abs(f.shape - ref).max() <= 1e-5 * np.abs(ref).max()

    @pytest.mark.parametrize("d", [2, 3, 10])
    def test_optimality_witness(self, d):
        rng = np.random.default_rng(300 + d)
        shrink = (1 - 10 * self.TOL) ** 2
        for _ in range(200):
            pts = _random_points(rng, d)
            e = mvee(pts, self.TOL)
            eig, vec = np.linalg.eigh(e.shape)
            for i in range(d):
                a = e.shape - (1 - shrink) * eig[i] * np.outer(vec[:, i], vec[:, i])
                smaller = Ellipsoid(e.center, 0.5 * (a + a.T))
                assert smaller.quadratic_form(pts).max() > 1 + 1e-9


class TestChiSquare:
    @pytest.mark.parametrize("prob, dof, expected", [(0.95, 1, 3.84146), (0.95, 3, 7.81473)])
    def test_reference_values(self, prob, dof, expected):
        assert chi2_quantile(prob, dof) == pytest.approx(expected, abs=5e-6)

    @pytest.mark.parametrize("prob", [0.9, 0.95, 0.99])
    @pytest.mark.parametrize("dof", [1, 3, 15, 63])
    def test_matches_integrated_density(self, prob, dof):
        assert chi2_quantile(prob, dof) == pytest.approx(chi2_quantile_oracle(prob, dof), abs=1e-6)

    @pytest.mark.parametrize("dof", [1, 2, 7, 63])
    def test_inverts_cdf(self, dof):
        for p in [1e-9, 0.01, 0.5, 0.999999]:
            assert chi2_cdf(chi2_quantile(p, dof), dof) == pytest.approx(p, abs=1e-9)

    def test_lower_limit(self):
        q = chi2_quantile(1e-15, 1)
        assert 0 <= q < 1e-20
        assert chi2_cdf(q, 1) == pytest.approx(1e-15, abs=1e-12)

    @pytest.mark.parametrize("prob", [0.0, 1.0, -0.1, 1.5])
    def test_bad_prob(self, prob):
        with pytest.raises(ValueError):
            chi2_quantile(prob, 2)

    @given(st.floats(0.01, 0.98), st.floats(0.001, 0.01), st.integers(1, 80))
    def test_monotone(self, p, dp, k):
        q = chi2_quantile(p, k)
        assert chi2_quantile(p + dp, k) > q
        assert chi2_quantile(p, k + 1) > q
