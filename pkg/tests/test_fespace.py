import numpy as np
import pytest

from polywave import fespace
from polywave.fespace import (DgSpace, element_quadrature, face_quadrature,
                              l2_project, n_modes)
from polywave.mesh import MeshError, PolyMesh, generate_voronoi_mesh


def square():
    return PolyMesh(np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float), [[0, 1, 2, 3]])


def polygon_moment2(pts):
    """Exact integral of x^2 + y^2 over a polygon (shoelace moment formulas)."""
    x, y = pts[:, 0], pts[:, 1]
    xr, yr = np.roll(x, -1), np.roll(y, -1)
    cross = x * yr - xr * y
    ix = np.sum((x * x + x * xr + xr * xr) * cross) / 12.0
    iy = np.sum((y * y + y * yr + yr * yr) * cross) / 12.0
    return ix + iy


class TestQuadrature:
    def test_unit_square_constant(self):
        rule = element_quadrature(square(), 0, 3)
        assert rule.weights.sum() == pytest.approx(1.0, abs=1e-14)

    def test_pentagon_quadratic_moment(self):
        t = np.linspace(0, 2 * np.pi, 6)[:-1] + 0.3
        pts = np.column_stack([np.cos(t), np.sin(t)])
        m = PolyMesh(pts, [list(range(5))])
        rule = element_quadrature(m, 0, 4)
        got = np.sum(rule.weights * (rule.points ** 2).sum(axis=1))
        assert got == pytest.approx(polygon_moment2(pts), abs=1e-12)

    def test_monomial_exactness_to_order(self):
        m = generate_voronoi_mesh((0, 1, 0, 1), 5, 10, rng_seed=3)
        order = 6
        for e in range(m.n_elements):
            rule = element_quadrature(m, e, order)
            pts = m.element_points(e)
            for a, b in [(0, 0), (3, 3), (6, 0), (0, 6), (2, 4)]:
                got = np.sum(rule.weights * rule.points[:, 0] ** a * rule.points[:, 1] ** b)
                ref = _poly_monomial(pts, a, b)
                assert got == pytest.approx(ref, rel=1e-12, abs=1e-13)

    def test_face_rule_weights_sum_to_length(self):
        m = square()
        for f in range(m.n_faces):
            rule = face_quadrature(m, f, 3)
            assert rule.weights.sum() == pytest.approx(m.face_measure[f], abs=1e-14)

    def test_nonstar_cell_rejected(self):
        # hook shape whose centroid falls outside
        verts = np.array([[0, 0], [4, 0], [4, 3], [3, 3], [3, 1], [1, 1], [1, 3], [0, 3]],
                         float)
        m = PolyMesh(verts, [list(range(8))])
        with pytest.raises(MeshError, match="non-positive triangle"):
            element_quadrature(m, 0, 2)


def _poly_monomial(pts, a, b):
    """Exact polygon integral of x^a y^b by fan from vertex 0 + Gauss (dense path)."""
    ref, w = fespace._triangle_rule(a + b + 1)
    total = 0.0
    v0 = pts[0]
    for k in range(1, len(pts) - 1):
        p1, p2 = pts[k], pts[k + 1]
        det = (p1[0] - v0[0]) * (p2[1] - v0[1]) - (p1[1] - v0[1]) * (p2[0] - v0[0])
        xy = v0 + ref[:, :1] * (p1 - v0) + ref[:, 1:] * (p2 - v0)
        total += det * np.sum(w * xy[:, 0] ** a * xy[:, 1] ** b)
    return total


class TestBasis:
    def test_first_mode_constant_with_zero_gradient(self):
        sp = DgSpace(square(), 3)
        pts = np.random.default_rng(0).uniform(0, 1, (7, 2))
        vals, grads = sp.basis(0, pts)
        assert np.allclose(vals[0], vals[0][0])
        assert np.allclose(grads[0], 0.0)

    def test_mode_count(self):
        assert n_modes(1) == 3
        sp = DgSpace(square(), 1, components=1)
        assert sp.n_dofs == 3
        spv = DgSpace(square(), 4, components=2)
        assert spv.n_dofs == 2 * 15

    def test_orthonormal_on_bbox(self):
        # element equals its bbox, so the local mass matrix is the identity
        sp = DgSpace(square(), 4)
        rule, vals, _ = sp.volume_tab(0, 10)
        gram = np.einsum("mq,q,nq->mn", vals, rule.weights, vals)
        assert np.allclose(gram, np.eye(len(gram)), atol=1e-12)

    def test_mass_conditioning_bounded(self):
        m = generate_voronoi_mesh((0, 1, 0, 1), 30, 20, rng_seed=2)
        for p in (1, 2, 3, 4):
            sp = DgSpace(m, p)
            worst = 0.0
            for le in range(len(sp.elements)):
                rule, vals, _ = sp.volume_tab(le, 2 * p + 2)
                gram = np.einsum("mq,q,nq->mn", vals, rule.weights, vals)
                worst = max(worst, np.linalg.cond(gram))
            assert worst < 2e3

    def test_trace_inverse_constant_monitored(self):
        m = generate_voronoi_mesh((0, 1, 0, 1), 25, 20, rng_seed=4)
        rng = np.random.default_rng(1)
        worst = 0.0
        for p in (1, 2, 3):
            sp = DgSpace(m, p)
            for le in range(len(sp.elements)):
                e = sp.elements[le]
                rule, vals, _ = sp.volume_tab(le, 2 * p + 2)
                u = rng.standard_normal(vals.shape[0])
                vol = np.sum(rule.weights * (u @ vals) ** 2)
                surf = 0.0
                for f, _sign in m.elem_faces[e]:
                    frule, fvals, _ = sp.face_tab(f, le, 2 * p + 2)
                    surf += np.sum(frule.weights * (u @ fvals) ** 2)
                c = surf * m.diameter[e] / (p * p * vol)
                worst = max(worst, c)
        assert np.isfinite(worst) and worst < 25.0


class TestProjection:
    def test_zero_function(self):
        sp = DgSpace(square(), 2)
        assert np.all(l2_project(sp, lambda pts: np.zeros(len(pts))) == 0)

    def test_linear_reproduction(self):
        m = generate_voronoi_mesh((0, 1, 0, 1), 8, 10, rng_seed=5)
        sp = DgSpace(m, 1)
        f = lambda pts: 2.0 * pts[:, 0] - 3.0 * pts[:, 1] + 0.5
        x = l2_project(sp, f)
        err = _l2_error(sp, x, f)
        assert err <= 1e-12

    def test_vector_projection(self):
        m = generate_voronoi_mesh((0, 1, 0, 1), 5, 10, rng_seed=6)
        sp = DgSpace(m, 2, components=2)
        f = lambda pts: np.column_stack([pts[:, 0] ** 2, pts[:, 1]])
        x = l2_project(sp, f)
        for le in range(len(sp.elements)):
            rule, _, _ = sp.volume_tab(le, 6)
            got = sp.eval_field(x, le, rule.points)
            assert np.allclose(got, f(rule.points), atol=1e-12)

    @pytest.mark.parametrize("p", [1, 2])
    def test_smooth_projection_rate(self, p):
        f = lambda pts: np.sin(np.pi * pts[:, 0]) * np.sin(np.pi * pts[:, 1])
        errs, hs = [], []
        for n in (10, 40, 160):
            m = generate_voronoi_mesh((0, 1, 0, 1), n, 30, rng_seed=1)
            sp = DgSpace(m, p)
            x = l2_project(sp, f)
            errs.append(_l2_error(sp, x, f))
            hs.append(m.h_max)
        slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
        assert slope >= p + 1 - 0.3


def _l2_error(sp, coeffs, f):
    acc = 0.0
    for le in range(len(sp.elements)):
        rule, _, _ = sp.volume_tab(le, 2 * int(sp.degree[le]) + 4)
        diff = sp.eval_field(coeffs, le, rule.points) - f(rule.points)
        acc += np.sum(rule.weights * diff ** 2)
    return np.sqrt(acc)


def test_degree_variation_bound_enforced():
    m = generate_voronoi_mesh((0, 1, 0, 1), 4, 10, rng_seed=1)
    with pytest.raises(ValueError, match="bounded variation"):
        DgSpace(m, [1, 4, 1, 1])
    sp = DgSpace(m, [1, 2, 1, 2])  # factor two is allowed
    assert sp.n_dofs == 2 * 3 + 2 * 6
