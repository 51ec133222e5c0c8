"""Discontinuous piecewise-polynomial spaces on polygonal meshes.

Each element carries a modal basis of total degree <= p built from tensor
Legendre polynomials on the element bounding box, scaled to be orthonormal
over the box.  Quadrature on a polygon is a centroid-fan sub-triangulation
with a collapsed-square Gauss rule per triangle, exact to the requested
polynomial order; face rules are 1D Gauss-Legendre.
"""

from __future__ import annotations

import numpy as np

from .mesh import MeshError


def n_modes(p):
    return (p + 1) * (p + 2) // 2


def mode_pairs(p):
    return [(i, j) for i in range(p + 1) for j in range(p + 1 - i)]


def legendre_table(x, pmax):
    """Values and derivatives of Legendre polynomials 0..pmax at points x."""
    x = np.asarray(x, dtype=float)
    P = np.empty((pmax + 1,) + x.shape)
    dP = np.empty_like(P)
    P[0] = 1.0
    dP[0] = 0.0
    if pmax >= 1:
        P[1] = x
        dP[1] = 1.0
    for k in range(1, pmax):
        P[k + 1] = ((2 * k + 1) * x * P[k] - k * P[k - 1]) / (k + 1)
        dP[k + 1] = dP[k - 1] + (2 * k + 1) * P[k]
    return P, dP


class QuadratureRule:
    """Points and positive weights integrating polynomials exactly."""

    def __init__(self, points, weights, order):
        self.points = np.asarray(points, dtype=float)
        self.weights = np.asarray(weights, dtype=float)
        self.order = order

    def __len__(self):
        return len(self.weights)


def _gauss01(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _triangle_rule(order):
    """Collapsed-square Gauss rule on the unit triangle, exact to `order`."""
    n = (order + 3) // 2
    u, wu = _gauss01(n)
    v, wv = _gauss01(n)
    U, V = np.meshgrid(u, v, indexing="ij")
    W = np.outer(wu, wv) * (1.0 - U)
    x = U.ravel()
    y = (V * (1.0 - U)).ravel()
    return np.column_stack([x, y]), W.ravel()


def element_quadrature(mesh, e, order):
    """Quadrature over polygon e via fan triangles from the centroid."""
    if order < 1:
        raise ValueError("quadrature order must be >= 1")
    poly = mesh.element_points(e)
    c = mesh.centroid[e]
    ref_pts, ref_w = _triangle_rule(order)
    pts, wts = [], []
    for k in range(len(poly)):
        a, b = poly[k], poly[(k + 1) % len(poly)]
        tri = np.array([c, a, b])
        det = (a[0] - c[0]) * (b[1] - c[1]) - (a[1] - c[1]) * (b[0] - c[0])
        if det <= 0.0:
            raise MeshError(
                f"fan triangulation of element {e} produced a non-positive triangle; "
                "nonconvex cell not star-shaped from its centroid")
        mapped = c + ref_pts[:, :1] * (a - c) + ref_pts[:, 1:] * (b - c)
        pts.append(mapped)
        wts.append(ref_w * det)
    return QuadratureRule(np.vstack(pts), np.concatenate(wts), order)


def face_quadrature(mesh, f, order):
    """1D Gauss rule along face f, weights summing to its length."""
    if order < 1:
        raise ValueError("quadrature order must be >= 1")
    a = mesh.vertices[mesh.face_vertices[f, 0]]
    b = mesh.vertices[mesh.face_vertices[f, 1]]
    n = (order + 2) // 2
    t, w = _gauss01(n)
    pts = a + t[:, None] * (b - a)
    return QuadratureRule(pts, w * mesh.face_measure[f], order)


class DgSpace:
    """Element-wise polynomial space over a (subset of a) polygonal mesh.

    components=1 gives a scalar space, components=2 the vector space used
    for displacements.  Dofs are blocked per element, component-major:
    ``[comp0 modes..., comp1 modes...]``.
    """

    def __init__(self, mesh, degree, components=1, labels=None):
        self.mesh = mesh
        if labels is None:
            self.elements = np.arange(mesh.n_elements)
        else:
            keep = set([labels] if isinstance(labels, str) else labels)
            self.elements = np.array([e for e in range(mesh.n_elements)
                                      if mesh.labels[e] in keep], dtype=np.int64)
        ne = len(self.elements)
        if ne == 0:
            raise ValueError("space has no elements")
        self.degree = np.full(ne, degree, dtype=np.int64) if np.isscalar(degree) \
            else np.asarray(degree, dtype=np.int64)
        if (self.degree < 1).any():
            raise ValueError("polynomial degree must be >= 1")
        self.components = components
        self.n_modes = (self.degree + 1) * (self.degree + 2) // 2
        sizes = components * self.n_modes
        self.dof_offsets = np.concatenate([[0], np.cumsum(sizes)])
        self.n_dofs = int(self.dof_offsets[-1])
        self._local = {int(g): i for i, g in enumerate(self.elements)}
        self._vol_cache = {}
        self._face_cache = {}
        self._check_degree_variation()

    def _check_degree_variation(self):
        # neighbouring degrees may differ by at most a factor of two
        mesh = self.mesh
        for f in range(mesh.n_faces):
            e0, e1 = mesh.face_elems[f]
            if e1 < 0 or not (self.contains(e0) and self.contains(e1)):
                continue
            p0 = self.degree[self._local[int(e0)]]
            p1 = self.degree[self._local[int(e1)]]
            if max(p0, p1) > 2 * min(p0, p1):
                raise ValueError(
                    f"degree map violates bounded variation across face {f}: "
                    f"{p0} vs {p1}")

    # -- lookup ----------------------------------------------------------------

    def local_index(self, global_elem):
        return self._local[int(global_elem)]

    def contains(self, global_elem):
        return int(global_elem) in self._local

    def element_dofs(self, le):
        return np.arange(self.dof_offsets[le], self.dof_offsets[le + 1])

    def component_dofs(self, le, c):
        m = self.n_modes[le]
        start = self.dof_offsets[le] + c * m
        return np.arange(start, start + m)

    # -- basis evaluation --------------------------------------------------------

    def basis(self, le, pts):
        """Scalar mode values and gradients at physical points: (m, n), (m, n, 2)."""
        e = self.elements[le]
        xmin, xmax, ymin, ymax = self.mesh.bbox[e]
        wx, wy = xmax - xmin, ymax - ymin
        pts = np.atleast_2d(pts)
        xi = (2.0 * pts[:, 0] - (xmin + xmax)) / wx
        eta = (2.0 * pts[:, 1] - (ymin + ymax)) / wy
        p = int(self.degree[le])
        Px, dPx = legendre_table(xi, p)
        Py, dPy = legendre_table(eta, p)
        # orthonormal over the box: scale by sqrt((2i+1)(2j+1)/(wx wy))
        m = self.n_modes[le]
        vals = np.empty((m, len(pts)))
        grads = np.empty((m, len(pts), 2))
        for k, (i, j) in enumerate(mode_pairs(p)):
            s = np.sqrt((2 * i + 1) * (2 * j + 1) / (wx * wy))
            vals[k] = s * Px[i] * Py[j]
            grads[k, :, 0] = s * dPx[i] * Py[j] * (2.0 / wx)
            grads[k, :, 1] = s * Px[i] * dPy[j] * (2.0 / wy)
        return vals, grads

    # -- cached tabulations --------------------------------------------------------

    def volume_tab(self, le, order):
        key = (le, order)
        tab = self._vol_cache.get(key)
        if tab is None:
            rule = element_quadrature(self.mesh, self.elements[le], order)
            vals, grads = self.basis(le, rule.points)
            tab = (rule, vals, grads)
            self._vol_cache[key] = tab
        return tab

    def face_tab(self, face, le, order):
        key = (face, le, order)
        tab = self._face_cache.get(key)
        if tab is None:
            rule = face_quadrature(self.mesh, face, order)
            vals, grads = self.basis(le, rule.points)
            tab = (rule, vals, grads)
            self._face_cache[key] = tab
        return tab

    # -- fields from dof vectors ------------------------------------------------

    def eval_field(self, coeffs, le, pts, grad=False):
        """Evaluate the discrete field on element le at points.

        Returns (n,) or (n, components); with grad=True also (n, 2) or
        (n, components, 2).
        """
        vals, grads = self.basis(le, pts)
        out = []
        gout = []
        for c in range(self.components):
            u = coeffs[self.component_dofs(le, c)]
            out.append(u @ vals)
            if grad:
                gout.append(np.einsum("m,mnd->nd", u, grads))
        if self.components == 1:
            return (out[0], gout[0]) if grad else out[0]
        v = np.stack(out, axis=1)
        return (v, np.stack(gout, axis=1)) if grad else v


def default_volume_order(space, le):
    return 2 * int(space.degree[le]) + 2


def l2_project(space, f, order=None):
    """Element-wise L2 projection of f(points) onto the space."""
    out = np.zeros(space.n_dofs)
    for le in range(len(space.elements)):
        rule, vals, _ = space.volume_tab(le, order or default_volume_order(space, le))
        M = np.einsum("mq,q,nq->mn", vals, rule.weights, vals)
        fv = np.asarray(f(rule.points), dtype=float)
        if space.components == 1:
            out[space.component_dofs(le, 0)] = np.linalg.solve(M, vals @ (rule.weights * fv))
        else:
            for c in range(space.components):
                b = vals @ (rule.weights * fv[:, c])
                out[space.component_dofs(le, c)] = np.linalg.solve(M, b)
    return out


def l2_norm(space, coeffs, order=None, weight=None):
    """L2 norm of a discrete field; `weight` is a per-element factor."""
    acc = 0.0
    for le in range(len(space.elements)):
        rule, vals, _ = space.volume_tab(le, order or default_volume_order(space, le))
        w = 1.0 if weight is None else weight[le]
        for c in range(space.components):
            u = coeffs[space.component_dofs(le, c)]
            acc += w * np.sum(rule.weights * (u @ vals) ** 2)
    return float(np.sqrt(acc))
