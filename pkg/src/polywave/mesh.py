"""Polygonal meshes: construction, classification and shape diagnostics.

Meshes are collections of simple polygons with shared straight faces.
Generators produce clipped Voronoi tessellations of rectangles (optionally
Lloyd-relaxed, optionally mirror-symmetric about the rectangle midline so
that a two-subdomain split is mesh-conforming) and structured quad/triangle
grids.  A mesh is immutable after construction; classification returns a
new instance.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial import Voronoi

# face tag codes
INTERIOR = 0
DIRICHLET = 1
NEUMANN = 2
INTERFACE_OPEN = 3
INTERFACE_SEALED = 4
UNSET = -1

TAG_NAMES = {
    INTERIOR: "interior",
    DIRICHLET: "dirichlet",
    NEUMANN: "neumann",
    INTERFACE_OPEN: "interface-open",
    INTERFACE_SEALED: "interface-sealed",
    UNSET: "unset",
}

# physics labels, in normal-orientation priority order (first owns the
# face normal on an interface, so normals point poroelastic -> acoustic)
LABEL_PRIORITY = {"poroelastic": 0, "elastic": 1, "acoustic": 2}


class MeshError(Exception):
    pass


@dataclass(frozen=True)
class Face:
    """Read-only view of one mesh face."""

    endpoints: tuple
    measure: float
    normal: np.ndarray
    elements: tuple
    tag: int
    tau: float

    @property
    def tag_name(self):
        return TAG_NAMES[self.tag]


@dataclass
class RegularityReport:
    """Worst face/inscribed-triangle ratios per element (smaller is rounder)."""

    element_ratio: np.ndarray
    global_max: float
    inscribed_area: list  # per element, per local face


# ---------------------------------------------------------------------------
# polygon primitives
# ---------------------------------------------------------------------------

def signed_area(pts):
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)


def polygon_centroid(pts):
    x, y = pts[:, 0], pts[:, 1]
    xr, yr = np.roll(x, -1), np.roll(y, -1)
    cross = x * yr - xr * y
    a = 0.5 * np.sum(cross)
    cx = np.sum((x + xr) * cross) / (6.0 * a)
    cy = np.sum((y + yr) * cross) / (6.0 * a)
    return np.array([cx, cy]), a


def polygon_diameter(pts):
    d2 = np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=-1)
    return float(np.sqrt(d2.max()))


def point_in_polygon(p, pts, tol=0.0):
    """Ray-casting test; points on the boundary count as inside."""
    x, y = p
    n = len(pts)
    inside = False
    for i in range(n):
        x1, y1 = pts[i]
        x2, y2 = pts[(i + 1) % n]
        # on-edge check
        dx, dy = x2 - x1, y2 - y1
        L2 = dx * dx + dy * dy
        if L2 > 0.0:
            t = ((x - x1) * dx + (y - y1) * dy) / L2
            if 0.0 <= t <= 1.0:
                px, py = x1 + t * dx, y1 + t * dy
                if (x - px) ** 2 + (y - py) ** 2 <= max(tol, 1e-14 * L2) ** 2 + 1e-30:
                    return True
        if (y1 > y) != (y2 > y):
            xin = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if x < xin:
                inside = not inside
    return inside


def _segments_properly_intersect(p1, p2, q1, q2):
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    return d1 * d2 < 0.0 and d3 * d4 < 0.0


def polygon_is_simple(pts):
    n = len(pts)
    for i in range(n):
        a1, a2 = pts[i], pts[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            if _segments_properly_intersect(a1, a2, pts[j], pts[(j + 1) % n]):
                return False
    return True


def polygon_is_convex(pts):
    n = len(pts)
    sign = 0
    for i in range(n):
        a, b, c = pts[i], pts[(i + 1) % n], pts[(i + 2) % n]
        cr = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])
        if cr != 0.0:
            if sign == 0:
                sign = 1 if cr > 0 else -1
            elif (cr > 0) != (sign > 0):
                return False
    return True


def triangle_in_polygon(tri, poly, tol=None):
    if tol is None:
        tol = 1e-12 * polygon_diameter(poly)
    for v in tri:
        if not point_in_polygon(v, poly, tol=tol):
            return False
    for i in range(3):
        a1, a2 = tri[i], tri[(i + 1) % 3]
        for j in range(len(poly)):
            if _segments_properly_intersect(a1, a2, poly[j], poly[(j + 1) % len(poly)]):
                return False
    return True


# ---------------------------------------------------------------------------
# mesh container
# ---------------------------------------------------------------------------

class PolyMesh:
    """Immutable 2D polygonal mesh with oriented, classified faces.

    Faces are stored as flat arrays (endpoint vertex ids, adjacency,
    unit normal oriented outward from ``face_elems[:, 0]``, 1D measure,
    tag code and interface permeability).
    """

    def __init__(self, vertices, elements, labels=None, _faces=None):
        self.vertices = np.asarray(vertices, dtype=float)
        elems = []
        for loop in elements:
            loop = np.asarray(loop, dtype=np.int64)
            if len(loop) < 3:
                raise MeshError("element with fewer than 3 vertices")
            pts = self.vertices[loop]
            if signed_area(pts) < 0.0:
                loop = loop[::-1]
                pts = pts[::-1]
            if not polygon_is_simple(pts):
                raise MeshError("self-intersecting element polygon")
            if signed_area(pts) <= 0.0:
                raise MeshError("element with non-positive area")
            elems.append(loop)
        self.elements = elems
        self.n_elements = len(elems)
        if labels is None:
            labels = ["elastic"] * self.n_elements
        self.labels = list(labels)
        if len(self.labels) != self.n_elements:
            raise MeshError("one subdomain label per element required")

        self.centroid = np.empty((self.n_elements, 2))
        self.area = np.empty(self.n_elements)
        self.diameter = np.empty(self.n_elements)
        self.bbox = np.empty((self.n_elements, 4))  # xmin xmax ymin ymax
        for e, loop in enumerate(self.elements):
            pts = self.vertices[loop]
            c, a = polygon_centroid(pts)
            self.centroid[e] = c
            self.area[e] = a
            self.diameter[e] = polygon_diameter(pts)
            self.bbox[e] = (pts[:, 0].min(), pts[:, 0].max(),
                            pts[:, 1].min(), pts[:, 1].max())

        if _faces is None:
            self._build_faces()
        else:
            (self.face_vertices, self.face_elems, self.face_normal,
             self.face_measure, self.face_tag, self.face_tau) = _faces
        self.n_faces = len(self.face_vertices)
        self._build_elem_faces()

    # -- construction helpers ------------------------------------------------

    def _build_faces(self):
        edge_map = {}
        for e, loop in enumerate(self.elements):
            for k in range(len(loop)):
                a, b = int(loop[k]), int(loop[(k + 1) % len(loop)])
                edge_map.setdefault((min(a, b), max(a, b)), []).append((e, a, b))
        fv, fe, fn, fm = [], [], [], []
        for key in sorted(edge_map):
            owners = edge_map[key]
            if len(owners) > 2:
                raise MeshError(f"face {key} shared by more than two elements")
            e0, a, b = owners[0]
            t = self.vertices[b] - self.vertices[a]
            L = float(np.hypot(*t))
            if L <= 0.0:
                raise MeshError("zero-length face")
            fv.append((a, b))
            fe.append((e0, owners[1][0] if len(owners) == 2 else -1))
            fn.append((t[1] / L, -t[0] / L))  # outward for ccw owner e0
            fm.append(L)
        self.face_vertices = np.array(fv, dtype=np.int64)
        self.face_elems = np.array(fe, dtype=np.int64)
        self.face_normal = np.array(fn)
        self.face_measure = np.array(fm)
        self.face_tag = np.where(self.face_elems[:, 1] >= 0, INTERIOR, UNSET)
        self.face_tau = np.full(len(fv), np.nan)

    def _build_elem_faces(self):
        self.elem_faces = [[] for _ in range(self.n_elements)]
        for f in range(self.n_faces):
            e0, e1 = self.face_elems[f]
            self.elem_faces[e0].append((f, 1.0))
            if e1 >= 0:
                self.elem_faces[e1].append((f, -1.0))

    # -- views ----------------------------------------------------------------

    def face(self, f):
        return Face(tuple(self.face_vertices[f]), float(self.face_measure[f]),
                    self.face_normal[f].copy(), tuple(self.face_elems[f]),
                    int(self.face_tag[f]), float(self.face_tau[f]))

    @property
    def faces(self):
        return [self.face(f) for f in range(self.n_faces)]

    @property
    def h_max(self):
        return float(self.diameter.max())

    def face_midpoints(self):
        a = self.vertices[self.face_vertices[:, 0]]
        b = self.vertices[self.face_vertices[:, 1]]
        return 0.5 * (a + b)

    def boundary_faces(self):
        return np.nonzero(self.face_elems[:, 1] < 0)[0]

    def interface_faces(self):
        return np.nonzero((self.face_tag == INTERFACE_OPEN)
                          | (self.face_tag == INTERFACE_SEALED))[0]

    def element_points(self, e):
        return self.vertices[self.elements[e]]

    def locate(self, p):
        """Element containing p; face ties resolved to the lowest element id."""
        hits = []
        for e in range(self.n_elements):
            xmin, xmax, ymin, ymax = self.bbox[e]
            if not (xmin - 1e-12 <= p[0] <= xmax + 1e-12
                    and ymin - 1e-12 <= p[1] <= ymax + 1e-12):
                continue
            if point_in_polygon(p, self.element_points(e)):
                hits.append(e)
        if not hits:
            raise MeshError(f"point {p} outside the mesh")
        if len(hits) > 1:
            warnings.warn(f"point {tuple(p)} lies on a face; assigned to element {hits[0]}")
        return hits[0]


# ---------------------------------------------------------------------------
# boundary / interface classification
# ---------------------------------------------------------------------------

def classify_boundary(mesh, tagger, tau=None):
    """Tag boundary faces via ``tagger(midpoint) -> 'dirichlet'|'neumann'``.

    Interface faces (different physics labels on the two sides) are detected
    automatically and tagged open or sealed from the permeability ``tau``
    (scalar or ``tau(midpoint)``, default 1).  The poroelastic side is moved
    first in the adjacency so face normals point out of it.
    """
    fe = mesh.face_elems.copy()
    fn = mesh.face_normal.copy()
    ft = mesh.face_tag.copy()
    fb = mesh.face_tau.copy()
    mids = mesh.face_midpoints()
    name_to_tag = {"dirichlet": DIRICHLET, "neumann": NEUMANN}
    for f in range(mesh.n_faces):
        e0, e1 = fe[f]
        if e1 < 0:
            name = tagger(mids[f])
            if name not in name_to_tag:
                raise MeshError(
                    f"boundary face {f} at {tuple(mids[f])} got no valid tag ({name!r})")
            ft[f] = name_to_tag[name]
        elif mesh.labels[e0] != mesh.labels[e1]:
            t = tau(mids[f]) if callable(tau) else (1.0 if tau is None else tau)
            if not 0.0 <= t <= 1.0:
                raise MeshError(f"interface permeability {t} outside [0, 1]")
            ft[f] = INTERFACE_SEALED if t == 0.0 else INTERFACE_OPEN
            fb[f] = t
            if LABEL_PRIORITY.get(mesh.labels[e1], 9) < LABEL_PRIORITY.get(mesh.labels[e0], 9):
                fe[f] = e1, e0
                fn[f] = -fn[f]
    return PolyMesh(mesh.vertices, mesh.elements, mesh.labels,
                    _faces=(mesh.face_vertices.copy(), fe, fn,
                            mesh.face_measure.copy(), ft, fb))


# ---------------------------------------------------------------------------
# shape regularity
# ---------------------------------------------------------------------------

def _best_inscribed_triangle(base_a, base_b, poly, centroid):
    """Largest triangle on the given face that fits inside the polygon."""
    best = 0.0
    candidates = [centroid] + [v for v in poly
                               if not (np.array_equal(v, base_a) or np.array_equal(v, base_b))]
    for apex in candidates:
        tri = np.array([base_a, base_b, apex])
        area = abs(signed_area(tri))
        if area > best and triangle_in_polygon(tri, poly):
            best = area
    return best


def regularity_report(mesh):
    """Per-element max of h |F| / (d |S_F|) over faces, d = 2.

    S_F is the triangle spanned by the face and the element centroid when
    that triangle lies inside the element, otherwise the best inscribed
    triangle found by vertex sampling.
    """
    ratios = np.empty(mesh.n_elements)
    areas = []
    for e in range(mesh.n_elements):
        poly = mesh.element_points(e)
        convex = polygon_is_convex(poly)
        c = mesh.centroid[e]
        worst = 0.0
        s_list = []
        for f, _sign in mesh.elem_faces[e]:
            a, b = mesh.face_vertices[f]
            pa, pb = mesh.vertices[a], mesh.vertices[b]
            tri = np.array([pa, pb, c])
            s = abs(signed_area(tri))
            if s <= 0.0 or not (convex or triangle_in_polygon(tri, poly)):
                s = _best_inscribed_triangle(pa, pb, poly, c)
            if s <= 0.0:
                raise MeshError(f"no inscribed triangle found on a face of element {e}")
            s_list.append(s)
            worst = max(worst, mesh.diameter[e] * mesh.face_measure[f] / (2.0 * s))
        ratios[e] = worst
        areas.append(np.array(s_list))
    return RegularityReport(ratios, float(ratios.max()), areas)


# ---------------------------------------------------------------------------
# Voronoi generation
# ---------------------------------------------------------------------------

def _mirror_points(pts, rect):
    x0, x1, y0, y1 = rect
    refl = [pts * (-1, 1) + (2 * x0, 0), pts * (-1, 1) + (2 * x1, 0),
            pts * (1, -1) + (0, 2 * y0), pts * (1, -1) + (0, 2 * y1)]
    return np.vstack([pts] + refl)


def _clipped_cells(seeds, rect):
    """Exact Voronoi cells of seeds clipped to the rectangle (mirror trick)."""
    vor = Voronoi(_mirror_points(seeds, rect))
    cells = []
    for i in range(len(seeds)):
        region = vor.regions[vor.point_region[i]]
        if -1 in region:
            raise MeshError("unbounded Voronoi cell; seed outside the domain?")
        ids = np.asarray(region, dtype=np.int64)
        pts = vor.vertices[ids]
        ang = np.arctan2(pts[:, 1] - pts[:, 1].mean(), pts[:, 0] - pts[:, 0].mean())
        order = np.argsort(ang)
        cells.append(ids[order])
    return cells, vor.vertices


def _weld_and_build(cells, coords, rect, labels=None, snap_x=(), snap_y=()):
    used = sorted({int(i) for loop in cells for i in loop})
    pts = coords[np.array(used)].copy()
    x0, x1, y0, y1 = rect
    scale = max(x1 - x0, y1 - y0)
    tol = 1e-9 * scale
    for v in list(snap_x) + [x0, x1]:
        pts[np.abs(pts[:, 0] - v) < tol, 0] = v
    for v in list(snap_y) + [y0, y1]:
        pts[np.abs(pts[:, 1] - v) < tol, 1] = v
    # merge near-duplicate vertices (rare sliver edges from qhull)
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    remap = {}
    canon = []  # (coord, new id)
    for idx in order:
        p = pts[idx]
        target = None
        for q, nid in reversed(canon[-8:]):
            if abs(p[0] - q[0]) < tol and abs(p[1] - q[1]) < tol:
                target = nid
                break
        if target is None:
            canon.append((p, len(canon)))
            target = len(canon) - 1
        remap[used[idx]] = target
    new_pts = np.array([c for c, _ in sorted(canon, key=lambda t: t[1])])
    loops = []
    for loop in cells:
        ids = [remap[int(i)] for i in loop]
        dedup = [ids[k] for k in range(len(ids)) if ids[k] != ids[(k - 1) % len(ids)]]
        loops.append(np.array(dedup, dtype=np.int64))
    return PolyMesh(new_pts, loops, labels)


def generate_voronoi_mesh(domain, n_elements, lloyd_iters=0, rng_seed=0, labeler=None):
    """Lloyd-relaxed clipped Voronoi mesh of a rectangle.

    ``domain = (x0, x1, y0, y1)``; deterministic for a fixed seed.
    """
    x0, x1, y0, y1 = map(float, domain)
    if not (x1 > x0 and y1 > y0):
        raise MeshError("degenerate domain rectangle")
    if n_elements < 1:
        raise MeshError("need at least one element")
    rng = np.random.default_rng(rng_seed)
    seeds = np.column_stack([rng.uniform(x0, x1, n_elements),
                             rng.uniform(y0, y1, n_elements)])
    rect = (x0, x1, y0, y1)
    for _ in range(lloyd_iters):
        cells, coords = _clipped_cells(seeds, rect)
        seeds = np.array([polygon_centroid(coords[loop])[0] for loop in cells])
    cells, coords = _clipped_cells(seeds, rect)
    labels = None
    centers = [polygon_centroid(coords[loop])[0] for loop in cells]
    if labeler is not None:
        labels = [labeler(c) for c in centers]
    return _weld_and_build(cells, coords, rect, labels)


def generate_mirrored_voronoi_mesh(domain, n_half, lloyd_iters=0, rng_seed=0,
                                   axis="x", labeler=None):
    """Voronoi mesh mirror-symmetric about the domain midline.

    The midline is an exact union of cell faces, so a subdomain split
    there is conforming.  ``n_half`` seeds populate the upper/right half;
    the total element count is ``2 * n_half``.
    """
    x0, x1, y0, y1 = map(float, domain)
    if not (x1 > x0 and y1 > y0):
        raise MeshError("degenerate domain rectangle")
    rect = (x0, x1, y0, y1)
    ia = 0 if axis == "x" else 1
    mid = 0.5 * (rect[2 * ia] + rect[2 * ia + 1])

    def mirror(p):
        q = p.copy()
        q[:, ia] = 2.0 * mid - q[:, ia]
        return q

    rng = np.random.default_rng(rng_seed)
    lo = np.array([x0, y0], dtype=float)
    hi = np.array([x1, y1], dtype=float)
    lo[ia] = mid
    seeds = rng.uniform(lo, hi, size=(n_half, 2))
    for _ in range(lloyd_iters):
        pts = np.vstack([seeds, mirror(seeds)])
        cells, coords = _clipped_cells(pts, rect)
        # cells of upper-half seeds stay in the upper half (the bisector with
        # the mirror seed is the midline), so centroids never cross it
        seeds = np.array([polygon_centroid(coords[loop])[0] for loop in cells[:n_half]])
    pts = np.vstack([seeds, mirror(seeds)])
    cells, coords = _clipped_cells(pts, rect)
    centers = [polygon_centroid(coords[loop])[0] for loop in cells]
    labels = [labeler(c) for c in centers] if labeler is not None else None
    snap = {"snap_x": [mid]} if axis == "x" else {"snap_y": [mid]}
    return _weld_and_build(cells, coords, rect, labels, **snap)


def generate_grid_mesh(domain, nx, ny, kind="quad", labeler=None):
    """Structured quadrilateral or triangle mesh of a rectangle."""
    x0, x1, y0, y1 = map(float, domain)
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    verts = np.array([(x, y) for y in ys for x in xs])
    vid = lambda i, j: j * (nx + 1) + i
    loops = []
    for j in range(ny):
        for i in range(nx):
            q = [vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)]
            if kind == "quad":
                loops.append(q)
            elif kind == "tri":
                loops.append([q[0], q[1], q[2]])
                loops.append([q[0], q[2], q[3]])
            else:
                raise MeshError(f"unknown grid kind {kind!r}")
    labels = None
    if labeler is not None:
        labels = []
        for loop in loops:
            c, _ = polygon_centroid(verts[np.asarray(loop)])
            labels.append(labeler(c))
    return PolyMesh(verts, loops, labels)


# ---------------------------------------------------------------------------
# plain-text mesh files
# ---------------------------------------------------------------------------

def write_mesh(mesh, path):
    with open(path, "w") as fh:
        fh.write("polymesh 1\n")
        fh.write(f"{len(mesh.vertices)} {mesh.n_elements}\n")
        for x, y in mesh.vertices:
            fh.write(f"{x:.17g} {y:.17g}\n")
        for loop, label in zip(mesh.elements, mesh.labels):
            fh.write(f"{len(loop)} " + " ".join(map(str, loop)) + f" {label}\n")


def read_mesh(path):
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0].split()[0] != "polymesh":
        raise MeshError(f"{path}: not a polymesh file")
    nv, ne = map(int, lines[1].split())
    verts = np.array([[float(t) for t in lines[2 + i].split()] for i in range(nv)])
    loops, labels = [], []
    for i in range(ne):
        tok = lines[2 + nv + i].split()
        k = int(tok[0])
        loops.append([int(t) for t in tok[1:1 + k]])
        labels.append(tok[1 + k])
    return PolyMesh(verts, loops, labels)
