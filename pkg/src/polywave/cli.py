"""Batch front-end: JSON run configs, verification suites, demos, outputs.

Subcommands: run, converge, regularity, dump-operators.  A run assembles
the requested problem, marches it, and writes deterministic CSV artifacts
(energy trace, probe traces, error report) plus optional legacy-VTK
snapshots; wall-clock timings go to a separate metadata file so repeated
runs are byte-identical.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

# honored only when set before the numerics libraries spin up their pools
if "POLYWAVE_THREADS" in os.environ:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, os.environ["POLYWAVE_THREADS"])

import numpy as np

from . import analysis, forms, mesh as meshmod, sources
from .fespace import DgSpace, l2_project
from .forms import PenaltyParams, body_moment, face_penalties
from .linalg import write_matrix_market
from .materials import AcousticMaterial, ElasticMaterial, PoroMaterial
from .timeint import LeapfrogParams, NewmarkParams, integrate


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass
class MeshSpec:
    kind: str = "voronoi"          # voronoi | mirrored-voronoi | grid | file
    domain: tuple = (0.0, 1.0, 0.0, 1.0)
    n: int = 100
    lloyd: int = 2
    seed: int = 1
    axis: str = "x"                # mirrored-voronoi split axis
    nx: int = 8
    ny: int = 8
    grid_kind: str = "quad"
    path: str = ""
    labels: dict = field(default_factory=dict)  # region rules -> physics label


@dataclass
class IntegratorSpec:
    scheme: str = "newmark"
    beta: float = 0.25
    gamma: float = 0.5


@dataclass
class OutputSpec:
    directory: str = "out"
    energy_every: int = 100
    snapshots: tuple = ()
    probes: tuple = ()


@dataclass
class RunConfig:
    kind: str
    mesh: MeshSpec
    degree: int
    T: float
    dt: float
    materials: dict
    penalties: PenaltyParams = field(default_factory=PenaltyParams)
    integrator: IntegratorSpec = field(default_factory=IntegratorSpec)
    bc: object = "dirichlet"
    tau: object = 1.0
    manufactured: str | None = None
    point_sources: tuple = ()
    output: OutputSpec = field(default_factory=OutputSpec)
    run_id: str = "run"
    history_every: int = 25


def _need(cfg, key, path):
    if key not in cfg:
        raise ConfigError(f"{path}.{key}: missing required field")
    return cfg[key]


def parse_config(cfg, base_dir="."):
    """Validate a JSON dict into a RunConfig; errors carry the field path."""
    kind = _need(cfg, "kind", "config")
    if kind not in ("elastic", "poro", "coupled"):
        raise ConfigError(f"config.kind: unknown problem kind {kind!r}")
    mcfg = dict(_need(cfg, "mesh", "config"))
    ms = MeshSpec(**{**{"kind": "voronoi"}, **mcfg})
    if ms.kind == "file":
        ms.path = str(Path(base_dir) / ms.path)
    dt = float(_need(cfg, "dt", "config"))
    T = float(_need(cfg, "T", "config"))
    if dt <= 0:
        raise ConfigError("config.dt: must be positive")
    if T < dt:
        raise ConfigError("config.T: must be at least dt")
    pen = PenaltyParams(**cfg.get("penalties", {}))
    icfg = cfg.get("integrator", {"scheme": "newmark"})
    integ = IntegratorSpec(**icfg)
    if integ.scheme not in ("newmark", "leapfrog"):
        raise ConfigError(f"config.integrator.scheme: unknown scheme {integ.scheme!r}")
    out = OutputSpec(**cfg.get("output", {}))
    return RunConfig(
        kind=kind, mesh=ms, degree=int(_need(cfg, "degree", "config")),
        T=T, dt=dt, materials=_need(cfg, "materials", "config"),
        penalties=pen, integrator=integ, bc=cfg.get("bc", "dirichlet"),
        tau=cfg.get("tau", 1.0), manufactured=cfg.get("manufactured"),
        point_sources=tuple(cfg.get("point_sources", ())), output=out,
        run_id=cfg.get("run_id", "run"),
        history_every=int(cfg.get("history_every", 25)))


def load_config(path):
    with open(path) as fh:
        cfg = json.load(fh)
    if "desk_scale" in cfg:
        cfg = dict(cfg)  # overrides applied only under --desk-scale
    return cfg


# ---------------------------------------------------------------------------
# mesh / materials / boundary plumbing
# ---------------------------------------------------------------------------

def _region_match(rule, point):
    ops = {"x_below": lambda v: point[0] < v, "x_above": lambda v: point[0] >= v,
           "y_below": lambda v: point[1] < v, "y_above": lambda v: point[1] >= v}
    for key, val in rule.items():
        if key not in ops:
            raise ConfigError(f"region rule: unknown key {key!r}")
        if not ops[key](val):
            return False
    return True


def _labeler(spec, default):
    rules = spec.labels
    if not rules:
        return lambda c: default

    def labeler(c):
        for label, rule in rules.items():
            if _region_match(rule, c):
                return label
        return default

    return labeler


def build_mesh(spec, kind):
    default_label = {"elastic": "elastic", "poro": "poroelastic",
                     "coupled": "poroelastic"}[kind]
    labeler = _labeler(spec, default_label)
    if spec.kind == "voronoi":
        return meshmod.generate_voronoi_mesh(spec.domain, spec.n, spec.lloyd,
                                             spec.seed, labeler=labeler)
    if spec.kind == "mirrored-voronoi":
        return meshmod.generate_mirrored_voronoi_mesh(
            spec.domain, spec.n, spec.lloyd, spec.seed, axis=spec.axis,
            labeler=labeler)
    if spec.kind == "grid":
        return meshmod.generate_grid_mesh(spec.domain, spec.nx, spec.ny,
                                          kind=spec.grid_kind, labeler=labeler)
    if spec.kind == "file":
        return meshmod.read_mesh(spec.path)
    raise ConfigError(f"mesh.kind: unknown generator {spec.kind!r}")


def _tagger(bc, domain):
    if bc in ("dirichlet", "neumann"):
        return lambda p: bc
    if isinstance(bc, dict):
        x0, x1, y0, y1 = domain

        def tagger(p):
            tol = 1e-9 * max(x1 - x0, y1 - y0)
            side = None
            if abs(p[0] - x0) < tol:
                side = "left"
            elif abs(p[0] - x1) < tol:
                side = "right"
            elif abs(p[1] - y0) < tol:
                side = "bottom"
            elif abs(p[1] - y1) < tol:
                side = "top"
            return bc.get(side, bc.get("default"))

        return tagger
    raise ConfigError(f"config.bc: unsupported boundary spec {bc!r}")


def _tau_fn(tau):
    if isinstance(tau, (int, float)):
        return float(tau)
    rules = [(r.get("where", {}), float(r["value"])) for r in tau]

    def fn(p):
        for rule, val in rules:
            if _region_match(rule, p):
                return val
        return 1.0

    return fn


def _mesh_domain(spec, mesh):
    if spec.kind in ("voronoi", "mirrored-voronoi", "grid"):
        return spec.domain
    v = mesh.vertices
    return (v[:, 0].min(), v[:, 0].max(), v[:, 1].min(), v[:, 1].max())


_ELASTIC_KEYS = {"rho", "lam", "mu", "zeta"}
_PORO_KEYS = {"rho_f", "rho_s", "phi", "a", "eta", "k", "m", "beta", "lam", "mu"}
_ACOUSTIC_KEYS = {"rho_a", "c"}


def _per_element(mesh, space, entries, build, path):
    """Expand material entries (optionally region-restricted) per element."""
    if isinstance(entries, dict):
        entries = [entries]
    mats = []
    for ent in entries:
        ent = dict(ent)
        where = ent.pop("where", None)
        try:
            mats.append((where, build(ent)))
        except (TypeError, ValueError) as err:
            raise ConfigError(f"{path}: {err}") from err
    out = []
    for le in range(len(space.elements)):
        c = mesh.centroid[space.elements[le]]
        mat = None
        for where, m in mats:
            if where is None or _region_match(where, c):
                mat = m
                break
        if mat is None:
            raise ConfigError(f"{path}: no material matches element at {tuple(c)}")
        out.append(mat)
    return out


def elastic_coeffs(mesh, space, materials, path="config.materials"):
    mats = _per_element(mesh, space, materials, lambda d: ElasticMaterial(**d), path)
    arr = lambda f: np.array([f(m) for m in mats])
    return {"rho": arr(lambda m: m.rho), "lam": arr(lambda m: m.lam),
            "mu": arr(lambda m: m.mu), "zeta": arr(lambda m: m.zeta)}


def poro_coeffs(mesh, space, materials, path="config.materials"):
    mats = _per_element(mesh, space, materials, lambda d: PoroMaterial(**d), path)
    arr = lambda f: np.array([f(m) for m in mats])
    return {"rho": arr(lambda m: m.rho), "rho_f": arr(lambda m: m.rho_f),
            "rho_w": arr(lambda m: m.rho_w), "eta_k": arr(lambda m: m.eta / m.k),
            "m": arr(lambda m: m.m), "beta": arr(lambda m: m.beta),
            "lam": arr(lambda m: m.lam), "mu": arr(lambda m: m.mu),
            "rho_u": arr(lambda m: m.rho_u), "phi": arr(lambda m: m.phi)}


def acoustic_coeffs(mesh, space, materials, path="config.materials"):
    mats = _per_element(mesh, space, materials, lambda d: AcousticMaterial(**d), path)
    arr = lambda f: np.array([f(m) for m in mats])
    return {"rho_a": arr(lambda m: m.rho_a), "c": arr(lambda m: m.c)}


# ---------------------------------------------------------------------------
# case assembly
# ---------------------------------------------------------------------------

@dataclass
class Case:
    config: RunConfig
    mesh: object
    spaces: dict
    coeffs: dict
    system: object
    sol: object = None
    x0: np.ndarray = None
    z0: np.ndarray = None
    history: object = None


def _pad(system, vec, sl):
    out = np.zeros(system.n)
    out[sl] = vec
    return out


def _attach_manufactured(case):
    cfg = case.config
    sys_ = case.system
    lay = sys_.layout
    pen = cfg.penalties
    sol = case.sol
    if cfg.kind == "elastic":
        sp = case.spaces["u"]
        co = case.coeffs["elastic"]
        eta = face_penalties(sp, 2 * co["lam"] + 2 * co["mu"], pen.sigma0)
        for fn, spatial in sol.force_u_terms():
            sys_.load_terms.append((fn, body_moment(sp, spatial)))
        for fn, spatial in sol.u_terms():
            sys_.load_terms.append((fn, forms.elastic_dirichlet_moment(
                sp, spatial, co["lam"], co["mu"], eta)))
        case.x0 = l2_project(sp, lambda pts: sol.u(0.0, pts))
        case.z0 = l2_project(sp, lambda pts: sol.ut(0.0, pts))
        return
    sp = case.spaces["u"]
    co = case.coeffs["poro"]
    eta = face_penalties(sp, 2 * co["lam"] + 2 * co["mu"], pen.sigma0)
    gamma = face_penalties(sp, co["m"], pen.m0)
    for fn, spatial in sol.force_u_terms():
        sys_.load_terms.append((fn, _pad(sys_, body_moment(sp, spatial), lay["u"])))
    for fn, spatial in sol.force_w_terms():
        sys_.load_terms.append((fn, _pad(sys_, body_moment(sp, spatial), lay["w"])))
    for fn, spatial in sol.u_terms():
        sys_.load_terms.append((fn, _pad(sys_, forms.elastic_dirichlet_moment(
            sp, spatial, co["lam"], co["mu"], eta), lay["u"])))
    # Dirichlet lifting of the combined normal trace (beta u + w) . n; it is
    # tested against beta v + z, so the u rows carry the beta-scaled moment
    lift = _combined_normal_lift(sp, sol, co, gamma)
    if lift is not None:
        fn, vec = lift
        sys_.load_terms.append((fn, _pad(sys_, forms.beta_diag(sp, co["beta"]) @ vec,
                                         lay["u"])))
        sys_.load_terms.append((fn, _pad(sys_, vec, lay["w"])))
    xs = [l2_project(sp, lambda pts: sol.u(0.0, pts)),
          l2_project(sp, lambda pts: sol.w(0.0, pts))]
    zs = [l2_project(sp, lambda pts: sol.ut(0.0, pts)),
          l2_project(sp, lambda pts: sol.wt(0.0, pts))]
    if cfg.kind == "coupled":
        sa = case.spaces["phi"]
        ca = case.coeffs["acoustic"]
        chi = face_penalties(sa, ca["rho_a"], pen.rho0)
        for fn, spatial in sol.force_phi_terms():
            sys_.load_terms.append((fn, _pad(sys_, body_moment(sa, spatial), lay["phi"])))
        for fn, spatial in sol.phi_terms():
            sys_.load_terms.append((fn, _pad(sys_, forms.acoustic_dirichlet_moment(
                sa, spatial, ca["rho_a"], chi), lay["phi"])))
        xs.append(l2_project(sa, lambda pts: sol.phi(0.0, pts)))
        zs.append(l2_project(sa, lambda pts: sol.phit(0.0, pts)))
    case.x0 = np.concatenate(xs)
    case.z0 = np.concatenate(zs)
    case.history = analysis.PoroHistoryError(
        sp, lay, co, sol, cfg.dt, every=cfg.history_every)


def _combined_normal_lift(space, sol, coeffs, gamma):
    """Dirichlet moment of the normal trace of beta u + w.

    The manufactured pairs share a single time factor, so the spatial part
    of the combined field is (beta * shape_u + shape_w) and the lifting is
    one (time_fn, vector) term; returns None when the datum vanishes.
    """
    terms_u, terms_w = sol.u_terms(), sol.w_terms()
    if len(terms_u) != 1 or len(terms_w) != 1:
        raise ConfigError("combined Dirichlet lifting expects one time factor")
    fn, spatial_u = terms_u[0]
    spatial_w = terms_w[0][1]
    beta = coeffs["beta"]
    mesh = space.mesh
    _, dirichlet = forms.face_sets(space)
    out = np.zeros(space.n_dofs)
    for f, le in dirichlet:
        n = mesh.face_normal[f]
        order = 2 * int(space.degree[le]) + 4
        rule, fvals, fgrads = space.face_tab(f, le, order)
        gv = (beta[le] * spatial_u(rule.points) + spatial_w(rule.points)) @ n
        if np.abs(gv).max() <= 1e-15:
            continue
        m = fvals.shape[0]
        w = rule.weights
        lift = np.empty(2 * m)
        for c in range(2):
            pen_t = gamma[f] * n[c] * (fvals @ (w * gv))
            cons = coeffs["m"][le] * (fgrads[:, :, c] @ (w * gv))
            lift[c * m:(c + 1) * m] = pen_t - cons
        out[space.element_dofs(le)] += lift
    if not out.any():
        return None
    return fn, out


def _attach_point_sources(case):
    sys_ = case.system
    lay = sys_.layout
    for src in case.config.point_sources:
        kind = src.get("kind", "point-force")
        wl = sources.Wavelet(**src.get("wavelet", {}))
        fn = sources.wavelet_fn(wl)
        target = src.get("field", "u")
        sp = case.spaces["phi"] if target == "phi" else case.spaces["u"]
        if kind == "point-force":
            _, vec = sources.point_force_load(sp, src["location"],
                                              src["direction"], fn)
        elif kind == "double-couple":
            _, vec = sources.double_couple_load(sp, src["location"],
                                                np.asarray(src["moment"]), fn)
        elif kind == "disk":
            centers = np.asarray(src["centers"], dtype=float)
            radius = float(src["radius"])

            def indicator(pts):
                inside = np.zeros(len(pts))
                for cpt in centers:
                    inside += (np.sum((pts - cpt) ** 2, axis=1) <= radius ** 2)
                return np.minimum(inside, 1.0)

            vec = body_moment(sp, indicator)
        else:
            raise ConfigError(f"point_sources.kind: unknown source {kind!r}")
        sys_.load_terms.append((fn, _pad(sys_, vec, lay[target])))


def build_case(cfg):
    if isinstance(cfg, dict):
        cfg = parse_config(cfg)
    mesh = build_mesh(cfg.mesh, cfg.kind)
    domain = _mesh_domain(cfg.mesh, mesh)
    mesh = meshmod.classify_boundary(mesh, _tagger(cfg.bc, domain),
                                     tau=_tau_fn(cfg.tau))
    spaces = {}
    coeffs = {}
    if cfg.kind == "elastic":
        sp = DgSpace(mesh, cfg.degree, components=2)
        spaces["u"] = sp
        coeffs["elastic"] = elastic_coeffs(mesh, sp, cfg.materials.get(
            "elastic", cfg.materials))
    elif cfg.kind == "poro":
        sp = DgSpace(mesh, cfg.degree, components=2)
        spaces["u"] = sp
        coeffs["poro"] = poro_coeffs(mesh, sp, cfg.materials.get(
            "poroelastic", cfg.materials))
    else:
        sp = DgSpace(mesh, cfg.degree, components=2, labels="poroelastic")
        sa = DgSpace(mesh, cfg.degree, components=1, labels="acoustic")
        spaces.update({"u": sp, "phi": sa})
        coeffs["poro"] = poro_coeffs(mesh, sp, _need(cfg.materials, "poroelastic",
                                                     "config.materials"))
        coeffs["acoustic"] = acoustic_coeffs(mesh, sa, _need(
            cfg.materials, "acoustic", "config.materials"))
    system = forms.build_block_system(cfg.kind, spaces, coeffs, cfg.penalties)
    case = Case(cfg, mesh, spaces, coeffs, system,
                x0=np.zeros(system.n), z0=np.zeros(system.n))
    if cfg.manufactured:
        case.sol = _manufactured_for(cfg)
        _attach_manufactured(case)
    if cfg.point_sources:
        _attach_point_sources(case)
    return case


def _manufactured_for(cfg):
    name = cfg.manufactured
    if cfg.kind == "elastic":
        mat = ElasticMaterial(**(cfg.materials.get("elastic", cfg.materials)
                                 if isinstance(cfg.materials, dict) else cfg.materials))
        return sources.manufactured_solution(name, rho=mat.rho, lam=mat.lam,
                                             mu=mat.mu, zeta=mat.zeta)
    poro = cfg.materials.get("poroelastic", cfg.materials)
    pm = PoroMaterial(**poro)
    kw = dict(rho_f=pm.rho_f, rho_s=pm.rho_s, phi=pm.phi, a=pm.a, eta=pm.eta,
              k=pm.k, m=pm.m, beta=pm.beta, lam=pm.lam, mu=pm.mu)
    if cfg.kind == "coupled":
        am = AcousticMaterial(**cfg.materials["acoustic"])
        return sources.manufactured_solution(name, rho_a=am.rho_a, c=am.c, **kw)
    return sources.manufactured_solution(name, **kw)


def integrator_params(cfg):
    if cfg.integrator.scheme == "leapfrog":
        return LeapfrogParams(dt=cfg.dt)
    return NewmarkParams(dt=cfg.dt, beta=cfg.integrator.beta,
                         gamma=cfg.integrator.gamma)


# ---------------------------------------------------------------------------
# outputs
# ---------------------------------------------------------------------------

class ProbeRecorder:
    def __init__(self, case, points, every):
        self.every = every
        self.rows = []
        self.points = [np.asarray(p, dtype=float) for p in points]
        sp = case.spaces["u"]
        self.sp = sp
        self.hosts = [sp.local_index(case.mesh.locate(p)) for p in self.points]
        self.layout = case.system.layout

    def __call__(self, k, state):
        if k % self.every:
            return
        row = [state.t]
        xu = state.x[self.layout["u"]]
        for p, le in zip(self.points, self.hosts):
            val = self.sp.eval_field(xu, le, p[None, :])[0]
            row.extend(val)
        self.rows.append(row)

    def write(self, path):
        with open(path, "w") as fh:
            cols = ["t"] + [f"u{c}_p{i}" for i in range(len(self.points))
                            for c in (0, 1)]
            fh.write(",".join(cols) + "\n")
            for row in self.rows:
                fh.write(",".join(f"{v:.12e}" for v in row) + "\n")


class SnapshotWriter:
    def __init__(self, case, times, directory):
        self.case = case
        self.dt = case.config.dt
        self.steps = {int(round(t / self.dt)): t for t in times}
        self.directory = Path(directory)
        self.written = []

    def __call__(self, k, state):
        if k not in self.steps:
            return
        path = self.directory / f"snapshot_{self.steps[k]:.6g}.vtk"
        write_vtk_snapshot(path, self.case, state)
        self.written.append(path)


def _cell_fields(case, state):
    """(name, kind, per-element cell values, per-vertex point values)."""
    cfg = case.config
    lay = case.system.layout
    out = []
    spu = case.spaces["u"]

    def sample(space, coeffs, vec=False):
        cell, point = [], []
        for le in range(len(space.elements)):
            e = space.elements[le]
            pts = case.mesh.element_points(e)
            vals = space.eval_field(coeffs, le, pts)
            rule, bv, _ = space.volume_tab(le, 2)
            avg = space.eval_field(coeffs, le, rule.points)
            w = rule.weights / rule.weights.sum()
            cell.append(w @ avg if vec else float(w @ avg))
            point.append(vals)
        return cell, point

    xu = state.x[lay["u"]]
    zu = state.z[lay["u"]]
    cu, pu = sample(spu, xu, vec=True)
    cv, pv = sample(spu, zu, vec=True)
    out.append(("displacement", "vector", spu, cu, pu))
    out.append(("velocity_magnitude", "scalar", spu,
                [np.hypot(*c) for c in cv], [np.hypot(v[:, 0], v[:, 1]) for v in pv]))
    if cfg.kind in ("poro", "coupled"):
        co = case.coeffs["poro"]
        xw = state.x[lay["w"]]
        pcell, ppoint = [], []
        for le in range(len(spu.elements)):
            e = spu.elements[le]
            pts = case.mesh.element_points(e)
            _, Gu = spu.eval_field(xu, le, pts, grad=True)
            _, Gw = spu.eval_field(xw, le, pts, grad=True)
            pr = -co["m"][le] * (co["beta"][le] * (Gu[:, 0, 0] + Gu[:, 1, 1])
                                 + Gw[:, 0, 0] + Gw[:, 1, 1])
            ppoint.append(pr)
            pcell.append(float(pr.mean()))
        out.append(("pressure", "scalar", spu, pcell, ppoint))
    if cfg.kind == "coupled":
        sa = case.spaces["phi"]
        ca = case.coeffs["acoustic"]
        zphi = state.z[lay["phi"]]
        pcell, ppoint = [], []
        for le in range(len(sa.elements)):
            e = sa.elements[le]
            pts = case.mesh.element_points(e)
            pr = ca["rho_a"][le] * sa.eval_field(zphi, le, pts)
            ppoint.append(pr)
            pcell.append(float(pr.mean()))
        out.append(("acoustic_pressure", "scalar", sa, pcell, ppoint))
    return out


def write_vtk_snapshot(path, case, state):
    """Legacy-VTK polygons with cell-averaged and vertex-sampled data.

    Vertices are duplicated per cell so discontinuities survive; fields
    defined on one subdomain are zero-padded on the other cells.
    """
    mesh = case.mesh
    fields = _cell_fields(case, state)
    spaces = []
    for _name, _kind, space, _cell, _point in fields:
        if space not in spaces:
            spaces.append(space)
    elems = [(sp, le) for sp in spaces for le in range(len(sp.elements))]
    sizes = [len(mesh.elements[sp.elements[le]]) for sp, le in elems]
    npts = sum(sizes)
    ncell = len(elems)
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(f"polywave snapshot t={state.t:.9g}\n")
        fh.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {npts} double\n")
        for sp, le in elems:
            for x, y in mesh.element_points(sp.elements[le]):
                fh.write(f"{x:.9g} {y:.9g} 0\n")
        fh.write(f"CELLS {ncell} {npts + ncell}\n")
        off = 0
        for k in sizes:
            fh.write(f"{k} " + " ".join(str(off + i) for i in range(k)) + "\n")
            off += k
        fh.write(f"CELL_TYPES {ncell}\n")
        fh.write("7\n" * ncell)
        fh.write(f"CELL_DATA {ncell}\n")
        for name, kind, space, cell, _point in fields:
            vec = kind == "vector"
            if vec:
                fh.write(f"VECTORS {name} double\n")
            else:
                fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
            pad = "0 0 0" if vec else "0"
            for sp, le in elems:
                if sp is not space:
                    fh.write(pad + "\n")
                elif vec:
                    fh.write(f"{cell[le][0]:.9g} {cell[le][1]:.9g} 0\n")
                else:
                    fh.write(f"{cell[le]:.9g}\n")
        fh.write(f"POINT_DATA {npts}\n")
        for name, kind, space, _cell, point in fields:
            vec = kind == "vector"
            if vec:
                fh.write(f"VECTORS {name}_pt double\n")
            else:
                fh.write(f"SCALARS {name}_pt double 1\nLOOKUP_TABLE default\n")
            pad = "0 0 0" if vec else "0"
            for (sp, le), k in zip(elems, sizes):
                if sp is not space:
                    fh.write("\n".join([pad] * k) + "\n")
                elif vec:
                    fh.write("\n".join(f"{v[0]:.9g} {v[1]:.9g} 0"
                                       for v in point[le]) + "\n")
                else:
                    fh.write("\n".join(f"{v:.9g}" for v in point[le]) + "\n")


def write_energy_csv(path, monitor):
    with open(path, "w") as fh:
        fh.write("step,t,energy,kinetic,potential,dissipated\n")
        for r in monitor.records:
            fh.write(f"{r['step']},{r['t']:.12e},{r['energy']:.12e},"
                     f"{r['kinetic']:.12e},{r['potential']:.12e},"
                     f"{r['dissipated']:.12e}\n")


# ---------------------------------------------------------------------------
# run / converge
# ---------------------------------------------------------------------------

def run_case(cfg, out_dir=None):
    """Assemble, integrate, write artifacts; returns a result summary."""
    t_start = time.perf_counter()
    case = build_case(cfg)
    cfg = case.config
    out = Path(out_dir or cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    monitor = analysis.EnergyMonitor(case.system, every=cfg.output.energy_every)
    observers = [monitor]
    if case.history is not None:
        observers.append(case.history)
    probes = None
    if cfg.output.probes:
        probes = ProbeRecorder(case, cfg.output.probes, cfg.output.energy_every)
        observers.append(probes)
    if cfg.output.snapshots:
        observers.append(SnapshotWriter(case, cfg.output.snapshots, out))
    state = integrate(case.system, case.x0, case.z0, cfg.T,
                      integrator_params(cfg), observers=observers)
    wall = time.perf_counter() - t_start
    write_energy_csv(out / "energy.csv", monitor)
    if probes is not None:
        probes.write(out / "probes.csv")
    report = None
    if case.sol is not None:
        report = compute_case_errors(case, state, wall)
        # timings go to metadata.json so repeated runs yield identical CSVs
        analysis.write_error_csv(out / "errors.csv",
                                 [dataclasses.replace(report, wall_s=None)])
    with open(out / "metadata.json", "w") as fh:
        json.dump({"run_id": cfg.run_id, "wall_s": wall,
                   "n_dofs": case.system.n, "h": case.mesh.h_max,
                   "finished_t": state.t}, fh, indent=1)
    return {"state": state, "report": report, "monitor": monitor, "case": case,
            "wall_s": wall}


def compute_case_errors(case, state, wall=None):
    cfg = case.config
    pen = cfg.penalties
    if cfg.kind == "elastic":
        return analysis.elastic_error_report(
            case.spaces["u"], case.coeffs["elastic"], pen, state, case.sol,
            run_id=cfg.run_id, wall_s=wall)
    if cfg.kind == "poro":
        return analysis.poro_error_report(
            case.spaces["u"], case.system.layout, case.coeffs["poro"], pen,
            state, case.sol, history=case.history, run_id=cfg.run_id, wall_s=wall)
    return analysis.coupled_error_report(
        case.spaces["u"], case.spaces["phi"], case.system.layout,
        case.coeffs["poro"], case.coeffs["acoustic"], pen, state, case.sol,
        history=case.history, run_id=cfg.run_id, wall_s=wall)


def run_convergence_suite(suite, out_dir=None):
    """h-sweep (meshes x degrees) or p-sweep (one mesh, many degrees)."""
    base = suite["base"]
    degrees = suite.get("degrees", [2, 3, 4])
    meshes = suite.get("meshes")  # list of mesh-size entries
    out = Path(out_dir or suite.get("out", "out"))
    out.mkdir(parents=True, exist_ok=True)
    reports = []
    rate_rows = []
    if suite.get("mode", "h") == "h":
        for p in degrees:
            series = []
            for ms in meshes:
                cfg = json.loads(json.dumps(base))
                cfg["degree"] = p
                cfg["mesh"] = {**cfg["mesh"], **ms}
                cfg["run_id"] = f"{cfg.get('run_id', 'suite')}-p{p}-n{cfg['mesh']['n']}"
                res = run_case(cfg, out_dir=out / cfg["run_id"])
                series.append(res["report"])
            reports.extend(series)
            pairwise, slope = analysis.convergence_rates(
                [r.err_energy for r in series], [r.h for r in series])
            rate_rows.append([f"rate:p={p}", base["kind"], "", str(p), "",
                              f"{slope:.6f}", "", "", "",
                              ";".join("" if r is None else f"{r:.4f}"
                                       for r in pairwise)])
    else:
        for p in degrees:
            cfg = json.loads(json.dumps(base))
            cfg["degree"] = p
            cfg["run_id"] = f"{cfg.get('run_id', 'psweep')}-p{p}"
            res = run_case(cfg, out_dir=out / cfg["run_id"])
            reports.append(res["report"])
    analysis.write_error_csv(out / "errors.csv",
                             [dataclasses.replace(r, wall_s=None) for r in reports],
                             extra_rows=rate_rows)
    return reports, rate_rows


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _apply_desk_scale(cfg):
    overrides = cfg.get("desk_scale", {})
    merged = dict(cfg)
    for key, val in overrides.items():
        if isinstance(val, dict) and isinstance(merged.get(key), dict):
            merged[key] = {**merged[key], **val}
        else:
            merged[key] = val
    merged.pop("desk_scale", None)
    return merged


def main(argv=None):
    ap = argparse.ArgumentParser(prog="polywave",
                                 description="polytopal DG wave solver")
    sub = ap.add_subparsers(dest="cmd", required=True)

    runp = sub.add_parser("run", help="run one configured case")
    runp.add_argument("config")
    runp.add_argument("--out", default=None)
    runp.add_argument("--desk-scale", action="store_true",
                      help="apply the config's desk_scale overrides")
    runp.add_argument("--mesh", default=None, metavar="FILE",
                      help="override the config's mesh with a mesh file")
    runp.add_argument("--voronoi", default=None, metavar="n=N,seed=S[,lloyd=L]",
                      help="override the config's mesh generator parameters")

    conv = sub.add_parser("converge", help="run a convergence suite")
    conv.add_argument("suite")
    conv.add_argument("--out", default=None)

    reg = sub.add_parser("regularity", help="shape-regularity report of a mesh")
    reg.add_argument("--mesh", default=None, help="mesh file")
    reg.add_argument("--voronoi", default=None, help="n=<N>,seed=<S>[,lloyd=<L>]")
    reg.add_argument("--domain", default="0,1,0,1")

    dump = sub.add_parser("dump-operators", help="write M, D, A in MatrixMarket")
    dump.add_argument("config")
    dump.add_argument("--out", required=True)

    args = ap.parse_args(argv)
    if args.cmd == "run":
        cfg = load_config(args.config)
        if args.desk_scale:
            cfg = _apply_desk_scale(cfg)
        if args.mesh:
            cfg["mesh"] = {"kind": "file", "path": args.mesh,
                           "labels": cfg.get("mesh", {}).get("labels", {})}
        if args.voronoi:
            kv = dict(tok.split("=") for tok in args.voronoi.split(","))
            cfg["mesh"] = {**cfg.get("mesh", {}),
                           **{k: int(v) for k, v in kv.items()}}
        res = run_case(cfg, out_dir=args.out)
        rep = res["report"]
        if rep is not None:
            print(f"h={rep.h:.4f} p={rep.p} dofs={rep.dofs} "
                  f"energy_error={rep.err_energy:.6e}")
        print(f"done in {res['wall_s']:.1f}s")
        return 0
    if args.cmd == "converge":
        with open(args.suite) as fh:
            suite = json.load(fh)
        reports, rates = run_convergence_suite(suite, out_dir=args.out)
        for row in rates:
            print(f"{row[0]} slope={row[5]}")
        return 0
    if args.cmd == "regularity":
        if args.voronoi:
            kv = dict(tok.split("=") for tok in args.voronoi.split(","))
            domain = tuple(float(t) for t in args.domain.split(","))
            m = meshmod.generate_voronoi_mesh(domain, int(kv["n"]),
                                              int(kv.get("lloyd", 2)),
                                              int(kv.get("seed", 1)))
        elif args.mesh:
            m = meshmod.read_mesh(args.mesh)
        else:
            ap.error("regularity needs --mesh or --voronoi")
        rep = meshmod.regularity_report(m)
        print(f"elements={m.n_elements} h={m.h_max:.6g} "
              f"max_ratio={rep.global_max:.6g}")
        return 0
    if args.cmd == "dump-operators":
        cfg = load_config(args.config)
        case = build_case(cfg)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for name, M in (("M", case.system.m), ("D", case.system.d),
                        ("A", case.system.a)):
            write_matrix_market(M, out / f"{name}.mtx")
        with open(out / "layout.json", "w") as fh:
            json.dump({k: [v.start, v.stop] for k, v in
                       case.system.layout.items()}, fh)
        print(f"wrote operators to {out}")
        return 0
    return 1


if __name__ == "__main__":
    sys.exit(main())
