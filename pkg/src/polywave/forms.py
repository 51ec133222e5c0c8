"""Sparse assembly of the semi-discrete operators.

Every bilinear form is assembled into scipy CSR from element and face
blocks accumulated in a fixed order, so repeated runs are bitwise
reproducible.  Face terms follow the symmetric interior-penalty pattern:
volume + penalty parts are kept separable from the consistency parts
(``consistency=False`` yields the Gram matrix of the corresponding DG
norm).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .mesh import DIRICHLET, INTERFACE_OPEN, INTERFACE_SEALED, INTERIOR, UNSET


class AssemblyError(Exception):
    pass


@dataclass(frozen=True)
class PenaltyParams:
    sigma0: float = 10.0   # elastic traction penalty scale
    m0: float = 10.0       # poro normal-jump penalty scale
    rho0: float = 10.0     # acoustic penalty scale

    def __post_init__(self):
        if min(self.sigma0, self.m0, self.rho0) <= 0:
            raise ValueError("penalty parameters must be positive")


@dataclass
class BlockSystem:
    """Second-order system M x'' + D x' + A x = s(t) with block dof layout."""

    m: sp.csr_matrix
    d: sp.csr_matrix
    a: sp.csr_matrix
    layout: dict
    load_terms: list = field(default_factory=list)  # (time_fn, vector)
    damping_rate: np.ndarray | None = None          # set iff D = M @ diag(rate)
    mass_blocks: list = field(default_factory=list)  # disjoint dof-index groups

    @property
    def n(self):
        return self.m.shape[0]

    def load(self, t):
        s = np.zeros(self.n)
        for fn, vec in self.load_terms:
            s += fn(t) * vec
        return s


# ---------------------------------------------------------------------------
# bookkeeping
# ---------------------------------------------------------------------------

class _Coo:
    def __init__(self, nrows, ncols):
        self.shape = (nrows, ncols)
        self.r, self.c, self.v = [], [], []

    def add(self, rows, cols, block):
        rr, cc = np.meshgrid(rows, cols, indexing="ij")
        self.r.append(rr.ravel())
        self.c.append(cc.ravel())
        self.v.append(np.asarray(block, dtype=float).ravel())

    def tocsr(self):
        if not self.v:
            return sp.csr_matrix(self.shape)
        A = sp.coo_matrix((np.concatenate(self.v),
                           (np.concatenate(self.r), np.concatenate(self.c))),
                          shape=self.shape).tocsr()
        A.sum_duplicates()
        A.eliminate_zeros()
        return A


def face_sets(space):
    """(interior, dirichlet) faces of the space's element subset.

    interior entries are (face, local elem 0, local elem 1); dirichlet
    entries (face, local elem).  Untagged faces touching the subset are an
    assembly error.
    """
    mesh = space.mesh
    interior, dirichlet = [], []
    for f in range(mesh.n_faces):
        e0, e1 = mesh.face_elems[f]
        in0 = space.contains(e0)
        in1 = e1 >= 0 and space.contains(e1)
        tag = mesh.face_tag[f]
        if not (in0 or in1):
            continue
        if tag == INTERIOR:
            if in0 and in1:
                interior.append((f, space.local_index(e0), space.local_index(e1)))
            else:
                raise AssemblyError(
                    f"face {f} is interior but crosses the subdomain; classify the mesh")
        elif tag == UNSET:
            raise AssemblyError(f"untagged boundary face {f}; classify the mesh first")
        elif tag == DIRICHLET and in0:
            dirichlet.append((f, space.local_index(e0)))
        # Neumann and interface faces carry no terms here
    return interior, dirichlet


def interface_faces(mesh, sealed=None):
    """Interface face ids; sealed=True/False filters by tag."""
    out = []
    for f in range(mesh.n_faces):
        tag = mesh.face_tag[f]
        if tag not in (INTERFACE_OPEN, INTERFACE_SEALED):
            continue
        if sealed is None or (tag == INTERFACE_SEALED) == sealed:
            out.append(f)
    return out


def face_penalties(space, coeff, scale):
    """Face-wise penalty: scale * max over adjacent elements of coeff p^2 / h.

    Returns {face: value} over the space's interior + Dirichlet faces.
    """
    mesh = space.mesh
    interior, dirichlet = face_sets(space)

    def one(le):
        e = space.elements[le]
        p = float(space.degree[le])
        return coeff[le] * p * p / mesh.diameter[e]

    pen = {}
    for f, la, lb in interior:
        pen[f] = scale * max(one(la), one(lb))
    for f, le in dirichlet:
        pen[f] = scale * one(le)
    return pen


def single_sided_penalty(space, coeff, scale, faces):
    """Penalty on faces owned by one element of the space (sealed interface)."""
    mesh = space.mesh
    pen = {}
    for f in faces:
        le = space.local_index(mesh.face_elems[f, 0])
        p = float(space.degree[le])
        pen[f] = scale * coeff[le] * p * p / mesh.diameter[mesh.face_elems[f, 0]]
    return pen


def _wsum(tab_rows, w, tab_cols):
    return np.einsum("mq,q,nq->mn", tab_rows, w, tab_cols, optimize=True)


def _face_order(space, la, lb=None):
    pa = int(space.degree[la])
    pb = pa if lb is None else int(space.degree[lb])
    return pa + pb + 2


# ---------------------------------------------------------------------------
# mass
# ---------------------------------------------------------------------------

def assemble_mass(space, coeff):
    """Block-diagonal mass matrix with element-wise constant coeff >= 0."""
    coeff = np.asarray(coeff, dtype=float)
    acc = _Coo(space.n_dofs, space.n_dofs)
    for le in range(len(space.elements)):
        rule, vals, _ = space.volume_tab(le, 2 * int(space.degree[le]) + 2)
        gram = _wsum(vals, rule.weights, vals)
        gram = 0.5 * (gram + gram.T) * coeff[le]
        for c in range(space.components):
            dofs = space.component_dofs(le, c)
            acc.add(dofs, dofs, gram)
    return acc.tocsr()


# ---------------------------------------------------------------------------
# elastic interior-penalty form
# ---------------------------------------------------------------------------

def _traction_table(space, le, face, lam, mu, order):
    """(c, mode, point, c') components of sigma(phi e_c) n on the face."""
    mesh = space.mesh
    n = mesh.face_normal[face]
    _, fvals, fgrads = space.face_tab(face, le, order)
    m, q = fvals.shape
    gn = fgrads[:, :, 0] * n[0] + fgrads[:, :, 1] * n[1]
    T = np.empty((2, m, q, 2))
    for c in range(2):
        for cp in range(2):
            T[c, :, :, cp] = (lam * fgrads[:, :, c] * n[cp]
                              + mu * n[c] * fgrads[:, :, cp])
            if c == cp:
                T[c, :, :, cp] += mu * gn
    return T


def _elastic_volume(space, lam, mu, acc):
    for le in range(len(space.elements)):
        rule, _, grads = space.volume_tab(le, 2 * int(space.degree[le]) + 2)
        w = rule.weights
        gx, gy = grads[:, :, 0], grads[:, :, 1]
        Exx, Eyy = _wsum(gx, w, gx), _wsum(gy, w, gy)
        Exy = _wsum(gx, w, gy)
        la, m_ = lam[le], mu[le]
        K = np.block([[(la + 2 * m_) * Exx + m_ * Eyy, la * Exy + m_ * Exy.T],
                      [la * Exy.T + m_ * Exy, (la + 2 * m_) * Eyy + m_ * Exx]])
        K = 0.5 * (K + K.T)
        dofs = space.element_dofs(le)
        acc.add(dofs, dofs, K)


def _elastic_face(space, face, sides, lam, mu, eta, acc, consistency):
    """sides: [(local elem, sign)]; sign * face normal = outward normal."""
    order = _face_order(space, *(s[0] for s in sides))
    w_avg = 0.5 if len(sides) == 2 else 1.0
    rule = None
    tabs = []
    for le, sign in sides:
        r, fvals, _ = space.face_tab(face, le, order)
        rule = r
        T = _traction_table(space, le, face, lam[le], mu[le], order)
        tabs.append((le, sign, fvals, T))
    w = rule.weights
    for lt, st, fv_t, T_t in tabs:
        rows = space.element_dofs(lt)
        for ls, ss, fv_s, T_s in tabs:
            cols = space.element_dofs(ls)
            m_t, m_s = fv_t.shape[0], fv_s.shape[0]
            blk = np.zeros((2 * m_t, 2 * m_s))
            pen = eta * st * ss * _wsum(fv_t, w, fv_s)
            blk += np.kron(np.eye(2), pen)
            if consistency:
                # -({sigma(u)},[v]) and -([u],{sigma(v)}); rows (d,n), cols (c,m)
                C = (w_avg * st) * np.einsum("nq,q,cmqd->dncm", fv_t, w, T_s,
                                             optimize=True).reshape(2 * m_t, 2 * m_s)
                Ct = (w_avg * ss) * np.einsum("mq,q,dnqc->dncm", fv_s, w, T_t,
                                              optimize=True).reshape(2 * m_t, 2 * m_s)
                blk -= C + Ct
            acc.add(rows, cols, blk)


def assemble_elastic(space, lam, mu, penalties=None, eta=None, consistency=True):
    """Interior-penalty form of the elastic operator (symmetric).

    ``eta`` may be a precomputed {face: penalty}; otherwise it is derived
    from the stiffness norm 2*lam + 2*mu and ``penalties.sigma0``.
    """
    if space.components != 2:
        raise AssemblyError("elastic form needs a 2-component space")
    lam = np.asarray(lam, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if eta is None:
        dbar = 2.0 * lam + 2.0 * mu
        eta = face_penalties(space, dbar, (penalties or PenaltyParams()).sigma0)
    acc = _Coo(space.n_dofs, space.n_dofs)
    _elastic_volume(space, lam, mu, acc)
    interior, dirichlet = face_sets(space)
    for f, la, lb in interior:
        _elastic_face(space, f, [(la, 1.0), (lb, -1.0)], lam, mu, eta[f], acc, consistency)
    for f, le in dirichlet:
        _elastic_face(space, f, [(le, 1.0)], lam, mu, eta[f], acc, consistency)
    return acc.tocsr()


def elastic_dirichlet_moment(space, g, lam, mu, eta):
    """Weak-Dirichlet right-hand side for boundary datum g(points) -> (n, 2)."""
    lam = np.asarray(lam, dtype=float)
    mu = np.asarray(mu, dtype=float)
    _, dirichlet = face_sets(space)
    out = np.zeros(space.n_dofs)
    for f, le in dirichlet:
        order = _face_order(space, le) + 2
        rule, fvals, _ = space.face_tab(f, le, order)
        T = _traction_table(space, le, f, lam[le], mu[le], order)
        gv = np.asarray(g(rule.points), dtype=float)
        w = rule.weights
        m = fvals.shape[0]
        lift = np.empty(2 * m)
        for c in range(2):
            pen = eta[f] * fvals @ (w * gv[:, c])
            cons = np.einsum("mqd,q,qd->m", T[c], w, gv, optimize=True)
            lift[c * m:(c + 1) * m] = pen - cons
        out[space.element_dofs(le)] += lift
    return out


# ---------------------------------------------------------------------------
# poro div-div form
# ---------------------------------------------------------------------------

def _divdiv_face(space, face, sides, m_coeff, gamma, acc, consistency):
    order = _face_order(space, *(s[0] for s in sides))
    w_avg = 0.5 if len(sides) == 2 else 1.0
    n = space.mesh.face_normal[face]
    tabs = []
    rule = None
    for le, sign in sides:
        r, fvals, fgrads = space.face_tab(face, le, order)
        rule = r
        div = np.stack([fgrads[:, :, 0], fgrads[:, :, 1]])  # (c, m, q)
        tabs.append((le, sign, fvals, m_coeff[le] * div))
    w = rule.weights
    for lt, st, fv_t, mdiv_t in tabs:
        rows = space.element_dofs(lt)
        for ls, ss, fv_s, mdiv_s in tabs:
            cols = space.element_dofs(ls)
            m_t, m_s = fv_t.shape[0], fv_s.shape[0]
            E = _wsum(fv_t, w, fv_s)
            pen = gamma * st * ss * np.einsum("d,c,nm->dncm", n, n, E).reshape(2 * m_t, 2 * m_s)
            blk = pen
            if consistency:
                # -({m div w},[z]_n) and its transpose twin; rows (d,n), cols (c,m)
                C = (w_avg * st) * np.einsum("d,nq,q,cmq->dncm", n, fv_t, w, mdiv_s,
                                             optimize=True).reshape(2 * m_t, 2 * m_s)
                Ct = (w_avg * ss) * np.einsum("c,mq,q,dnq->dncm", n, fv_s, w, mdiv_t,
                                              optimize=True).reshape(2 * m_t, 2 * m_s)
                blk = pen - C - Ct
            acc.add(rows, cols, blk)


def assemble_divdiv(space, m_coeff, penalties=None, gamma=None, sealed_faces=(),
                    consistency=True):
    """Normal-jump-penalized (m div w, div z) form; optionally includes the
    sealed interface faces where the normal trace is constrained to zero."""
    if space.components != 2:
        raise AssemblyError("div-div form needs a 2-component space")
    m_coeff = np.asarray(m_coeff, dtype=float)
    m0 = (penalties or PenaltyParams()).m0
    if gamma is None:
        gamma = face_penalties(space, m_coeff, m0)
        gamma.update(single_sided_penalty(space, m_coeff, m0, sealed_faces))
    acc = _Coo(space.n_dofs, space.n_dofs)
    for le in range(len(space.elements)):
        rule, _, grads = space.volume_tab(le, 2 * int(space.degree[le]) + 2)
        div = np.concatenate([grads[:, :, 0], grads[:, :, 1]])  # (2m, q) comp-major
        K = m_coeff[le] * _wsum(div, rule.weights, div)
        dofs = space.element_dofs(le)
        acc.add(dofs, dofs, 0.5 * (K + K.T))
    interior, dirichlet = face_sets(space)
    for f, la, lb in interior:
        _divdiv_face(space, f, [(la, 1.0), (lb, -1.0)], m_coeff, gamma[f], acc, consistency)
    for f, le in dirichlet:
        _divdiv_face(space, f, [(le, 1.0)], m_coeff, gamma[f], acc, consistency)
    for f in sealed_faces:
        le = space.local_index(space.mesh.face_elems[f, 0])
        _divdiv_face(space, f, [(le, 1.0)], m_coeff, gamma[f], acc, consistency)
    return acc.tocsr()


def divdiv_dirichlet_moment(space, gn, m_coeff, gamma):
    """RHS lifting for the normal-trace datum gn(points) -> (n,)."""
    m_coeff = np.asarray(m_coeff, dtype=float)
    _, dirichlet = face_sets(space)
    out = np.zeros(space.n_dofs)
    mesh = space.mesh
    for f, le in dirichlet:
        order = _face_order(space, le) + 2
        rule, fvals, fgrads = space.face_tab(f, le, order)
        n = mesh.face_normal[f]
        gv = np.asarray(gn(rule.points), dtype=float)
        w = rule.weights
        m = fvals.shape[0]
        lift = np.empty(2 * m)
        for c in range(2):
            pen = gamma[f] * n[c] * (fvals @ (w * gv))
            cons = m_coeff[le] * (fgrads[:, :, c] @ (w * gv))
            lift[c * m:(c + 1) * m] = pen - cons
        out[space.element_dofs(le)] += lift
    return out


# ---------------------------------------------------------------------------
# acoustic scalar SIP form
# ---------------------------------------------------------------------------

def _acoustic_face(space, face, sides, rho_a, chi, acc, consistency):
    order = _face_order(space, *(s[0] for s in sides))
    w_avg = 0.5 if len(sides) == 2 else 1.0
    n = space.mesh.face_normal[face]
    tabs = []
    rule = None
    for le, sign in sides:
        r, fvals, fgrads = space.face_tab(face, le, order)
        rule = r
        gn = rho_a[le] * (fgrads[:, :, 0] * n[0] + fgrads[:, :, 1] * n[1])
        tabs.append((le, sign, fvals, gn))
    w = rule.weights
    for lt, st, fv_t, gn_t in tabs:
        rows = space.element_dofs(lt)
        for ls, ss, fv_s, gn_s in tabs:
            cols = space.element_dofs(ls)
            blk = chi * st * ss * _wsum(fv_t, w, fv_s)
            if consistency:
                blk = blk - (w_avg * st) * _wsum(fv_t, w, gn_s) \
                          - (w_avg * ss) * _wsum(gn_t, w, fv_s)
            acc.add(rows, cols, blk)


def assemble_acoustic(space, rho_a, penalties=None, chi=None, consistency=True):
    """Scalar SIP Laplacian with coefficient rho_a."""
    if space.components != 1:
        raise AssemblyError("acoustic form needs a scalar space")
    rho_a = np.asarray(rho_a, dtype=float)
    if chi is None:
        chi = face_penalties(space, rho_a, (penalties or PenaltyParams()).rho0)
    acc = _Coo(space.n_dofs, space.n_dofs)
    for le in range(len(space.elements)):
        rule, _, grads = space.volume_tab(le, 2 * int(space.degree[le]) + 2)
        K = rho_a[le] * (_wsum(grads[:, :, 0], rule.weights, grads[:, :, 0])
                         + _wsum(grads[:, :, 1], rule.weights, grads[:, :, 1]))
        dofs = space.element_dofs(le)
        acc.add(dofs, dofs, 0.5 * (K + K.T))
    interior, dirichlet = face_sets(space)
    for f, la, lb in interior:
        _acoustic_face(space, f, [(la, 1.0), (lb, -1.0)], rho_a, chi[f], acc, consistency)
    for f, le in dirichlet:
        _acoustic_face(space, f, [(le, 1.0)], rho_a, chi[f], acc, consistency)
    return acc.tocsr()


def acoustic_dirichlet_moment(space, g, rho_a, chi):
    rho_a = np.asarray(rho_a, dtype=float)
    _, dirichlet = face_sets(space)
    out = np.zeros(space.n_dofs)
    mesh = space.mesh
    for f, le in dirichlet:
        order = _face_order(space, le) + 2
        rule, fvals, fgrads = space.face_tab(f, le, order)
        n = mesh.face_normal[f]
        gn = rho_a[le] * (fgrads[:, :, 0] * n[0] + fgrads[:, :, 1] * n[1])
        gv = np.asarray(g(rule.points), dtype=float)
        w = rule.weights
        out[space.element_dofs(le)] += chi[f] * (fvals @ (w * gv)) - gn @ (w * gv)
    return out


# ---------------------------------------------------------------------------
# interface coupling and Robin terms
# ---------------------------------------------------------------------------

def assemble_coupling(space_p, space_a, rho_a, faces):
    """(rho_a phi, v . n_p) over the interface; rows poro dofs, cols acoustic."""
    mesh = space_p.mesh
    rho_a = np.asarray(rho_a, dtype=float)
    acc = _Coo(space_p.n_dofs, space_a.n_dofs)
    for f in faces:
        e_p, e_a = mesh.face_elems[f]
        if not (space_p.contains(e_p) and space_a.contains(e_a)):
            raise AssemblyError(
                f"interface face {f} is not oriented poro -> acoustic; reclassify")
        lp, la = space_p.local_index(e_p), space_a.local_index(e_a)
        order = int(space_p.degree[lp]) + int(space_a.degree[la]) + 2
        rule, fv_p, _ = space_p.face_tab(f, lp, order)
        _, fv_a, _ = space_a.face_tab(f, la, order)
        n = mesh.face_normal[f]
        E = rho_a[la] * _wsum(fv_p, rule.weights, fv_a)
        rows = space_p.element_dofs(lp)
        blk = np.concatenate([n[0] * E, n[1] * E])
        acc.add(rows, space_a.element_dofs(la), blk)
    return acc.tocsr()


def assemble_robin_interface(space_p, zeta_by_face):
    """(zeta_tau w . n_p, z . n_p) over open interface faces (poro side)."""
    mesh = space_p.mesh
    acc = _Coo(space_p.n_dofs, space_p.n_dofs)
    for f, zeta in zeta_by_face.items():
        if mesh.face_tag[f] != INTERFACE_OPEN:
            raise AssemblyError(f"face {f} is not an open interface face")
        if zeta == 0.0:
            continue
        le = space_p.local_index(mesh.face_elems[f, 0])
        order = _face_order(space_p, le)
        rule, fvals, _ = space_p.face_tab(f, le, order)
        n = mesh.face_normal[f]
        E = zeta * _wsum(fvals, rule.weights, fvals)
        m = fvals.shape[0]
        blk = np.einsum("a,b,nm->anbm", n, n, E).reshape(2 * m, 2 * m)
        dofs = space_p.element_dofs(le)
        acc.add(dofs, dofs, blk)
    return acc.tocsr()


def body_moment(space, f):
    """Moments (f, basis) of a spatial field f(points) -> (n,) or (n, 2)."""
    out = np.zeros(space.n_dofs)
    for le in range(len(space.elements)):
        rule, vals, _ = space.volume_tab(le, 2 * int(space.degree[le]) + 4)
        fv = np.asarray(f(rule.points), dtype=float)
        if space.components == 1:
            out[space.component_dofs(le, 0)] = vals @ (rule.weights * fv)
        else:
            for c in range(space.components):
                out[space.component_dofs(le, c)] = vals @ (rule.weights * fv[:, c])
    return out


# ---------------------------------------------------------------------------
# beta scaling and block systems
# ---------------------------------------------------------------------------

def beta_diag(space, beta):
    """Diagonal matrix scaling each element block by its Biot coefficient."""
    d = np.empty(space.n_dofs)
    for le in range(len(space.elements)):
        d[space.element_dofs(le)] = beta[le]
    return sp.diags(d).tocsr()


def mass_index_blocks(space, paired=None, offset=0, offsets_paired=0):
    """Dof-index groups that make the mass matrix block-diagonal.

    With ``paired`` (a second field on the same space, e.g. the filtration
    displacement), each group joins the matching component blocks of both
    fields, which the cross-density terms couple.
    """
    blocks = []
    for le in range(len(space.elements)):
        for c in range(space.components):
            ids = space.component_dofs(le, c) + offset
            if paired is not None:
                ids = np.concatenate([ids, space.component_dofs(le, c) + offsets_paired])
            blocks.append(ids)
    return blocks


def build_elastic_system(space, coeffs, penalties=PenaltyParams()):
    """Viscoelastic system: M_rho x'' + M_2rz x' + (A_e + M_rz2) x = s."""
    rho, lam, mu, zeta = (coeffs[k] for k in ("rho", "lam", "mu", "zeta"))
    m = assemble_mass(space, rho)
    d = assemble_mass(space, 2.0 * rho * zeta)
    a_e = assemble_elastic(space, lam, mu, penalties)
    a = (a_e + assemble_mass(space, rho * zeta * zeta)).tocsr()
    rate = np.empty(space.n_dofs)
    for le in range(len(space.elements)):
        rate[space.element_dofs(le)] = 2.0 * zeta[le]
    return BlockSystem(m, d, a, layout={"u": slice(0, space.n_dofs)},
                       damping_rate=rate,
                       mass_blocks=mass_index_blocks(space))


def build_poro_system(space, coeffs, penalties=PenaltyParams()):
    """Two-displacement low-frequency system over (u, w) on a shared space."""
    n = space.n_dofs
    rho, rho_f, rho_w = (coeffs[k] for k in ("rho", "rho_f", "rho_w"))
    m_r = assemble_mass(space, rho)
    m_rf = assemble_mass(space, rho_f)
    m_rw = assemble_mass(space, rho_w)
    m = sp.bmat([[m_r, m_rf], [m_rf, m_rw]], format="csr")
    d = sp.bmat([[sp.csr_matrix((n, n)), None],
                 [None, assemble_mass(space, coeffs["eta_k"])]], format="csr")
    a_e = assemble_elastic(space, coeffs["lam"], coeffs["mu"], penalties)
    a_p = assemble_divdiv(space, coeffs["m"], penalties,
                          sealed_faces=coeffs.get("sealed_faces", ()))
    P = beta_diag(space, coeffs["beta"])
    a = sp.bmat([[a_e + P @ a_p @ P, P @ a_p], [a_p @ P, a_p]], format="csr")
    return BlockSystem(m, d, a,
                       layout={"u": slice(0, n), "w": slice(n, 2 * n)},
                       mass_blocks=mass_index_blocks(space, paired=space,
                                                     offsets_paired=n))


def build_coupled_system(space_p, space_a, coeffs_p, coeffs_a,
                         penalties=PenaltyParams(), tau_by_face=None):
    """Poro-elasto-acoustic block system with skew interface coupling."""
    mesh = space_p.mesh
    tau_by_face = tau_by_face or {
        f: mesh.face_tau[f] for f in interface_faces(mesh)}
    sealed = [f for f, t in tau_by_face.items() if t == 0.0]
    open_ = [f for f, t in tau_by_face.items() if t > 0.0]
    coeffs_p = dict(coeffs_p)
    coeffs_p["sealed_faces"] = sealed
    base = build_poro_system(space_p, coeffs_p, penalties)
    n_p = space_p.n_dofs
    n_a = space_a.n_dofs

    rho_a, c = coeffs_a["rho_a"], coeffs_a["c"]
    m_a = assemble_mass(space_a, rho_a / (c * c))
    a_a = assemble_acoustic(space_a, rho_a, penalties)
    m = sp.bmat([[base.m, None], [None, m_a]], format="csr")
    a = sp.bmat([[base.a, None], [None, a_a]], format="csr")

    all_ifaces = sealed + open_
    C = assemble_coupling(space_p, space_a, rho_a, sorted(all_ifaces))
    zeta_by_face = {f: (1.0 - tau_by_face[f]) / tau_by_face[f] for f in open_}
    B = (assemble_mass(space_p, coeffs_p["eta_k"])
         + assemble_robin_interface(space_p, zeta_by_face)).tocsr()
    d = sp.bmat([[None, None, C],
                 [None, B, C],
                 [-C.T, -C.T, None]], format="csr")
    blocks = (mass_index_blocks(space_p, paired=space_p, offsets_paired=n_p)
              + mass_index_blocks(space_a, offset=2 * n_p))
    return BlockSystem(m, d, a,
                       layout={"u": slice(0, n_p), "w": slice(n_p, 2 * n_p),
                               "phi": slice(2 * n_p, 2 * n_p + n_a)},
                       mass_blocks=blocks)


def build_block_system(kind, spaces, coeffs, penalties=PenaltyParams(),
                       sources=None, tau_by_face=None):
    """Assemble the block system for kind in {elastic, poro, coupled}."""
    if kind == "elastic":
        sys_ = build_elastic_system(spaces["u"], coeffs["elastic"], penalties)
    elif kind == "poro":
        sys_ = build_poro_system(spaces["u"], coeffs["poro"], penalties)
    elif kind == "coupled":
        sys_ = build_coupled_system(spaces["u"], spaces["phi"], coeffs["poro"],
                                    coeffs["acoustic"], penalties, tau_by_face)
    else:
        raise AssemblyError(f"unknown problem kind {kind!r}")
    if sources:
        sys_.load_terms.extend(sources)
    return sys_
