"""Energy and DG norms, error measurement, convergence rates.

The DG norms are Gram quadratic forms (volume + penalty terms, no
consistency terms).  Errors against an exact solution are integrated by
quadrature element by element, with jump terms from the discrete traces
(exact fields are continuous, so interior jumps reduce to the discrete
ones and Dirichlet faces see the boundary datum).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import forms
from .forms import face_penalties, face_sets

CSV_COLUMNS = ["run_id", "kind", "h", "p", "dofs", "err_energy",
               "err_L2_u", "err_L2_w", "err_L2_phi", "wall_s"]


@dataclass
class ErrorReport:
    run_id: str
    kind: str
    h: float
    p: int
    dofs: int
    err_energy: float
    err_l2: dict
    wall_s: float | None = None

    def row(self):
        fmt = lambda v: "" if v is None else f"{v:.12e}"
        return [self.run_id, self.kind, f"{self.h:.12e}", str(self.p),
                str(self.dofs), fmt(self.err_energy),
                fmt(self.err_l2.get("u")), fmt(self.err_l2.get("w")),
                fmt(self.err_l2.get("phi")), fmt(self.wall_s)]


def write_error_csv(path, reports, extra_rows=()):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in reports:
            w.writerow(r.row() if isinstance(r, ErrorReport) else r)
        for row in extra_rows:
            w.writerow(row)


# ---------------------------------------------------------------------------
# DG norms
# ---------------------------------------------------------------------------

def elastic_norm_gram(space, lam, mu, penalties=None, eta=None):
    return forms.assemble_elastic(space, lam, mu, penalties, eta=eta,
                                  consistency=False)


def divdiv_norm_gram(space, m_coeff, penalties=None, gamma=None, sealed_faces=()):
    return forms.assemble_divdiv(space, m_coeff, penalties, gamma=gamma,
                                 sealed_faces=sealed_faces, consistency=False)


def acoustic_norm_gram(space, rho_a, penalties=None, chi=None):
    return forms.assemble_acoustic(space, rho_a, penalties, chi=chi,
                                   consistency=False)


def dg_norm_elastic(space, v, lam, mu, penalties=None, gram=None):
    G = elastic_norm_gram(space, lam, mu, penalties) if gram is None else gram
    return float(np.sqrt(v @ (G @ v)))


def dg_seminorm_poro(space, z, m_coeff, penalties=None, gram=None):
    G = divdiv_norm_gram(space, m_coeff, penalties) if gram is None else gram
    return float(np.sqrt(z @ (G @ z)))


def dg_norm_acoustic(space, phi, rho_a, penalties=None, gram=None):
    G = acoustic_norm_gram(space, rho_a, penalties) if gram is None else gram
    return float(np.sqrt(phi @ (G @ phi)))


# ---------------------------------------------------------------------------
# energy monitoring
# ---------------------------------------------------------------------------

def discrete_energy(system, state):
    """(z' M z + x' A x) / 2: conserved by Newmark(1/4, 1/2) when undamped."""
    return 0.5 * float(state.z @ (system.m @ state.z) + state.x @ (system.a @ state.x))


@dataclass
class EnergyBreakdown:
    kinetic: float = 0.0
    dg_elastic: float = 0.0
    dg_poro: float = 0.0
    dg_acoustic: float = 0.0
    damping_integral: float = 0.0
    interface_integral: float = 0.0
    sealed_penalty: float = 0.0

    def total(self):
        return (self.kinetic + self.dg_elastic + self.dg_poro + self.dg_acoustic
                + self.damping_integral + self.interface_integral + self.sealed_penalty)


class EnergyMonitor:
    """Observer recording t, the discrete energy, and its M/A split."""

    def __init__(self, system, every=1, grams=None):
        self.system = system
        self.every = every
        self.grams = grams or {}
        self.records = []
        self._damp_acc = 0.0
        self._prev = None

    def __call__(self, k, state):
        sys_ = self.system
        # trapezoidal accumulation of the damping dissipation integral
        rate = float(state.z @ (sys_.d @ state.z))
        if self._prev is not None:
            t_prev, rate_prev = self._prev
            self._damp_acc += 0.5 * (rate + rate_prev) * (state.t - t_prev)
        self._prev = (state.t, rate)
        if k % self.every:
            return
        kin = 0.5 * float(state.z @ (sys_.m @ state.z))
        pot = 0.5 * float(state.x @ (sys_.a @ state.x))
        row = {"step": k, "t": state.t, "energy": kin + pot, "kinetic": kin,
               "potential": pot, "dissipated": self._damp_acc}
        for name, (G, sl) in self.grams.items():
            xs = state.x[sl]
            row[name] = float(xs @ (G @ xs))
        self.records.append(row)

    @property
    def energies(self):
        return np.array([r["energy"] for r in self.records])

    @property
    def times(self):
        return np.array([r["t"] for r in self.records])


def breakdown(system, state, grams):
    """Named energy pieces from the norm Grams (all nonnegative)."""
    out = EnergyBreakdown(kinetic=float(state.z @ (system.m @ state.z)))
    mapping = {"dg_elastic": "dg_elastic", "dg_poro": "dg_poro",
               "dg_acoustic": "dg_acoustic"}
    for key, attr in mapping.items():
        if key in grams:
            G, sl = grams[key]
            xs = state.x[sl]
            setattr(out, attr, float(xs @ (G @ xs)))
    return out


# ---------------------------------------------------------------------------
# errors against exact solutions
# ---------------------------------------------------------------------------

def _vol_quad(space, le):
    return space.volume_tab(le, 2 * int(space.degree[le]) + 4)


def l2_field_error(space, coeffs, exact, t, weight=None):
    """Squared L2 error of a discrete field against exact(t, points)."""
    acc = 0.0
    for le in range(len(space.elements)):
        rule, _, _ = _vol_quad(space, le)
        diff = space.eval_field(coeffs, le, rule.points) - exact(t, rule.points)
        w = 1.0 if weight is None else weight[le]
        if diff.ndim == 1:
            acc += w * np.sum(rule.weights * diff ** 2)
        else:
            acc += w * np.sum(rule.weights * np.sum(diff ** 2, axis=1))
    return acc


def _strain_energy_error(space, coeffs, grad_exact, t, lam, mu):
    acc = 0.0
    for le in range(len(space.elements)):
        rule, _, _ = _vol_quad(space, le)
        _, Gh = space.eval_field(coeffs, le, rule.points, grad=True)
        E = grad_exact(t, rule.points) - Gh
        eps = 0.5 * (E + E.transpose(0, 2, 1))
        tr = eps[:, 0, 0] + eps[:, 1, 1]
        dd = np.einsum("qab,qab->q", eps, eps)
        acc += np.sum(rule.weights * (lam[le] * tr ** 2 + 2.0 * mu[le] * dd))
    return acc


def _jump_error_vector(space, coeffs, exact, t, eta):
    """Penalty-weighted squared jumps of the error of a vector field."""
    mesh = space.mesh
    interior, dirichlet = face_sets(space)
    acc = 0.0
    for f, la, lb in interior:
        order = int(space.degree[la]) + int(space.degree[lb]) + 4
        rule, _, _ = space.face_tab(f, la, order)
        ua = space.eval_field(coeffs, la, rule.points)
        ub = space.eval_field(coeffs, lb, rule.points)
        jump = ua - ub  # exact field is continuous
        acc += eta[f] * np.sum(rule.weights * np.sum(jump ** 2, axis=1))
    for f, le in dirichlet:
        order = 2 * int(space.degree[le]) + 4
        rule, _, _ = space.face_tab(f, le, order)
        diff = exact(t, rule.points) - space.eval_field(coeffs, le, rule.points)
        acc += eta[f] * np.sum(rule.weights * np.sum(diff ** 2, axis=1))
    return acc


def _divdiv_error(space, coeffs, exact, grad_exact, t, m_coeff, gamma, sealed=()):
    """|error|^2 in the div seminorm + gamma-weighted normal jumps."""
    mesh = space.mesh
    acc = 0.0
    for le in range(len(space.elements)):
        rule, _, _ = _vol_quad(space, le)
        _, Gh = space.eval_field(coeffs, le, rule.points, grad=True)
        div_err = (grad_exact(t, rule.points)[:, 0, 0] + grad_exact(t, rule.points)[:, 1, 1]
                   - Gh[:, 0, 0] - Gh[:, 1, 1])
        acc += m_coeff[le] * np.sum(rule.weights * div_err ** 2)
    interior, dirichlet = face_sets(space)
    for f, la, lb in interior:
        order = int(space.degree[la]) + int(space.degree[lb]) + 4
        rule, _, _ = space.face_tab(f, la, order)
        n = mesh.face_normal[f]
        jn = (space.eval_field(coeffs, la, rule.points)
              - space.eval_field(coeffs, lb, rule.points)) @ n
        acc += gamma[f] * np.sum(rule.weights * jn ** 2)
    for f, le in list(dirichlet) + [(f, space.local_index(mesh.face_elems[f, 0]))
                                    for f in sealed]:
        order = 2 * int(space.degree[le]) + 4
        rule, _, _ = space.face_tab(f, le, order)
        n = mesh.face_normal[f]
        diff = (exact(t, rule.points) - space.eval_field(coeffs, le, rule.points)) @ n
        acc += gamma[f] * np.sum(rule.weights * diff ** 2)
    return acc


def _jump_error_scalar(space, coeffs, exact, t, chi):
    mesh = space.mesh
    interior, dirichlet = face_sets(space)
    acc = 0.0
    for f, la, lb in interior:
        order = int(space.degree[la]) + int(space.degree[lb]) + 4
        rule, _, _ = space.face_tab(f, la, order)
        jump = (space.eval_field(coeffs, la, rule.points)
                - space.eval_field(coeffs, lb, rule.points))
        acc += chi[f] * np.sum(rule.weights * jump ** 2)
    for f, le in dirichlet:
        order = 2 * int(space.degree[le]) + 4
        rule, _, _ = space.face_tab(f, le, order)
        diff = exact(t, rule.points) - space.eval_field(coeffs, le, rule.points)
        acc += chi[f] * np.sum(rule.weights * diff ** 2)
    return acc


def _grad_sq_error_scalar(space, coeffs, grad_exact, t, rho_a):
    acc = 0.0
    for le in range(len(space.elements)):
        rule, _, _ = _vol_quad(space, le)
        _, Gh = space.eval_field(coeffs, le, rule.points, grad=True)
        E = grad_exact(t, rule.points) - Gh
        acc += rho_a[le] * np.sum(rule.weights * np.sum(E ** 2, axis=1))
    return acc


class PoroHistoryError:
    """Observer accumulating the dissipation-history terms of the energy error.

    Samples |(eta/k)^(1/2) (w_t - z_w)|^2 (and the interface term when open
    faces carry a positive Robin weight) on a step cadence and integrates by
    the trapezoidal rule; also captures the initial-w term at step 0.
    """

    def __init__(self, space, layout, coeffs, sol, dt, every=25, zeta_faces=None):
        self.space = space
        self.w_slice = layout["w"]
        self.eta_k = coeffs["eta_k"]
        self.sol = sol
        self.every = every
        self.dt = dt
        self.zeta_faces = zeta_faces or {}
        self.integral = 0.0
        self.initial_term = 0.0
        self._last = None  # (t, value)

    def _sample(self, state):
        zw = state.z[self.w_slice]
        val = l2_field_error(self.space, zw, self.sol.wt, state.t, weight=self.eta_k)
        for f, zeta in self.zeta_faces.items():
            if zeta == 0.0:
                continue
            mesh = self.space.mesh
            le = self.space.local_index(mesh.face_elems[f, 0])
            rule, _, _ = self.space.face_tab(f, le, 2 * int(self.space.degree[le]) + 4)
            n = mesh.face_normal[f]
            diff = (self.sol.wt(state.t, rule.points)
                    - self.space.eval_field(zw, le, rule.points)) @ n
            val += zeta * np.sum(rule.weights * diff ** 2)
        return val

    def __call__(self, k, state):
        if k == 0:
            xw = state.x[self.w_slice]
            self.initial_term = l2_field_error(self.space, xw, self.sol.w, 0.0,
                                               weight=self.eta_k)
        if k % self.every:
            return
        val = self._sample(state)
        if self._last is not None:
            t0, v0 = self._last
            self.integral += 0.5 * (v0 + val) * (state.t - t0)
        self._last = (state.t, val)

    @property
    def value(self):
        return self.integral + self.initial_term


def elastic_error_report(space, coeffs, penalties, state, sol, *, run_id="",
                         wall_s=None, eta=None):
    lam, mu, rho, zeta = (coeffs[k] for k in ("lam", "mu", "rho", "zeta"))
    if eta is None:
        eta = face_penalties(space, 2 * lam + 2 * mu, penalties.sigma0)
    t = state.t
    kin = l2_field_error(space, state.z, sol.ut, t, weight=rho)
    zterm = l2_field_error(space, state.x, sol.u, t, weight=rho * zeta ** 2)
    dg = (_strain_energy_error(space, state.x, sol.grad_u, t, lam, mu)
          + _jump_error_vector(space, state.x, sol.u, t, eta))
    l2u = l2_field_error(space, state.x, sol.u, t)
    return ErrorReport(run_id, "elastic", space.mesh.h_max, int(space.degree.max()),
                       space.n_dofs, np.sqrt(kin + zterm + dg),
                       {"u": np.sqrt(l2u)}, wall_s)


def _poro_energy_terms(space, layout, coeffs, penalties, state, sol, history):
    t = state.t
    xu, xw = state.x[layout["u"]], state.x[layout["w"]]
    zu, zw = state.z[layout["u"]], state.z[layout["w"]]
    rho_u, rho_f, phi = coeffs["rho_u"], coeffs["rho_f"], coeffs["phi"]
    lam, mu, m_c, beta = coeffs["lam"], coeffs["mu"], coeffs["m"], coeffs["beta"]
    sealed = coeffs.get("sealed_faces", ())

    kin_u = l2_field_error(space, zu, sol.ut, t, weight=rho_u)
    zmix = zu + _beta_scale(space, zw, 1.0 / phi)
    kin_mix = l2_field_error(space, zmix, sol.mixt, t, weight=rho_f * phi)

    eta = face_penalties(space, 2 * lam + 2 * mu, penalties.sigma0)
    dg_e = (_strain_energy_error(space, xu, sol.grad_u, t, lam, mu)
            + _jump_error_vector(space, xu, sol.u, t, eta))

    gamma = face_penalties(space, m_c, penalties.m0)
    gamma.update(forms.single_sided_penalty(space, m_c, penalties.m0, sealed))
    comb = _beta_scale(space, xu, beta) + xw
    dg_p = _divdiv_error(space, comb, sol.comb, sol.comb_grad, t, m_c, gamma, sealed)

    sealed_pen = 0.0
    for f in sealed:
        le = space.local_index(space.mesh.face_elems[f, 0])
        rule, _, _ = space.face_tab(f, le, 2 * int(space.degree[le]) + 4)
        n = space.mesh.face_normal[f]
        diff = (sol.w(t, rule.points) - space.eval_field(xw, le, rule.points)) @ n
        sealed_pen += gamma[f] * np.sum(rule.weights * diff ** 2)

    hist = history.value if history is not None else 0.0
    return kin_u + kin_mix + dg_e + dg_p + sealed_pen + hist


def _beta_scale(space, vec, beta):
    out = np.empty_like(vec)
    for le in range(len(space.elements)):
        ids = space.element_dofs(le)
        out[ids] = beta[le] * vec[ids]
    return out


def poro_error_report(space, layout, coeffs, penalties, state, sol, *, history=None,
                      run_id="", wall_s=None):
    energy2 = _poro_energy_terms(space, layout, coeffs, penalties, state, sol, history)
    l2u = l2_field_error(space, state.x[layout["u"]], sol.u, state.t)
    l2w = l2_field_error(space, state.x[layout["w"]], sol.w, state.t)
    return ErrorReport(run_id, "poro", space.mesh.h_max, int(space.degree.max()),
                       2 * space.n_dofs, np.sqrt(energy2),
                       {"u": np.sqrt(l2u), "w": np.sqrt(l2w)}, wall_s)


def coupled_error_report(space_p, space_a, layout, coeffs_p, coeffs_a, penalties,
                         state, sol, *, history=None, run_id="", wall_s=None):
    poro2 = _poro_energy_terms(space_p, layout, coeffs_p, penalties, state, sol, history)
    t = state.t
    xphi = state.x[layout["phi"]]
    zphi = state.z[layout["phi"]]
    rho_a, c = coeffs_a["rho_a"], coeffs_a["c"]
    kin_a = l2_field_error(space_a, zphi, sol.phit, t, weight=rho_a / c ** 2)
    chi = face_penalties(space_a, rho_a, penalties.rho0)
    dg_a = (_grad_sq_error_scalar(space_a, xphi, sol.grad_phi, t, rho_a)
            + _jump_error_scalar(space_a, xphi, sol.phi, t, chi))
    l2u = l2_field_error(space_p, state.x[layout["u"]], sol.u, t)
    l2w = l2_field_error(space_p, state.x[layout["w"]], sol.w, t)
    l2phi = l2_field_error(space_a, xphi, sol.phi, t)
    h = max(space_p.mesh.h_max, space_a.mesh.h_max)
    return ErrorReport(run_id, "coupled", h, int(space_p.degree.max()),
                       2 * space_p.n_dofs + space_a.n_dofs,
                       np.sqrt(poro2 + kin_a + dg_a),
                       {"u": np.sqrt(l2u), "w": np.sqrt(l2w), "phi": np.sqrt(l2phi)},
                       wall_s)


# ---------------------------------------------------------------------------
# convergence rates
# ---------------------------------------------------------------------------

def convergence_rates(errors, hs):
    """Pairwise log-ratio rates and the global least-squares slope."""
    errors = np.asarray(errors, dtype=float)
    hs = np.asarray(hs, dtype=float)
    if len(errors) < 2:
        raise ValueError("need at least two samples")
    pairwise = []
    for i in range(len(errors) - 1):
        if errors[i] == 0.0 or errors[i + 1] == 0.0:
            pairwise.append(None)  # zero error: rate undefined for this pair
            continue
        pairwise.append(float(np.log(errors[i] / errors[i + 1])
                              / np.log(hs[i] / hs[i + 1])))
    keep = errors > 0
    if keep.sum() >= 2:
        slope = float(np.polyfit(np.log(hs[keep]), np.log(errors[keep]), 1)[0])
    else:
        slope = 0.0
    return pairwise, slope
