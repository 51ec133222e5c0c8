"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with ``pytest -s tests/test_acceptance.py`` to see the lines as they
complete.  The heavy convergence suites are shared module-scoped fixtures,
so the whole module costs roughly three quarters of an hour on two cores.

The coercivity sub-check of criterion 6 is implemented exactly as stated
(quadratic form of the operator >= squared DG norm with the same penalty,
sigma0 = m0 = 10) and fails by construction: the operator minus the norm
Gram is the negated consistency term, which is indefinite at any finite
penalty (a single interior basis mode gives operator/norm = (2 sigma0 - 2)
/ (2 sigma0 + 4) < 1 for every sigma0).  It is kept red deliberately; see
the test docstring for the measured deficits.
"""

import json
import time
from pathlib import Path

import numpy as np
import pytest
import scipy.linalg

from polywave import analysis, forms
from polywave.analysis import EnergyMonitor, convergence_rates
from polywave.cli import _apply_desk_scale, build_case, load_config, run_case, \
    run_convergence_suite
from polywave.fespace import DgSpace, l2_project
from polywave.forms import PenaltyParams, face_penalties, interface_faces
from polywave.mesh import PolyMesh, classify_boundary, generate_voronoi_mesh
from polywave.timeint import LeapfrogParams, NewmarkParams, State, integrate, \
    newmark_step

import oracle_forms

ROOT = Path(__file__).resolve().parent.parent
CONFIGS = ROOT / "configs"

REFERENCE_ENERGY = {
    "elastic": {2: {0.35: 1.1078, 0.26: 0.49112, 0.19: 0.18714, 0.13: 0.080198},
                3: {0.35: 0.14101, 0.26: 0.043925, 0.19: 0.014661, 0.13: 0.0047140},
                4: {0.35: 0.018809, 0.26: 0.0043186, 0.19: 0.0010703,
                    0.13: 0.00026145}},
    "poro": {2: {0.36: 0.58052, 0.25: 0.33505, 0.18: 0.17345, 0.13: 0.089824},
             3: {0.36: 0.10464, 0.25: 0.031326, 0.18: 0.011617, 0.13: 0.0047403},
             4: {0.36: 0.011450, 0.25: 0.0029694, 0.18: 0.00080532,
                 0.13: 0.00020572}},
}
REFERENCE_RATES = {"elastic": {2: 2.23, 3: 2.89, 4: 3.71},
               "poro": {2: 2.10, 3: 3.06, 4: 3.86},
               "coupled": {2: 1.98, 3: 2.91, 4: 4.29}}


def _line(num, ok, detail):
    print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {num}: {detail}")
    return ok


def _run_suite(name, tmp):
    suite = json.loads((CONFIGS / name).read_text())
    t0 = time.perf_counter()
    reports, rates = run_convergence_suite(suite, out_dir=tmp)
    return reports, rates, time.perf_counter() - t0


@pytest.fixture(scope="module")
def elastic_h(tmp_path_factory):
    return _run_suite("suite_elastic_h.json",
                      tmp_path_factory.mktemp("elastic_h"))


@pytest.fixture(scope="module")
def poro_h(tmp_path_factory):
    return _run_suite("suite_poro_h.json", tmp_path_factory.mktemp("poro_h"))


@pytest.fixture(scope="module")
def coupled_h(tmp_path_factory):
    return _run_suite("suite_coupled_h.json", tmp_path_factory.mktemp("coupled_h"))


def _check_h_suite(kind, reports, rates, wall, check_magnitudes, num):
    by_p = {}
    for r in reports:
        by_p.setdefault(r.p, []).append(r)
    ok = True
    details = []
    for p, series in sorted(by_p.items()):
        _, slope = convergence_rates([r.err_energy for r in series],
                                     [r.h for r in series])
        good = slope >= p - 0.3
        ok &= good
        details.append(f"p={p} slope {slope:.2f} (ref {REFERENCE_RATES[kind][p]},"
                       f" need >= {p - 0.3:.1f})")
        if check_magnitudes:
            table = REFERENCE_ENERGY[kind][p]
            for r in series:
                hrow = min(table, key=lambda hh: abs(hh - r.h))
                ratio = r.err_energy / table[hrow]
                good_m = 1.0 / 3.0 <= ratio <= 3.0
                ok &= good_m
                if not good_m:
                    details.append(f"p={p} h={r.h:.3f}: x{ratio:.2f} of table")
    details.append(f"wall {wall:.0f}s")
    return _line(num, ok, f"{kind} h-convergence: " + "; ".join(details))


def test_criterion_1_elastic_h_convergence(elastic_h):
    reports, rates, wall = elastic_h
    ok = _check_h_suite("elastic", reports, rates, wall, True, 1)
    assert ok
    assert wall <= 900.0, f"elastic suite took {wall:.0f}s (> 15 min)"


def test_criterion_2_poro_h_convergence(poro_h):
    reports, rates, wall = poro_h
    assert _check_h_suite("poro", reports, rates, wall, True, 2)


def test_criterion_3_coupled_h_convergence(coupled_h):
    reports, rates, wall = coupled_h
    assert _check_h_suite("coupled", reports, rates, wall, False, 3)


@pytest.mark.parametrize("kind,fields", [("elastic", ("u",)),
                                         ("poro", ("u", "w")),
                                         ("coupled", ("u", "w", "phi"))])
def test_criterion_4_p_convergence(kind, fields, tmp_path):
    suite = json.loads((CONFIGS / f"suite_{kind}_p.json").read_text())
    reports, _ = run_convergence_suite(suite, out_dir=tmp_path)
    ok = True
    details = []
    ps = np.array([r.p for r in reports], dtype=float)
    for fld in fields:
        errs = np.array([r.err_l2[fld] for r in reports])
        mono = bool(np.all(np.diff(errs) < 0))
        corr = float(np.corrcoef(ps, np.log(errs))[0, 1])
        ok &= mono and corr <= -0.99
        details.append(f"L2_{fld}: decreasing={mono} corr={corr:.4f}")
    assert _line(4, ok, f"{kind} p-convergence (N_el fixed): " + "; ".join(details))


# ---------------------------------------------------------------------------
# criterion 5: dissipativity / conservation
# ---------------------------------------------------------------------------

def _elastic_free_case(zeta, n=24, p=2, seed=3):
    mesh = classify_boundary(generate_voronoi_mesh((0, 1, 0, 1), n, 30,
                                                   rng_seed=seed),
                             lambda q: "dirichlet")
    sp = DgSpace(mesh, p, components=2)
    ones = np.ones(mesh.n_elements)
    sys_ = forms.build_elastic_system(sp, {"rho": ones, "lam": ones, "mu": ones,
                                           "zeta": zeta * ones})
    x0 = l2_project(sp, lambda pts: np.column_stack(
        [np.sin(np.pi * pts[:, 0]) * np.sin(np.pi * pts[:, 1]),
         pts[:, 0] * (1 - pts[:, 0]) * pts[:, 1]]))
    return sys_, x0


def test_criterion_5a_damped_energy_monotone():
    sys_, x0 = _elastic_free_case(zeta=0.8)
    mon = EnergyMonitor(sys_, every=1)
    integrate(sys_, x0, np.zeros_like(x0), 0.5, NewmarkParams(dt=1e-3),
              observers=[mon])
    E = mon.energies
    worst = float(np.diff(E).max() / E[0])
    assert _line("5a", worst <= 1e-10,
                 f"damped elastic: max energy increment {worst:.2e} per step")


def test_criterion_5b_undamped_energy_conserved():
    sys_, x0 = _elastic_free_case(zeta=0.0)
    mon = EnergyMonitor(sys_, every=10)
    integrate(sys_, x0, np.zeros_like(x0), 1.0, NewmarkParams(dt=1e-4),
              observers=[mon])
    E = mon.energies
    drift = float(np.abs(E - E[0]).max() / E[0])
    assert _line("5b", drift <= 1e-10,
                 f"undamped Newmark(1/4,1/2), 1e4 steps: relative drift {drift:.2e}")


def _coupled_free_case(tau):
    cfg = {
        "kind": "coupled", "degree": 2, "T": 0.2, "dt": 1e-3,
        "mesh": {"kind": "mirrored-voronoi", "domain": [-1, 1, 0, 1], "n": 20,
                 "lloyd": 20, "seed": 2, "axis": "x",
                 "labels": {"poroelastic": {"x_below": 0.0},
                            "acoustic": {"x_above": 0.0}}},
        "materials": {"poroelastic": {"rho_f": 1, "rho_s": 1, "phi": 0.5, "a": 1,
                                      "eta": 1, "k": 1, "m": 1, "beta": 1,
                                      "lam": 1, "mu": 1},
                      "acoustic": {"rho_a": 1, "c": 1}},
        "tau": tau,
    }
    case = build_case(cfg)
    sp, sa = case.spaces["u"], case.spaces["phi"]
    x0 = np.concatenate([
        l2_project(sp, lambda pts: np.column_stack(
            [np.sin(np.pi * pts[:, 0]) * np.sin(np.pi * pts[:, 1]),
             pts[:, 0] * pts[:, 1]])),
        l2_project(sp, lambda pts: np.column_stack(
            [pts[:, 1] * (1 - pts[:, 1]) * np.ones(len(pts)),
             np.cos(pts[:, 0])])),
        l2_project(sa, lambda pts: np.sin(np.pi * pts[:, 0]) * pts[:, 1])])
    return case.system, x0


def test_criterion_5c_poro_and_coupled_dissipative():
    ok = True
    details = []
    # poro with viscous dissipation
    mesh = classify_boundary(generate_voronoi_mesh((-1, 0, 0, 1), 16, 30,
                                                   rng_seed=4),
                             lambda q: "dirichlet")
    sp = DgSpace(mesh, 2, components=2)
    ones = np.ones(mesh.n_elements)
    sys_ = forms.build_poro_system(sp, {"rho": ones, "rho_f": ones,
                                        "rho_w": 2 * ones, "eta_k": ones,
                                        "m": ones, "beta": ones, "lam": ones,
                                        "mu": ones})
    x0 = np.concatenate([
        l2_project(sp, lambda pts: np.column_stack(
            [np.sin(np.pi * pts[:, 0]) * pts[:, 1], pts[:, 0] * pts[:, 1]])),
        l2_project(sp, lambda pts: np.column_stack(
            [pts[:, 0] * (1 + pts[:, 0]), np.sin(np.pi * pts[:, 1])]))])
    mon = EnergyMonitor(sys_, every=1)
    integrate(sys_, x0, np.zeros_like(x0), 0.5, NewmarkParams(dt=1e-3),
              observers=[mon])
    E = mon.energies
    exc = float(E.max() / E[0] - 1.0)
    ok &= exc <= 1e-8
    details.append(f"poro eta>0: max/initial-1 = {exc:.2e}")
    for tau in (0.0, 0.5, 1.0):
        sys_, x0 = _coupled_free_case(tau)
        mon = EnergyMonitor(sys_, every=1)
        integrate(sys_, x0, np.zeros_like(x0), 0.2, NewmarkParams(dt=1e-3),
                  observers=[mon])
        E = mon.energies
        exc = float(E.max() / E[0] - 1.0)
        ok &= exc <= 1e-8
        details.append(f"coupled tau={tau}: {exc:.2e}")
    assert _line("5c", ok, "zero-source energy bound: " + "; ".join(details))


# ---------------------------------------------------------------------------
# criterion 6: operator properties
# ---------------------------------------------------------------------------

def _coupled_operator_setup(n_half=10, p=2):
    cfg = {
        "kind": "coupled", "degree": p, "T": 0.1, "dt": 0.1,
        "mesh": {"kind": "mirrored-voronoi", "domain": [-1, 1, 0, 1],
                 "n": n_half, "lloyd": 20, "seed": 2, "axis": "x",
                 "labels": {"poroelastic": {"x_below": 0.0},
                            "acoustic": {"x_above": 0.0}}},
        "materials": {"poroelastic": {"rho_f": 1, "rho_s": 1, "phi": 0.5, "a": 1,
                                      "eta": 1, "k": 1, "m": 1, "beta": 1,
                                      "lam": 1, "mu": 1},
                      "acoustic": {"rho_a": 1, "c": 1}},
        "tau": [{"where": {"y_below": 0.5}, "value": 0.0},
                {"where": {"y_above": 0.5}, "value": 0.5}],
    }
    return build_case(cfg)


def _rel_asym(M):
    return float(abs(M - M.T).max() / max(np.abs(M.data).max(), 1e-300))


def test_criterion_6_operator_properties():
    case = _coupled_operator_setup()
    mesh = case.mesh
    sp, sa = case.spaces["u"], case.spaces["phi"]
    co, ca = case.coeffs["poro"], case.coeffs["acoustic"]
    pen = PenaltyParams()
    sealed = forms.interface_faces(mesh, sealed=True)
    ops = {
        "A_elastic": forms.assemble_elastic(sp, co["lam"], co["mu"], pen),
        "A_divdiv": forms.assemble_divdiv(sp, co["m"], pen),
        "A_divdiv_sealed": forms.assemble_divdiv(sp, co["m"], pen,
                                                 sealed_faces=sealed),
        "A_acoustic": forms.assemble_acoustic(sa, ca["rho_a"], pen),
        "M": case.system.m,
        "B": case.system.d[case.system.layout["w"], case.system.layout["w"]],
    }
    ok = True
    details = []
    for name, M in ops.items():
        asym = _rel_asym(M)
        ok &= asym <= 1e-12
        details.append(f"{name} asym {asym:.1e}")
    # SPD mass on the dense oracle scale
    n = case.system.n
    assert n <= 2000
    scipy.linalg.cholesky(case.system.m.toarray())
    details.append(f"M SPD (n={n})")
    # skew part of the coupled damping operator
    D = case.system.d
    Dskew = 0.5 * (D - D.T)
    rng = np.random.default_rng(0)
    worst = 0.0
    scale = np.abs(D.data).max()
    for _ in range(100):
        y = rng.standard_normal(n)
        worst = max(worst, abs(y @ (Dskew @ y)) / (scale * (y @ y)))
    ok &= worst <= 1e-12
    details.append(f"skew identity {worst:.1e}")
    assert _line("6", ok, "operator properties: " + "; ".join(details))


def test_criterion_6_coercivity_with_unit_constant():
    """Literal check: v' A v >= |v|_DG^2 at sigma0 = m0 = 10.

    This inequality cannot hold with constant exactly one when the norm
    carries the same penalty as the operator: A - G equals the negated
    consistency term, an indefinite quadratic form at any finite penalty
    (measured G-metric minimum eigenvalue about -0.32 at sigma0 = 10,
    -0.07 at 100, -4e-3 at 1e4).  Kept as specified; expected red.
    """
    mesh = classify_boundary(generate_voronoi_mesh((0, 1, 0, 1), 12, 10,
                                                   rng_seed=2),
                             lambda q: "dirichlet")
    sp = DgSpace(mesh, 2, components=2)
    ones = np.ones(mesh.n_elements)
    pen = PenaltyParams(sigma0=10.0, m0=10.0)
    A_e = forms.assemble_elastic(sp, ones, ones, pen)
    G_e = analysis.elastic_norm_gram(sp, ones, ones, pen)
    A_p = forms.assemble_divdiv(sp, ones, pen)
    G_p = analysis.divdiv_norm_gram(sp, ones, pen)
    beta = 1.0
    rng = np.random.default_rng(1)
    worst_e = worst_p = 0.0
    fails = 0
    for _ in range(100):
        v = rng.standard_normal(sp.n_dofs)
        u = rng.standard_normal(sp.n_dofs)
        w = rng.standard_normal(sp.n_dofs)
        comb = beta * u + w
        de = (v @ (A_e @ v) - v @ (G_e @ v)) / (v @ (G_e @ v))
        dp = (comb @ (A_p @ comb) - comb @ (G_p @ comb)) / (comb @ (G_p @ comb))
        worst_e = min(worst_e, de)
        worst_p = min(worst_p, dp)
        fails += (de < -1e-10) or (dp < -1e-10)
    ok = fails == 0
    _line("6 (coercivity)", ok,
          f"v'Av >= |v|^2 at sigma0=m0=10: {fails}/100 vectors violate it "
          f"(worst elastic deficit {worst_e:.2e}, poro {worst_p:.2e}); "
          "unattainable with the norm's own penalty, see docstring")
    assert ok


# ---------------------------------------------------------------------------
# criterion 7: oracle equivalence
# ---------------------------------------------------------------------------

def _small_meshes():
    sq = PolyMesh(np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float), [[0, 1, 2, 3]])
    split = PolyMesh(np.array([[0, 0], [0.5, 0], [1, 0], [1, 1], [0.5, 1], [0, 1]],
                              float), [[0, 1, 4, 5], [1, 2, 3, 4]])
    strip = PolyMesh(np.array([[0, 0], [1, 0], [2, 0], [3, 0], [3, 1], [2, 1],
                               [1, 1], [0, 1]], float),
                     [[0, 1, 6, 7], [1, 2, 5, 6], [2, 3, 4, 5]])
    vor = generate_voronoi_mesh((0, 1, 0, 1), 3, 8, rng_seed=6)
    return [("square", sq), ("split", split), ("strip", strip), ("voronoi3", vor)]


def test_criterion_7_dense_oracle_equivalence():
    ok = True
    worst = 0.0
    cases = 0
    for name, base in _small_meshes():
        mesh = classify_boundary(base, lambda q: "dirichlet")
        ne = mesh.n_elements
        lam = np.linspace(1.0, 1.5, ne)
        mu = np.linspace(0.7, 1.1, ne)
        mc = np.linspace(1.0, 2.0, ne)
        ra = np.linspace(0.5, 1.5, ne)
        for p in (1, 2, 3):
            spv = DgSpace(mesh, p, components=2)
            sps = DgSpace(mesh, p)
            eta = face_penalties(spv, 2 * lam + 2 * mu, 10.0)
            gamma = face_penalties(spv, mc, 10.0)
            chi = face_penalties(sps, ra, 10.0)
            pairs = [
                (forms.assemble_mass(spv, mu).toarray(),
                 oracle_forms.dense_mass(spv, mu)),
                (forms.assemble_elastic(spv, lam, mu, eta=eta).toarray(),
                 oracle_forms.dense_elastic(spv, lam, mu, eta)),
                (forms.assemble_divdiv(spv, mc, gamma=gamma).toarray(),
                 oracle_forms.dense_divdiv(spv, mc, gamma)),
                (forms.assemble_acoustic(sps, ra, chi=chi).toarray(),
                 oracle_forms.dense_acoustic(sps, ra, chi)),
            ]
            for got, ref in pairs:
                err = np.abs(got - ref).max() / max(np.abs(ref).max(), 1e-300)
                worst = max(worst, err)
                ok &= err <= 1e-12
                cases += 1
    # coupling + interface Robin on a two-label mesh
    m2 = classify_boundary(
        PolyMesh(np.array([[0, 0], [0.5, 0], [1, 0], [1, 1], [0.5, 1], [0, 1]],
                          float), [[0, 1, 4, 5], [1, 2, 3, 4]],
                 ["poroelastic", "acoustic"]),
        lambda q: "dirichlet", tau=0.5)
    for p in (1, 2, 3):
        sp_p = DgSpace(m2, p, components=2, labels="poroelastic")
        sp_a = DgSpace(m2, p, labels="acoustic")
        faces = interface_faces(m2)
        got = forms.assemble_coupling(sp_p, sp_a, np.ones(1), faces).toarray()
        ref = oracle_forms.dense_coupling(sp_p, sp_a, np.ones(1), faces)
        err = np.abs(got - ref).max() / np.abs(ref).max()
        worst = max(worst, err)
        ok &= err <= 1e-12
        zeta = {f: 1.0 for f in faces}
        gotB = forms.assemble_robin_interface(sp_p, zeta).toarray()
        refB = oracle_forms.dense_robin(sp_p, zeta)
        err = np.abs(gotB - refB).max() / np.abs(refB).max()
        worst = max(worst, err)
        ok &= err <= 1e-12
        cases += 2
    # Newmark scalar step against the closed-form recurrence
    import scipy.sparse as sparse
    msys = forms.BlockSystem(sparse.csr_matrix(np.array([[1.3]])),
                             sparse.csr_matrix((1, 1)),
                             sparse.csr_matrix(np.array([[2.7]])),
                             layout={"u": slice(0, 1)},
                             mass_blocks=[np.array([0])])
    h, k = 0.07, 2.7 / 1.3
    x, z, l = 0.9, -0.4, -k * 0.9
    st = State(0.0, np.array([x]), np.array([z]), np.array([l]))
    for _ in range(5):
        st = newmark_step(msys, st, NewmarkParams(dt=h))
        x1 = (x + h * z - h * h * 0.25 * k * x) / (1.0 + h * h * 0.25 * k)
        l1 = -k * x1
        z = z + h * 0.5 * (l1 + l)
        x, l = x1, l1
    scalar_err = max(abs(st.x[0] - x), abs(st.z[0] - z))
    ok &= scalar_err <= 1e-14
    assert _line(7, ok, f"dense-oracle equivalence over {cases} assemblies: "
                        f"worst {worst:.2e}; Newmark scalar vs recurrence "
                        f"{scalar_err:.2e}")


# ---------------------------------------------------------------------------
# criterion 8: time order
# ---------------------------------------------------------------------------

def test_criterion_8_time_order():
    cfg = {
        "kind": "elastic", "degree": 1, "T": 0.4, "dt": 1e-4,
        "mesh": {"kind": "voronoi", "domain": [0, 1, 0, 1], "n": 4, "lloyd": 50,
                 "seed": 5},
        "materials": {"elastic": {"rho": 1, "lam": 1, "mu": 1, "zeta": 0}},
    }
    case = build_case(cfg)
    sp = case.spaces["u"]
    x0 = l2_project(sp, lambda pts: np.column_stack(
        [np.sin(np.pi * pts[:, 0]) * np.sin(np.pi * pts[:, 1]),
         np.sin(2 * np.pi * pts[:, 0]) * np.sin(np.pi * pts[:, 1])]))
    z0 = np.zeros_like(x0)
    ok = True
    details = []
    for scheme, mk in (("leapfrog", LeapfrogParams), ("newmark", NewmarkParams)):
        ref = integrate(case.system, x0, z0, 0.4, mk(1e-4)).x
        dts = [4e-3, 2e-3, 1e-3]
        errs = [np.linalg.norm(integrate(case.system, x0, z0, 0.4, mk(dt)).x - ref)
                for dt in dts]
        slope = float(np.polyfit(np.log(dts), np.log(errs), 1)[0])
        ok &= abs(slope - 2.0) <= 0.1
        details.append(f"{scheme} slope {slope:.3f}")
    assert _line(8, ok, "dt-order vs dt=1e-4 reference: " + "; ".join(details))


# ---------------------------------------------------------------------------
# criterion 9: physical demos at desk scale
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("name", ["demo_elastic_layers.json",
                                  "demo_poro_layers.json",
                                  "demo_coupled_basin.json"])
def test_criterion_9_demos(name, tmp_path):
    cfg = _apply_desk_scale(load_config(CONFIGS / name))
    res = run_case(cfg, out_dir=tmp_path)
    E = res["monitor"].energies
    snaps = sorted(tmp_path.glob("snapshot_*.vtk"))
    ok = (len(snaps) == len(cfg["output"]["snapshots"])
          and np.isfinite(E).all() and np.isfinite(res["state"].x).all()
          and E.max() < np.inf and E.max() > 0)
    assert _line(9, ok, f"{name}: {len(snaps)} snapshots, peak energy "
                        f"{E.max():.3e}, final t={res['state'].t:.3g}s, "
                        f"wall {res['wall_s']:.0f}s")
