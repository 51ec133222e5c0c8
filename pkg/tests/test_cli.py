import json
from pathlib import Path

import numpy as np
import pytest

from polywave import cli
from polywave.cli import (ConfigError, build_case, load_config, main,
                          parse_config, run_case, run_convergence_suite)
from polywave.linalg import read_matrix_market

ROOT = Path(__file__).resolve().parent.parent


def tiny_config(**over):
    cfg = {
        "kind": "elastic", "degree": 2, "T": 0.02, "dt": 1e-3,
        "mesh": {"kind": "voronoi", "domain": [0, 1, 0, 1], "n": 8, "lloyd": 5,
                 "seed": 1},
        "materials": {"elastic": {"rho": 1, "lam": 1, "mu": 1, "zeta": 0}},
        "integrator": {"scheme": "leapfrog"},
        "output": {"energy_every": 5},
        "run_id": "tiny",
    }
    cfg.update(over)
    return cfg


class TestConfigValidation:
    def test_missing_field_names_path(self):
        with pytest.raises(ConfigError, match="config.degree"):
            parse_config({"kind": "elastic", "mesh": {}, "T": 1, "dt": 0.1,
                          "materials": {}})

    def test_unknown_kind(self):
        with pytest.raises(ConfigError, match="kind"):
            parse_config(tiny_config(kind="magneto"))

    def test_bad_dt(self):
        with pytest.raises(ConfigError, match="dt"):
            parse_config(tiny_config(dt=-1))

    def test_unknown_scheme(self):
        with pytest.raises(ConfigError, match="scheme"):
            parse_config(tiny_config(integrator={"scheme": "rk4"}))

    def test_bad_material_named(self):
        cfg = tiny_config(materials={"elastic": {"rho": -1, "lam": 1, "mu": 1}})
        with pytest.raises(ConfigError, match="config.materials"):
            build_case(cfg)

    def test_unknown_source_kind(self):
        cfg = tiny_config(point_sources=[{"kind": "laser", "location": [0.5, 0.5]}])
        with pytest.raises(ConfigError, match="source"):
            build_case(cfg)


class TestRunCase:
    def test_zero_sources_zero_output(self, tmp_path):
        res = run_case(tiny_config(), out_dir=tmp_path)
        assert res["report"] is None
        assert np.abs(res["state"].x).max() == 0.0
        energy = (tmp_path / "energy.csv").read_text().splitlines()
        assert all(float(ln.split(",")[2]) == 0.0 for ln in energy[1:])

    def test_rerun_is_byte_identical(self, tmp_path):
        cfg = tiny_config(manufactured="elastic-sine",
                          materials={"elastic": {"rho": 1, "lam": 1, "mu": 1,
                                                 "zeta": 1}},
                          output={"energy_every": 5, "probes": [[0.4, 0.6]]})
        run_case(cfg, out_dir=tmp_path / "a")
        run_case(cfg, out_dir=tmp_path / "b")
        for name in ("energy.csv", "probes.csv", "errors.csv"):
            assert (tmp_path / "a" / name).read_bytes() == \
                   (tmp_path / "b" / name).read_bytes()
        meta = json.loads((tmp_path / "a" / "metadata.json").read_text())
        assert "wall_s" in meta

    def test_snapshot_structure(self, tmp_path):
        cfg = tiny_config(output={"energy_every": 5, "snapshots": [0.02]})
        run_case(cfg, out_dir=tmp_path)
        vtk = (tmp_path / "snapshot_0.02.vtk").read_text().splitlines()
        assert vtk[0].startswith("# vtk DataFile")
        npts = int([ln for ln in vtk if ln.startswith("POINTS")][0].split()[1])
        types = vtk.index("CELL_TYPES 8")
        assert all(t == "7" for t in vtk[types + 1:types + 9])
        zline = [ln for ln in vtk if ln.startswith("POINTS")][0]
        assert zline.split()[2] == "double"
        # every duplicated vertex appears: sum of polygon sizes
        case = build_case(tiny_config())
        expect = sum(len(case.mesh.elements[e]) for e in range(case.mesh.n_elements))
        assert npts == expect

    def test_probe_trace_columns(self, tmp_path):
        cfg = tiny_config(output={"energy_every": 2, "probes": [[0.5, 0.5],
                                                                [0.25, 0.25]]})
        run_case(cfg, out_dir=tmp_path)
        head = (tmp_path / "probes.csv").read_text().splitlines()[0]
        assert head == "t,u0_p0,u1_p0,u0_p1,u1_p1"

    def test_desk_scale_overrides(self):
        cfg = load_config(ROOT / "configs" / "demo_elastic_layers.json")
        desk = cli._apply_desk_scale(cfg)
        assert desk["mesh"]["n"] == 260
        assert desk["T"] == 0.6
        assert "desk_scale" not in desk
        assert cfg["mesh"]["domain"] == desk["mesh"]["domain"]


class TestSuite:
    def test_h_mode_writes_rates(self, tmp_path):
        base = tiny_config(manufactured="elastic-sine",
                           materials={"elastic": {"rho": 1, "lam": 1, "mu": 1,
                                                  "zeta": 1}})
        suite = {"base": base, "kind": "elastic", "mode": "h",
                 "meshes": [{"n": 8}, {"n": 20}], "degrees": [1]}
        reports, rates = run_convergence_suite(suite, out_dir=tmp_path)
        assert len(reports) == 2
        lines = (tmp_path / "errors.csv").read_text().splitlines()
        assert lines[-1].startswith("rate:p=1")
        assert float(lines[-1].split(",")[5]) > 0.5

    def test_p_mode(self, tmp_path):
        base = tiny_config(manufactured="elastic-sine",
                           materials={"elastic": {"rho": 1, "lam": 1, "mu": 1,
                                                  "zeta": 1}})
        suite = {"base": base, "kind": "elastic", "mode": "p", "degrees": [1, 2]}
        reports, _ = run_convergence_suite(suite, out_dir=tmp_path)
        assert reports[0].err_l2["u"] > reports[1].err_l2["u"]


class TestMainEntry:
    def test_regularity_command(self, capsys):
        assert main(["regularity", "--voronoi", "n=12,seed=3", "--domain",
                     "0,1,0,1"]) == 0
        out = capsys.readouterr().out
        assert "max_ratio=" in out and "elements=12" in out

    def test_dump_operators(self, tmp_path):
        cfg_path = tmp_path / "c.json"
        cfg_path.write_text(json.dumps(tiny_config()))
        assert main(["dump-operators", str(cfg_path), "--out",
                     str(tmp_path / "ops")]) == 0
        M = read_matrix_market(tmp_path / "ops" / "M.mtx")
        assert abs(M - M.T).max() <= 1e-12 * np.abs(M.data).max()
        layout = json.loads((tmp_path / "ops" / "layout.json").read_text())
        assert layout["u"][0] == 0

    def test_run_command(self, tmp_path, capsys):
        cfg_path = tmp_path / "c.json"
        cfg_path.write_text(json.dumps(tiny_config(manufactured="elastic-sine",
            materials={"elastic": {"rho": 1, "lam": 1, "mu": 1, "zeta": 1}})))
        assert main(["run", str(cfg_path), "--out", str(tmp_path / "o")]) == 0
        assert "energy_error=" in capsys.readouterr().out

    def test_mesh_file_roundtrip_via_config(self, tmp_path):
        from polywave.mesh import generate_voronoi_mesh, write_mesh
        m = generate_voronoi_mesh((0, 1, 0, 1), 6, 5, rng_seed=4)
        write_mesh(m, tmp_path / "m.txt")
        cfg = tiny_config(mesh={"kind": "file", "path": str(tmp_path / "m.txt")})
        case = build_case(cfg)
        assert case.mesh.n_elements == 6
