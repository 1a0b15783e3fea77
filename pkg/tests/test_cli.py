import json

import numpy as np
import pytest

from nesstur import cli


def run(args) -> int:
    return cli.main([str(a) for a in args])


def read_csv(path):
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    rows = [dict(zip(header, line.split(","))) for line in lines[1:]]
    return header, rows


class TestNess:
    def test_sweep_columns_and_crossover(self, tmp_path):
        assert run(["ness", "--sweep", "g:0.1:0.9:5", "--out", tmp_path]) == 0
        header, rows = read_csv(tmp_path / "ness.csv")
        assert header[:6] == ["omega", "g", "beta_c", "beta_h", "nu_c", "nu_h"]
        assert "concurrence" in header and "mutual_information" in header
        conc = [float(r["concurrence"]) for r in rows]
        assert conc[0] == 0.0 and conc[-1] > 0.0
        # entanglement onset sits just below g = 0.7 at these parameters
        assert [r["entangled"] for r in rows] == ["false", "false", "false", "true", "true"]

    def test_single_point_gibbs(self, tmp_path):
        assert run([
            "ness", "--beta-c", 2.0, "--beta-h", 2.0, "--g", 0.6, "--out", tmp_path,
        ]) == 0
        _, rows = read_csv(tmp_path / "ness.csv")
        row = rows[0]
        # oracle: Boltzmann weights at beta = 2
        energies = np.array([0.0, 0.4, 1.6, 2.0])
        boltz = np.exp(-2.0 * energies)
        boltz /= boltz.sum()
        got = [float(row[k]) for k in ("rho0", "rho_minus", "rho_plus", "rho_2omega")]
        assert np.allclose(got, boltz, atol=1e-12)

    def test_malformed_sweep_no_partial_files(self, tmp_path, capsys):
        out = tmp_path / "results"
        assert run(["ness", "--sweep", "g:0.5:1.5:5", "--out", out]) == 1
        assert "error:" in capsys.readouterr().err
        assert not out.exists()

    def test_rerun_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert run(["ness", "--sweep", "g:0.2:0.8:4", "--out", out]) == 0
        assert (a / "ness.csv").read_bytes() == (b / "ness.csv").read_bytes()

    def test_parallel_jobs_identical_output(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert run(["ness", "--sweep", "g:0.2:0.8:4", "--jobs", 1, "--out", a]) == 0
        assert run(["ness", "--sweep", "g:0.2:0.8:4", "--jobs", 3, "--out", b]) == 0
        assert (a / "ness.csv").read_bytes() == (b / "ness.csv").read_bytes()

    def test_json_format(self, tmp_path):
        assert run(["ness", "--format", "json", "--out", tmp_path]) == 0
        rows = json.loads((tmp_path / "ness.json").read_text())
        assert isinstance(rows, list) and "purity" in rows[0]


class TestRelax:
    def test_swap_quench_headers_and_transient(self, tmp_path):
        assert run([
            "relax", "--g", 0.75, "--quench", "swap", "--samples", 200, "--out", tmp_path,
        ]) == 0
        header, rows = read_csv(tmp_path / "trajectory.csv")
        assert header == ["t", "jc", "jh", "jdiff_half", "sdot", "sedot", "sidot"]
        jdiff = np.array([float(r["jdiff_half"]) for r in rows])
        final = jdiff[-1]
        assert np.all(jdiff <= final * 1.005)
        assert jdiff[0] < 0.6 * final

    def test_maxwork_quench_negative_transient(self, tmp_path):
        assert run([
            "relax", "--g", 0.75, "--quench", "maxwork", "--samples", 200, "--out", tmp_path,
        ]) == 0
        _, rows = read_csv(tmp_path / "trajectory.csv")
        jdiff = np.array([float(r["jdiff_half"]) for r in rows])
        assert jdiff.min() < 0

    def test_identity_quench_constant_columns(self, tmp_path):
        ufile = tmp_path / "identity.npy"
        np.save(ufile, np.eye(4, dtype=complex))
        assert run([
            "relax", "--quench", "file", "--unitary-file", ufile,
            "--samples", 50, "--t-end", 500, "--out", tmp_path,
        ]) == 0
        _, rows = read_csv(tmp_path / "trajectory.csv")
        for col in ("jc", "jh", "sidot"):
            vals = np.array([float(r[col]) for r in rows])
            assert np.abs(vals - vals[0]).max() < 1e-9

    def test_sweep_rejected(self, tmp_path):
        assert run(["relax", "--sweep", "g:0.2:0.8:3", "--out", tmp_path]) == 1


class TestWorkdist:
    def test_maxwork_atoms(self, tmp_path):
        assert run(["workdist", "--g", 0.75, "--quench", "maxwork", "--out", tmp_path]) == 0
        header, rows = read_csv(tmp_path / "workdist.csv")
        assert header == ["w", "prob"]
        w = [float(r["w"]) for r in rows]
        assert w == [-2.0, -1.5, 1.5, 2.0]
        assert abs(sum(float(r["prob"]) for r in rows) - 1.0) < 1e-12


class TestTur:
    def test_swap_sweep_certificate_true(self, tmp_path):
        assert run(["tur", "--quench", "swap", "--sweep", "g:0.2:0.8:3", "--out", tmp_path]) == 0
        header, rows = read_csv(tmp_path / "tur.csv")
        for key in ("lhs", "sigma_rel", "sigma_cost", "f0_rel", "f0_cost", "f_rel", "f_cost"):
            assert key in header
        assert all(r["certificate"] == "true" for r in rows)
        assert all(r["violated_f0_rel"] == "false" for r in rows)

    def test_identity_quench_errors(self, tmp_path, capsys):
        ufile = tmp_path / "identity.npy"
        np.save(ufile, np.eye(4, dtype=complex))
        assert run(["tur", "--quench", "file", "--unitary-file", ufile, "--out", tmp_path]) == 1
        assert "mean work" in capsys.readouterr().err


class TestHaarScan:
    def test_outputs_and_determinism(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert run([
                "haar-scan", "--g", 0.5, "--nu-c", 0.012, "--n", 300, "--seed", 11, "--out", out,
            ]) == 0
        assert (a / "scan.csv").read_bytes() == (b / "scan.csv").read_bytes()
        summary = json.loads((a / "scan_summary.json").read_text())
        assert summary["n"] == 300 and summary["seed"] == 11
        assert "violation_fraction" in summary and "wall_seconds" in summary
        header, rows = read_csv(a / "scan.csv")
        assert header == ["lhs", "rhs", "gap"]
        assert len(rows) == 300 - summary["n_skipped_zero_mean"]


class TestSepProject:
    def test_ppt_region_identity(self, tmp_path):
        assert run(["sep-project", "--g", 0.3, "--quench", "swap", "--out", tmp_path]) == 0
        _, rows = read_csv(tmp_path / "sep_project.csv")
        row = rows[0]
        assert float(row["distance"]) == 0.0
        assert row["relaxation_tight"] == "true"
        assert row["rel_err_sq_ness"] == row["rel_err_sq_sep"]

    def test_entangled_point_json(self, tmp_path):
        assert run([
            "sep-project", "--g", 0.8, "--quench", "swap", "--format", "json", "--out", tmp_path,
        ]) == 0
        rows = json.loads((tmp_path / "sep_project.json").read_text())
        row = rows[0]
        assert row["relaxation_tight"] is True
        assert row["ratio_rel_err_sq"] > 1.0
        assert row["mean_sq_sep"] < row["mean_sq_ness"]


class TestConfigFile:
    def test_file_plus_flag_override(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("g = 0.3\nbeta_c = 4.0\nseed = 9\n# comment\nquench = maxwork\n")
        assert run(["workdist", "--config", cfg, "--g", 0.75, "--out", tmp_path]) == 0
        _, rows = read_csv(tmp_path / "workdist.csv")
        w = [float(r["w"]) for r in rows]
        assert w == [-2.0, -1.5, 1.5, 2.0]  # flag g=0.75 wins over file g=0.3

    def test_unknown_key_rejected(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("coupling = 0.3\n")
        assert run(["ness", "--config", cfg, "--out", tmp_path]) == 1

    def test_jobs_env_default(self, tmp_path, monkeypatch):
        monkeypatch.setenv("NESSTUR_JOBS", "2")
        assert run(["ness", "--sweep", "g:0.2:0.8:4", "--out", tmp_path]) == 0
        ref = tmp_path / "ref"
        monkeypatch.delenv("NESSTUR_JOBS")
        assert run(["ness", "--sweep", "g:0.2:0.8:4", "--out", ref]) == 0
        assert (tmp_path / "ness.csv").read_bytes() == (ref / "ness.csv").read_bytes()


class TestFigurePresets:
    def test_figure2a(self, tmp_path):
        assert run(["figure", "2a", "--samples", 80, "--out", tmp_path]) == 0
        header, rows = read_csv(tmp_path / "fig2a.csv")
        assert header[0] == "t" and len(rows) == 80

    def test_figure5_with_small_n(self, tmp_path):
        assert run(["figure", "5", "--n", 300, "--seed", 5, "--out", tmp_path]) == 0
        summary = json.loads((tmp_path / "fig5_summary.json").read_text())
        assert summary["n"] == 300

    def test_figure6(self, tmp_path):
        assert run(["figure", "6", "--out", tmp_path]) == 0
        _, rows = read_csv(tmp_path / "fig6.csv")
        assert len(rows) == 19
        conc = [float(r["concurrence"]) for r in rows]
        assert conc[0] == 0.0 and conc[-1] > 0

    def test_figure7_window_columns(self, tmp_path):
        assert run(["figure", "7", "--out", tmp_path]) == 0
        header, rows = read_csv(tmp_path / "fig7.csv")
        for key in ("w", "v", "v_lower", "v_upper", "purity", "entangled"):
            assert key in header
        entangled = [r for r in rows if r["entangled"] == "true"]
        assert entangled
        for r in entangled:
            assert float(r["v_lower"]) < float(r["v"]) < float(r["v_upper"])

    def test_figure8(self, tmp_path):
        assert run(["figure", "8", "--out", tmp_path]) == 0
        _, rows = read_csv(tmp_path / "fig8.csv")
        tight = [r["relaxation_tight"] for r in rows]
        assert all(t == "true" for t in tight)

    def test_unknown_figure_rejected(self, tmp_path):
        with pytest.raises(SystemExit):
            run(["figure", "9z", "--out", tmp_path])
