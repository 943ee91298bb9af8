import json

import numpy as np
import pytest

from clldt.cli import RunConfig, main, parse_complex, read_config
from clldt.core import Potential, ValidationError, load_potential, read_csv, save_field
from clldt.scattering import find_eigenvalues
from clldt.verify import CHECKS, sech_potential

from conftest import BOX, SOLITON_LAM1

SMALL = ["--grid-L", "20", "--grid-n", "512"]


def run(argv, capsys):
    try:
        status = main([str(a) for a in argv])
    except SystemExit as exc:
        status = exc.code
    out, err = capsys.readouterr()
    return status, out, err


@pytest.fixture()
def vacuum_file(tmp_path, grid):
    path = tmp_path / "vac.json"
    save_field(Potential.zeros(grid), path)
    return path


@pytest.fixture()
def sech_file(tmp_path, grid):
    path = tmp_path / "sech.json"
    save_field(sech_potential(grid), path)
    return path


def test_scatter_vacuum(tmp_path, vacuum_file, capsys):
    status, out, _ = run(["scatter", vacuum_file, "--out-dir", tmp_path, "--contour", "real:0.1:3:16,imag:0.2:1:4"],
                         capsys)
    assert status == 0 and "scattered 20 points" in out
    header, data = read_csv(tmp_path / "scattering.csv")
    assert header[:3] == ["lam_re", "lam_im", "a_re"] or "a_re" in header
    a = data[:, header.index("a_re")] + 1j * data[:, header.index("a_im")]
    b = data[:, header.index("b_re")] + 1j * data[:, header.index("b_im")]
    assert np.max(np.abs(a - 1)) <= 1e-10 and np.max(np.abs(b)) <= 1e-10


def test_scatter_sech_box_matches_library(tmp_path, sech_file, sech, capsys):
    status, out, _ = run(["scatter", sech_file, "--out-dir", tmp_path, "--box", "0.1:2:0.1:2",
                          "--jost", "0.7"], capsys)
    assert status == 0
    summary = json.loads((tmp_path / "scatter_summary.json").read_text())
    lib = find_eigenvalues(sech, BOX)
    assert summary["Z_N"] == len(lib) == 1
    got = complex(*summary["eigenvalues"][0]["lambda"]) if isinstance(summary["eigenvalues"][0]["lambda"], list) \
        else complex(summary["eigenvalues"][0]["lambda"])
    assert abs(got - lib[0].lam.value) <= 1e-12
    assert summary["max_detS_residual"] <= 1e-6
    header, data = read_csv(tmp_path / "jost_minus_0.csv")
    assert header[0] == "x" and data.shape == (1024, 9)


def test_eigen_subcommand(tmp_path, sech_file, capsys):
    status, out, _ = run(["eigen", sech_file, "--out-dir", tmp_path, "--box", "0.1:2:0.1:2"], capsys)
    assert status == 0 and out.startswith("1 eigenvalue")
    assert len(json.loads((tmp_path / "eigenvalues.json").read_text())) == 1


def test_malformed_file_reports_parse_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    status, _, err = run(["scatter", bad, "--out-dir", tmp_path], capsys)
    assert status == 1
    assert json.loads(err)["kind"] == "parse"


def test_missing_file_reports_error(tmp_path, capsys):
    status, _, err = run(["eigen", tmp_path / "nope.json"], capsys)
    assert status == 1 and "kind" in json.loads(err)


def test_unknown_flag_is_usage_error(vacuum_file, capsys):
    status, _, err = run(["scatter", vacuum_file, "--bogus"], capsys)
    assert status == 2 and json.loads(err)["kind"] == "usage"


def test_no_subcommand_is_usage_error(capsys):
    status, _, err = run([], capsys)
    assert status == 2 and json.loads(err)["kind"] == "usage"


def test_remove_on_vacuum(tmp_path, vacuum_file, capsys):
    status, _, err = run(["dt", vacuum_file, "--seed", '{"mode": "remove"}', "--out-dir", tmp_path], capsys)
    assert status == 1
    obj = json.loads(err)
    assert "no eigenvalue in box" in obj["message"]


def test_bad_seed_spec(tmp_path, vacuum_file, capsys):
    status, _, err = run(["dt", vacuum_file, "--seed", '{"mode": "swap"}', "--out-dir", tmp_path], capsys)
    assert status == 1 and json.loads(err)["kind"] == "parse"


def test_dt_remove_with_round_trip(tmp_path, sech_file, capsys):
    status, out, _ = run(["dt", sech_file, "--seed", '{"mode": "remove", "lambda1": "0.4+0.45i"}',
                          "--round-trip", "--box", "0.1:2:0.1:2", "--out-dir", tmp_path], capsys)
    assert status == 0 and "1 -> 0" in out
    rep = json.loads((tmp_path / "dt_report.json").read_text())
    assert rep["eigenvalues_after"] == [] and rep["round_trip_residual"] <= 1e-6
    load_potential(tmp_path / "transformed.json")


def test_dt_add_on_vacuum(tmp_path, vacuum_file, capsys):
    seed = tmp_path / "seed.json"
    seed.write_text(json.dumps({"mode": "add", "lambda1": [0.8, 0.6]}))
    status, _, _ = run(["dt", vacuum_file, "--seed", seed, "--box", "0.1:2:0.1:2", "--out-dir", tmp_path], capsys)
    assert status == 0
    rep = json.loads((tmp_path / "dt_report.json").read_text())
    assert len(rep["eigenvalues_after"]) == 1
    assert abs(complex(*rep["eigenvalues_after"][0]) - SOLITON_LAM1) <= 1e-4


def test_soliton_rescatters(tmp_path, capsys):
    status, out, _ = run(["soliton", "--lambda1", "0.8+0.6i", "--out-dir", tmp_path], capsys)
    assert status == 0 and "velocity" in out
    pot = load_potential(tmp_path / "soliton.json")
    recs = find_eigenvalues(pot, BOX)
    assert len(recs) == 1 and abs(recs[0].lam.value - SOLITON_LAM1) <= 1e-4
    summary = json.loads((tmp_path / "soliton_summary.json").read_text())
    assert summary["velocity"] == pytest.approx(-2 * (SOLITON_LAM1**4).imag / (SOLITON_LAM1**2).imag)


def test_evolve_writes_snapshots(tmp_path, capsys):
    run(["soliton", "--lambda1", "0.8+0.6i", "--out-dir", tmp_path, *SMALL], capsys)
    status, out, _ = run(["evolve", tmp_path / "soliton.json", "--T", "0.01", "--dt", "5e-4", "--snap-every", "10",
                          "--probe-lambdas", "0.5,1", "--box", "0.1:2:0.1:2", "--out-dir", tmp_path], capsys)
    assert status == 0
    summary = json.loads((tmp_path / "evolve_summary.json").read_text())
    assert summary["snapshots"] == 3 and summary["final_time"] == pytest.approx(0.01)
    assert summary["mass_drift"] <= 1e-8 and summary["blew_up_at_step"] is None
    assert (tmp_path / "snapshot_00002.json").exists()
    header, data = read_csv(tmp_path / "diagnostics.csv")
    assert header[0] == "t" and data.shape[0] == 3


def test_evolve_cfl_error(tmp_path, capsys):
    run(["soliton", "--lambda1", "0.8+0.6i", "--out-dir", tmp_path], capsys)
    status, _, err = run(["evolve", tmp_path / "soliton.json", "--T", "0.01", "--dt", "0.01",
                          "--out-dir", tmp_path], capsys)
    assert status == 1 and "stability" in json.loads(err)["message"]


def test_grid_flags_must_match_file(tmp_path, vacuum_file, capsys):
    status, _, err = run(["eigen", vacuum_file, "--grid-n", "512"], capsys)
    assert status == 1 and json.loads(err)["kind"] == "validation"


def test_verify_subset(tmp_path, capsys):
    status, out, _ = run(["verify", "--checks", "vacuum_identity,unit_modulus_C", "--out-dir", tmp_path], capsys)
    assert status == 0 and "all checks passed" in out
    rep = json.loads((tmp_path / "verify_report.json").read_text())
    assert rep["passed"] and [c["name"] for c in rep["checks"]] == ["vacuum_identity", "unit_modulus_C"]


def test_verify_unknown_check(capsys):
    status, _, err = run(["verify", "--checks", "nonsense"], capsys)
    assert status == 1


def test_verify_full_suite(tmp_path, capsys):
    status, out, _ = run(["verify", "--out-dir", tmp_path], capsys)
    rep = json.loads((tmp_path / "verify_report.json").read_text())
    assert [c["name"] for c in rep["checks"]] == [c[0] for c in CHECKS]
    assert status == 0 and rep["passed"], out


def test_bitwise_determinism_across_threads(tmp_path, sech_file, capsys):
    outs = []
    for threads in (1, 1, 4):
        d = tmp_path / f"t{threads}_{len(outs)}"
        d.mkdir()
        assert run(["scatter", sech_file, "--threads", threads, "--out-dir", d,
                    "--contour", "real:0.1:2:24,imag:0.1:1:8"], capsys)[0] == 0
        outs.append((d / "scattering.csv").read_bytes())
    assert outs[0] == outs[1] == outs[2]


def test_config_file_merging(tmp_path, vacuum_file, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"contour": "real:0.5:1:5", "detS_tol": 1e-5}))
    status, out, _ = run(["scatter", vacuum_file, "--config", cfg, "--out-dir", tmp_path], capsys)
    assert status == 0 and "scattered 5 points" in out
    status, out, _ = run(["scatter", vacuum_file, "--config", cfg, "--contour", "real:0.5:1:7",
                          "--out-dir", tmp_path], capsys)
    assert "scattered 7 points" in out


def test_unknown_config_key(tmp_path, vacuum_file, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"colour": "blue"}))
    status, _, err = run(["scatter", vacuum_file, "--config", cfg], capsys)
    assert status == 1 and "colour" in json.loads(err)["message"]


def test_run_config_validation(tmp_path):
    with pytest.raises(ValidationError):
        RunConfig.build({}, {"n": 7})
    with pytest.raises(ValidationError):
        RunConfig.build({"threads": 0}, {})
    with pytest.raises(ValidationError):
        RunConfig.build({"grid_L": 5}, {})  # aliases are resolved by read_config only
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"grid_L": 5, "grid_n": 64}))
    merged = RunConfig.build(read_config(cfg), {})
    assert (merged.L, merged.n) == (5.0, 64)


@pytest.mark.parametrize("text,value", [("0.8+0.6i", 0.8 + 0.6j), ("2", 2), ([1, -1], 1 - 1j), (0.5, 0.5)])
def test_parse_complex(text, value):
    assert parse_complex(text) == value
