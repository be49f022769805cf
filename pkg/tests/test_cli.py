import csv
import json

import pytest

from mmvlimits.cli import main
from mmvlimits.config import SCHEMAS, ConfigError, build_config, read_config_file
from mmvlimits.output import DB_CONVENTION, read_schema, sidecar_path


def rows(path):
    with open(path) as fh:
        return list(csv.DictReader(ln for ln in fh if not ln.startswith("#")))


def run_ok(argv, capsys):
    code = main(argv)
    captured = capsys.readouterr()
    assert code == 0, captured.err
    return captured.out.split()


def run_err(argv, capsys):
    code = main(argv)
    err = capsys.readouterr().err.strip().splitlines()[-1]
    return code, json.loads(err)


def test_mmse_row_and_sidecar(tmp_path, capsys):
    out = tmp_path / "m.csv"
    run_ok(["mmse", "--rho", "0.1", "--J", "3", "--delta_db", "-35", "--R", "0.14", "--out", str(out)], capsys)
    assert read_schema(out) == "mmse"
    (row,) = rows(out)
    assert row["region"] == "2" and row["n_maxima"] == "2"
    meta = json.loads(sidecar_path(out).read_text())
    assert meta["db_convention"] == DB_CONVENTION
    assert meta["config"]["rho"] == 0.1


def test_complex_real_equals_mmse_with_two_vectors(tmp_path, capsys):
    a, b = tmp_path / "c.csv", tmp_path / "m.csv"
    run_ok(["complex-mmse", "--rho", "0.1", "--delta_db", "-30", "--R", "0.2", "--out", str(a)], capsys)
    run_ok(["mmse", "--rho", "0.1", "--J", "2", "--delta_db", "-30", "--R", "0.2", "--out", str(b)], capsys)
    assert rows(a)[0]["mmse"] == rows(b)[0]["mmse"]


def test_free_energy_family(tmp_path, capsys):
    out = tmp_path / "f.csv"
    run_ok(["free-energy", "--rho", "0.1", "--J", "3", "--delta_db", "-35", "--R", "0.12,0.14,0.16,0.2",
            "--n_points", "20", "--out", str(out)], capsys)
    got = rows(out)
    assert len(got) == 80
    assert sorted({r["R"] for r in got}) == ["0.12", "0.14", "0.16", "0.2"]


def test_config_file_and_flag_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# se run\nrho = 0.1\nJ = 3\ndelta_db = -35\nR = 0.3\n")
    out = tmp_path / "se.csv"
    run_ok(["se", "--config", str(cfg), "--R", "0.22", "--out", str(out)], capsys)
    meta = json.loads(sidecar_path(out).read_text())
    assert meta["config"]["R"] == 0.22 and meta["converged"]


def test_amp_sim_is_byte_deterministic(tmp_path, capsys):
    outs = []
    for k in range(2):
        out = tmp_path / f"amp{k}.csv"
        run_ok(["amp-sim", "--rho", "0.1", "--J", "3", "--delta_db_range", "-35,-35,1",
                "--R_range", "0.2,0.24,2", "--N", "200", "--n_trials", "1", "--t_max", "20",
                "--seed", "3", "--out", str(out)], capsys)
        outs.append(out)
    assert outs[0].read_bytes() == outs[1].read_bytes()
    assert outs[0].with_name("amp0.traces.jsonl").read_bytes() == outs[1].with_name("amp1.traces.jsonl").read_bytes()
    assert len(rows(outs[0])) == 2


def test_phase_diagram_single_cell(tmp_path, capsys):
    out = tmp_path / "pd.csv"
    run_ok(["phase-diagram", "--rho", "0.1", "--J", "3", "--delta_db_range", "-35,-35,1",
            "--R_range", "0.13,0.13,1", "--out", str(out)], capsys)
    (row,) = rows(out)
    assert row["region"] == "3"


@pytest.mark.parametrize("argv,key", [
    (["mmse", "--rho", "1.5", "--J", "3", "--delta_db", "-35", "--R", "0.2"], "rho"),
    (["mmse", "--rho", "0.1", "--J", "0", "--delta_db", "-35", "--R", "0.2"], "J"),
    (["mmse", "--rho", "0.1", "--J", "3", "--R", "0.2"], "delta"),
    (["mmse", "--rho", "0.1", "--J", "3", "--delta", "1e-3", "--delta_db", "-30", "--R", "0.2"], "delta"),
    (["se", "--rho", "0.1", "--J", "3", "--delta_db", "-35", "--R", "0.2", "--E0", "0.5"], "E0"),
    (["thresholds", "--rho", "0.1", "--J", "3", "--delta_db_range", "-35,-30,2", "--R_lo", "0.3",
      "--R_hi", "0.1"], "R_lo"),
    (["amp-sim", "--rho", "0.1", "--J", "3", "--delta_db_range", "-35,-35,1", "--R_range", "0.2,0.2,1",
      "--N", "5"], "N"),
])
def test_config_errors(argv, key, capsys):
    code, record = run_err(argv, capsys)
    assert code == 2
    assert record["key"] == key and record["precondition"]


def test_unknown_key_in_file(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("rho = 0.1\nJ = 3\ndelta_db = -35\nR = 0.2\nflavour = vanilla\n")
    code, record = run_err(["mmse", "--config", str(cfg)], capsys)
    assert code == 2 and record["key"] == "flavour"


def test_duplicate_key_in_file(tmp_path):
    cfg = tmp_path / "dup.cfg"
    cfg.write_text("rho = 0.1\nrho = 0.2\n")
    with pytest.raises(ConfigError):
        read_config_file(cfg)


def test_every_precondition_is_named():
    for sub, schema in SCHEMAS.items():
        for key, spec in schema.items():
            if spec.check is not None:
                assert spec.precondition, (sub, key)


def test_build_config_defaults():
    cfg = build_config("mmse", {"rho": "0.1", "J": "3", "delta_db": "-35", "R": "0.2"}, {})
    assert cfg["n_grid"] == 256 and cfg.delta == pytest.approx(10 ** -3.5)


@pytest.mark.parametrize("sub,argv,marker", [
    ("phase-diagram", ["--rho", "0.1", "--J", "3", "--delta_db_range", "-40,-30,2", "--R_range", "0.2,0.24,2"],
     "pcolormesh"),
    ("profile", ["--rho", "0.1", "--J", "3", "--delta_db", "-35", "--R", "0.14", "--n_grid", "64"], '"global"'),
    ("amp-sim", ["--rho", "0.1", "--J", "3", "--delta_db_range", "-35,-35,1", "--R_range", "0.2,0.2,1",
                 "--N", "200", "--n_trials", "2", "--t_max", "10"], "ln(MSE_AMP / MSE_BP)"),
])
def test_plot_scripts(tmp_path, capsys, sub, argv, marker):
    out = tmp_path / f"{sub}.csv"
    run_ok([sub, *argv, "--out", str(out)], capsys)
    (script,) = run_ok(["plot-script", str(out)], capsys)
    text = open(script).read()
    compile(text, script, "exec")
    assert marker in text
    if sub == "phase-diagram":
        assert "(dB)" in text


def test_plot_script_rejects_wrong_kind(tmp_path, capsys):
    out = tmp_path / "m.csv"
    run_ok(["mmse", "--rho", "0.1", "--J", "3", "--delta_db", "-35", "--R", "0.2", "--out", str(out)], capsys)
    code, record = run_err(["plot-script", str(out)], capsys)
    assert code == 2
