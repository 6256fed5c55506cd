"""End-to-end runs of every subcommand through main()."""

import numpy as np
import pytest

from psdlift.cli import (
    CSV_COLUMNS,
    SweepConfig,
    main,
    parse_sweep_config,
    run_sweep,
    write_csv,
)

SWEEP_TEXT = """\
# tiny grid for tests
d_list = 4, 5
k_list = 1
n_list = 12, 20
trials = 3
seed = 777
solver_tol = 1e-7
ensemble_source = haar
"""


def test_no_arguments_is_usage_error(capsys):
    assert main([]) == 2
    capsys.readouterr()


def test_unknown_subcommand_is_usage_error(capsys):
    assert main(["frobnicate"]) == 2
    capsys.readouterr()


def test_moments_command_passes(capsys):
    rc = main(["moments", "--lam", "e1", "--d", "4", "--t", "2",
               "--n-mc", "60000", "--seed", "5"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "moment check: d=4 t=2" in out
    assert out.count(" ok") >= 4


def test_moments_command_high_order_rank1(capsys):
    rc = main(["moments", "--lam", "e1", "--d", "3", "--t", "5",
               "--n-mc", "60000", "--seed", "6"])
    assert rc == 0
    capsys.readouterr()


def test_moments_rejects_high_order_general_spectrum(capsys):
    rc = main(["moments", "--lam", "1.0,0.5,0.25", "--t", "5"])
    assert rc == 2
    assert "error:" in capsys.readouterr().err


def test_moments_rejects_bad_spectrum_string(capsys):
    rc = main(["moments", "--lam", "0.5,1.0", "--t", "2"])
    assert rc in (1, 2)
    assert "error:" in capsys.readouterr().err


def test_build_verify_cycle(tmp_path, capsys):
    out = tmp_path / "d3t2.ens"
    rc = main(["build", "--lam", "e1", "--d", "3", "--t", "2",
               "--pool", "200", "--out", str(out), "--seed", "9"])
    assert rc == 0
    text = capsys.readouterr().out
    assert "built strength-2 ensemble" in text
    assert out.exists()

    assert main(["verify", "--path", str(out)]) == 0
    assert "pass" in capsys.readouterr().out
    # the claimed strength came from the file; asking for more fails
    assert main(["verify", "--path", str(out), "--t", "3"]) == 1
    assert "fail" in capsys.readouterr().out
    # randomized mode and fusion probes agree
    assert main(["verify", "--path", str(out), "--mode", "randomized"]) == 0
    capsys.readouterr()
    assert main(["verify", "--path", str(out), "--fusion"]) == 0
    capsys.readouterr()


def test_build_reports_impossible_target(tmp_path, capsys):
    out = tmp_path / "never.ens"
    rc = main(["build", "--lam", "e1", "--d", "3", "--t", "3",
               "--pool", "40", "--residual", "1e-30", "--out", str(out)])
    assert rc == 1
    assert "error:" in capsys.readouterr().err
    assert not out.exists()


def test_verify_missing_file(capsys):
    assert main(["verify", "--path", "/nonexistent/x.ens"]) == 1
    assert "error:" in capsys.readouterr().err


def test_recover_command_haar(capsys):
    rc = main(["recover", "--d", "5", "--n", "25", "--seed", "3"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "success True" in out


def test_recover_command_from_built_ensemble(capsys):
    rc = main(["recover", "--d", "4", "--n", "30",
               "--source", "build:t=3,pool=400", "--seed", "4"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "success True" in out


def test_recover_command_from_file(tmp_path, capsys):
    path = tmp_path / "d4.ens"
    assert main(["build", "--lam", "e1", "--d", "4", "--t", "3",
                 "--pool", "500", "--out", str(path)]) == 0
    capsys.readouterr()
    rc = main(["recover", "--d", "4", "--n", "28", "--source", str(path)])
    assert rc == 0
    assert "success True" in capsys.readouterr().out


def test_recover_rejects_mismatched_ensemble(tmp_path, capsys):
    path = tmp_path / "d3.ens"
    assert main(["build", "--lam", "e1", "--d", "3", "--t", "2",
                 "--pool", "200", "--out", str(path)]) == 0
    capsys.readouterr()
    rc = main(["recover", "--d", "5", "--n", "20", "--source", str(path)])
    assert rc == 2
    assert "ensemble file is d=3" in capsys.readouterr().err


def test_certify_command(capsys):
    rc = main(["certify", "--d", "8", "--c0", "6.0", "--seed", "11"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "guarantee verdict True" in out
    assert "in_span True" in out
    assert "recovery error" in out


def test_sweep_config_parsing(tmp_path):
    cfgfile = tmp_path / "sweep.cfg"
    cfgfile.write_text(SWEEP_TEXT)
    cfg = parse_sweep_config(cfgfile)
    assert cfg.d_list == (4, 5)
    assert cfg.k_list == (1,)
    assert cfg.n_list == (12, 20)
    assert cfg.trials == 3
    assert cfg.seed == 777
    assert cfg.lambda_profile == "projector"
    assert cfg.timing is False


def test_sweep_config_unknown_key(tmp_path, capsys):
    cfgfile = tmp_path / "bad.cfg"
    cfgfile.write_text(SWEEP_TEXT + "flux_capacitor = 1\n")
    rc = main(["sweep", "--config", str(cfgfile), "--out", str(tmp_path / "o.csv")])
    assert rc == 2
    assert "unknown key" in capsys.readouterr().err


def test_sweep_config_missing_required(tmp_path, capsys):
    cfgfile = tmp_path / "bad.cfg"
    cfgfile.write_text("d_list = 4\nk_list = 1\nn_list = 8\n")
    rc = main(["sweep", "--config", str(cfgfile), "--out", str(tmp_path / "o.csv")])
    assert rc == 2
    assert "missing keys" in capsys.readouterr().err


def test_sweep_runs_are_byte_identical(tmp_path, capsys):
    cfgfile = tmp_path / "sweep.cfg"
    cfgfile.write_text(SWEEP_TEXT)
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["sweep", "--config", str(cfgfile), "--out", str(out1)]) == 0
    assert main(["sweep", "--config", str(cfgfile), "--out", str(out2)]) == 0
    capsys.readouterr()
    assert out1.read_bytes() == out2.read_bytes()
    header = out1.read_text().splitlines()[0]
    assert header == CSV_COLUMNS


def test_sweep_rows_follow_grid_order(tmp_path):
    cfg = SweepConfig(d_list=(4,), k_list=(1,), n_list=(10, 16), lambda_profile="projector",
                      trials=2, seed=5, solver_tol=1e-7, ensemble_source="haar")
    rows = run_sweep(cfg)
    assert [(r["d"], r["k"], r["n"], r["trial"]) for r in rows] == [
        (4, 1, 10, 0), (4, 1, 10, 1), (4, 1, 16, 0), (4, 1, 16, 1)]
    # haar source reports claimed strength 0 and zero wall time without timing
    assert all(r["t"] == 0 for r in rows)
    assert all(r["wall_ms"] == 0.0 for r in rows)
    assert all(r["seed"] != cfg.seed for r in rows)
    path = tmp_path / "rows.csv"
    write_csv(rows, path)
    lines = path.read_text().splitlines()
    assert len(lines) == 1 + len(rows)
    assert lines[0] == CSV_COLUMNS


def test_sweep_timing_fills_wall_ms(tmp_path):
    cfg = SweepConfig(d_list=(4,), k_list=(1,), n_list=(12,), lambda_profile="projector",
                      trials=1, seed=5, solver_tol=1e-7, ensemble_source="haar",
                      timing=True)
    rows = run_sweep(cfg)
    assert rows[0]["wall_ms"] > 0.0


def test_sweep_cell_reproducible_in_isolation(tmp_path):
    full = SweepConfig(d_list=(4, 5), k_list=(1,), n_list=(12, 20),
                       lambda_profile="projector", trials=3, seed=777,
                       solver_tol=1e-7, ensemble_source="haar")
    rows = run_sweep(full)
    sub = SweepConfig(d_list=(4, 5), k_list=(1,), n_list=(12, 20),
                      lambda_profile="projector", trials=2, seed=777,
                      solver_tol=1e-7, ensemble_source="haar")
    sub_rows = run_sweep(sub)
    full_by_key = {(r["d"], r["k"], r["n"], r["trial"]): r for r in rows}
    for r in sub_rows:
        assert full_by_key[(r["d"], r["k"], r["n"], r["trial"])] == r
