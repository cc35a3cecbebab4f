import io
import subprocess
import sys

import numpy as np
import pytest

from dampedcasimir import analytic, cli
from dampedcasimir.params import SystemParams, derive

FAST = ["--epsilon", "0.05", "--hbarK-over-kT", "3"]


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def parse_csv(text):
    lines = [l for l in text.splitlines() if not l.startswith("#")]
    header = lines[0].split(",")
    rows = [l.split(",") for l in lines[1:]]
    return header, rows


def column(text, name):
    header, rows = parse_csv(text)
    i = header.index(name)
    return np.array([float(r[i]) for r in rows])


def test_fig2_two_points(capsys):
    code, out, err = run(capsys, "fig2", *FAST, "--points", "2", "--t-max", "1")
    assert code == 0
    header, rows = parse_csv(out)
    assert header == ["gamma_t", "n_analytic_T0", "n_numeric_T0", "n_analytic_T", "n_numeric_T"]
    assert len(rows) == 2
    n_num, n_an = column(out, "n_numeric_T"), column(out, "n_analytic_T")
    assert np.max(np.abs(n_num - n_an)) < 1e-8
    assert "# derived" in out and "max_abs_deviation" in err


def test_output_is_deterministic_and_roundtrips(capsys, tmp_path):
    args = ["fig2", *FAST, "--points", "3", "--t-max", "0.5"]
    _, first, _ = run(capsys, *args)
    _, second, _ = run(capsys, *args)
    assert first == second
    p = derive(SystemParams(epsilon=0.05, hbarK_over_kT=3))
    t = column(first, "gamma_t")
    n = column(first, "n_analytic_T")
    # 17 significant digits survive the text roundtrip bit for bit
    np.testing.assert_array_equal(n, analytic.n_microscopic(t, p))


def test_lossless_time_column(capsys):
    code, out, err = run(capsys, "fig2", *FAST, "--gamma", "0", "--points", "3", "--t-max", "1")
    assert code == 0
    header, _ = parse_csv(out)
    assert header[0] == "t" and "lossless" in out


def test_fig3_both_conventions(capsys):
    code, out, _ = run(capsys, "fig3", *FAST, "--points", "3", "--tau-max", "0.5", "--convention", "both")
    assert code == 0
    header, rows = parse_csv(out)
    assert "g2_analytic_T_times" in header and "g2_analytic_T_divided" in header
    assert len(rows) == 3
    assert np.max(np.abs(column(out, "g2_numeric_T") - column(out, "g2_analytic_T_divided"))) < 1e-7


def test_fig3_default_convention(capsys):
    code, out, _ = run(capsys, "fig3", *FAST, "--points", "2", "--tau-max", "0.2")
    assert code == 0
    header, _ = parse_csv(out)
    assert "g2_analytic_T" in header and "# convention = divided" in out


def test_sweep_gamma_axis_keeps_steady_state(capsys):
    code, out, _ = run(capsys, "sweep", "--axis", "gamma", "--start", "0.5", "--stop", "2",
                       "--points", "3", "--quick")
    assert code == 0
    n = column(out, "n_st")
    assert np.ptp(n) == 0.0
    _, rows = parse_csv(out)
    assert {r[-1] for r in rows} == {"analytic-only"}


def test_sweep_flags_out_of_regime(capsys):
    code, out, _ = run(capsys, "sweep", "--start", "0.8", "--stop", "1.2", "--points", "3", "--quick")
    assert code == 0
    _, rows = parse_csv(out)
    assert [r[-1] for r in rows] == ["analytic-only", "out-of-regime", "out-of-regime"]
    assert [r[-2] for r in rows] == ["bounded", "critical", "unbounded"]


def test_sweep_numeric_occupation_axis(capsys):
    code, out, _ = run(capsys, "sweep", "--axis", "N_Omega", "--start", "0", "--stop", "1",
                       "--points", "2", *FAST)
    assert code == 0
    N = column(out, "N_Omega")
    assert N[0] == 0.0 and N[1] == pytest.approx(1.0, rel=1e-12)
    np.testing.assert_allclose(column(out, "n_st_numeric"), column(out, "n_st"), rtol=1e-8)
    np.testing.assert_allclose(column(out, "g2_zero_numeric"), column(out, "g2_zero_analytic"), rtol=1e-7)


@pytest.mark.parametrize("model", ["microscopic", "phenomenological"])
def test_steady(capsys, model):
    code, out, err = run(capsys, "steady", *FAST, "--model", model, "--dim", "40")
    assert code == 0
    _, rows = parse_csv(out)
    assert len(rows) == 40
    assert column(out, "p_numeric").sum() == pytest.approx(1, abs=1e-12)
    if model == "microscopic":
        np.testing.assert_allclose(column(out, "p_numeric"), column(out, "p_analytic"), atol=1e-9)


def test_config_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nepsilon = 0.05\npoints = 4\nt_max = 0.5\nhbarK_over_kT = 3\n")
    _, out, _ = run(capsys, "fig2", "--config", str(cfg))
    assert len(parse_csv(out)[1]) == 4
    _, out, _ = run(capsys, "fig2", "--config", str(cfg), "--points", "2")
    assert len(parse_csv(out)[1]) == 2
    assert "# epsilon = 0.05" in out


@pytest.mark.parametrize("text", ["bogus = 1\n", "points = many\n", "epsilon = -1\n",
                                  "convention = sideways\n", "points = 1\n", "quick = maybe\n"])
def test_invalid_config_exits_2(tmp_path, capsys, text):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(text)
    code, _, err = run(capsys, "fig2", "--config", str(cfg))
    assert code == 2 and "invalid configuration" in err


def test_invalid_flags_exit_2(capsys):
    assert run(capsys, "fig2", "--points", "1")[0] == 2
    assert run(capsys, "fig2", "--config", "/nonexistent/file")[0] == 2
    assert run(capsys, "sweep", "--start", "1", "--stop", "0.5")[0] == 2
    assert run(capsys, "fig2", "--jobs", "0")[0] == 2
    with pytest.raises(SystemExit) as exc:
        cli.main(["fig2", "--convention", "sideways"])
    assert exc.value.code == 2


def test_solver_failure_exits_1(capsys):
    code, _, err = run(capsys, "fig2", *FAST, "--dim", "6", "--points", "2", "--t-max", "5")
    assert code == 1 and "TruncationLeak" in err


def test_jobs_resolution():
    parser = cli.build_parser()
    args = parser.parse_args(["fig2"])
    assert cli.resolve_config(args, environ={}).jobs == 1
    assert cli.resolve_config(args, environ={"CASIMIR_JOBS": "3"}).jobs == 3
    args = parser.parse_args(["fig2", "--jobs", "2"])
    assert cli.resolve_config(args, environ={"CASIMIR_JOBS": "3"}).jobs == 2
    with pytest.raises(cli.ConfigError):
        cli.resolve_config(parser.parse_args(["fig2"]), environ={"CASIMIR_JOBS": "x"})


def test_parallel_matches_serial(capsys):
    args = ["fig2", *FAST, "--points", "2", "--t-max", "0.5"]
    _, serial, _ = run(capsys, *args)
    _, parallel, _ = run(capsys, *args, "--jobs", "2")
    assert serial == parallel


def test_output_file_and_plot_script(tmp_path, capsys):
    csv, gp = tmp_path / "n.csv", tmp_path / "n.gp"
    code, out, err = run(capsys, "fig2", *FAST, "--points", "2", "--t-max", "0.5",
                         "--output", str(csv), "--plot-script", str(gp))
    assert code == 0 and out == ""
    assert csv.read_text().startswith("# dampedcasimir")
    script = gp.read_text()
    assert str(csv) in script and "n_numeric_T" in script


def test_write_csv_formats_strings_and_floats():
    cfg = cli.ScenarioConfig("steady", SystemParams())
    rec = cli.RunRecord(cfg, {"x": 0.1}, {"a": np.array([1 / 3]), "b": ["ok"]})
    buf = io.StringIO()
    cli.write_csv(rec, buf)
    assert buf.getvalue().splitlines()[-1] == "0.33333333333333331,ok"
    assert "# derived x = 0.10000000000000001" in buf.getvalue()
    with pytest.raises(ValueError):
        cli.RunRecord(cfg, {}, {"a": [1, 2], "b": [1]})


def test_verify_subset_passes(capsys):
    code, _, err = run(capsys, "verify", "--quick", "--criteria", "3,7")
    assert code == 0
    assert "[PASS] 3." in err and "[PASS] 7." in err and "2/2 criteria passed" in err


def test_verify_mutation_fails_named_criterion(capsys):
    code, _, err = run(capsys, "verify", "--quick", "--criteria", "1", "--mutate", "photon-number-sign")
    assert code == 1
    assert "FAILED: criterion 1" in err


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "dampedcasimir.cli", "--version"],
                         capture_output=True, text=True)
    assert out.returncode == 0 and "0.1.0" in out.stdout
