import re
import subprocess
import sys

import pytest

from plugin_rates import __version__, harness
from plugin_rates.cli import main

HEADER = re.compile(r"^# plugin-rates " + re.escape(__version__) + r" config-hash=[0-9a-f]{16}$")

PARABOLA = ["--set", "oracle.kind=parabola", "--set", "oracle.c_coef=0.5", "--set", "oracle.n=100"]


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_synth_writes_csv_and_meta(tmp_path, capsys):
    code, out, _ = run(["synth", *PARABOLA, "--seed", 7, "--out", tmp_path], capsys)
    assert code == 0 and "rows = 100" in out
    lines = (tmp_path / "run.csv").read_text().splitlines()
    assert HEADER.match(lines[0]) and lines[1] == "x1,y" and len(lines) == 102
    meta = (tmp_path / "run.meta").read_text().splitlines()
    assert HEADER.match(meta[0]) and "generator = parabola" in meta and "seed = 7" in meta


def test_synth_rerun_is_byte_identical(tmp_path, capsys):
    for sub in ("a", "b"):
        assert run(["synth", *PARABOLA, "--seed", 7, "--out", tmp_path / sub], capsys)[0] == 0
    for name in ("run.csv", "run.meta"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    run(["synth", *PARABOLA, "--seed", 8, "--out", tmp_path / "c"], capsys)
    assert (tmp_path / "a" / "run.csv").read_bytes() != (tmp_path / "c" / "run.csv").read_bytes()


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("oracle.kind = parabola\noracle.c_coef = 0.5\noracle.n = 10\nout.name = small\n")
    code, _, _ = run(["synth", "--config", cfg, "--set", "oracle.n=12", "--out", tmp_path], capsys)
    assert code == 0 and len((tmp_path / "small.csv").read_text().splitlines()) == 14


def test_exit_1_missing_key(tmp_path, capsys):
    code, _, err = run(["synth", "--set", "oracle.kind=parabola", "--set", "oracle.n=5", "--out", tmp_path], capsys)
    assert code == 1 and "oracle.c_coef" in err


def test_exit_1_unknown_key_and_bad_usage(tmp_path, capsys):
    assert run(["synth", *PARABOLA, "--set", "oracle.colour=red", "--out", tmp_path], capsys)[0] == 1
    assert run(["frobnicate"], capsys)[0] == 1
    assert run([], capsys)[0] == 1


def test_exit_2_hypercube_constraint(tmp_path, capsys):
    args = ["synth", "--set", "oracle.kind=hypercube", "--set", "oracle.q=2", "--set", "oracle.m=5",
            "--set", "oracle.w=0.1", "--set", "oracle.beta=1", "--set", "oracle.lip=1", "--set", "oracle.n=10",
            "--out", tmp_path]
    code, _, err = run(args, capsys)
    assert code == 2 and "m" in err and "q^d" in err.replace("q**d", "q^d")


def _write_dataset(path, rows, d=1):
    names = ",".join([f"x{j + 1}" for j in range(d)] + ["y"])
    path.write_text(names + "\n" + "\n".join(rows) + "\n")
    return path


def test_exit_2_malformed_dataset(tmp_path, capsys):
    ds = _write_dataset(tmp_path / "bad.csv", ["0.1,1", "oops,0"])
    code, _, err = run(["fit", ds, "--set", "lp.beta=1", "--out", tmp_path], capsys)
    assert code == 2 and "row 3" in err and "column x1" in err


def test_fit_constant_labels_and_guard(tmp_path, capsys):
    rows = [f"{i / 50},1" for i in range(51)]
    ds = _write_dataset(tmp_path / "ones.csv", rows)
    queries = tmp_path / "q.csv"
    queries.write_text("x1\n0.25\n0.5\n0.75\n40\n")
    code, _, _ = run(["fit", ds, "--queries", queries, "--set", "lp.beta=1", "--set", "lp.bandwidth=0.2",
                      "--out", tmp_path], capsys)
    assert code == 0
    lines = (tmp_path / "run.fit.csv").read_text().splitlines()
    assert HEADER.match(lines[0]) and lines[1] == "x1,eta_hat,label,guarded"
    body = [ln.split(",") for ln in lines[2:]]
    assert [r[1:] for r in body[:3]] == [["1.0", "1", "0"]] * 3
    assert body[3][1:] == ["0.0", "0", "1"]


def test_fit_singleton_sieve(tmp_path, capsys):
    ds = _write_dataset(tmp_path / "d.csv", ["0.1,0", "0.9,1"])
    code, _, _ = run(["fit", ds, "--set", "fit.classifier=sieve", "--set", "sieve.beta=1", "--set", "sieve.lip=1",
                      "--set", "sieve.cells=1", "--set", "sieve.tau=2", "--out", tmp_path], capsys)
    assert code == 0
    text = (tmp_path / "run.fit.csv").read_text()
    assert "# member_index=0 empirical_risk=0.5" in text
    assert len(text.splitlines()) == 3 + 11


def test_exit_3_budget(tmp_path, capsys):
    ds = _write_dataset(tmp_path / "d.csv", ["0.1,0", "0.9,1"])
    code, _, err = run(["fit", ds, "--set", "fit.classifier=sieve", "--set", "sieve.beta=1", "--set", "sieve.lip=1",
                        "--set", "sieve.cells=4096", "--set", "sieve.tau=0.25", "--out", tmp_path], capsys)
    assert code == 3 and "budget" in err


SWEEP = [*PARABOLA, "--set", "lp.beta=1", "--set", "sweep.n_grid=50,100", "--set", "sweep.mc=300",
         "--set", "sweep.theory=strong", "--set", "sweep.alpha=0.5", "--set", "sweep.beta=1", "--set", "sweep.d=1"]


def test_sweep_two_rows(tmp_path, capsys):
    code, out, _ = run(["sweep", *SWEEP, "--set", "out.gnuplot=yes", "--seed", 3, "--out", tmp_path], capsys)
    assert code == 0 and "rows = 2" in out
    lines = (tmp_path / "run.sweep.csv").read_text().splitlines()
    assert HEADER.match(lines[0]) and lines[1].startswith("# masked_zero_risks=")
    assert lines[2] == "n,mean_excess,se,replicates,theoretical_exponent,fitted_slope,r_squared"
    rows = [ln.split(",") for ln in lines[3:]]
    assert [r[0] for r in rows] == ["50", "100"] and all(r[5] for r in rows)
    assert rows[0][4] == repr(0.5)
    dat = (tmp_path / "run.sweep.dat").read_text().splitlines()
    assert HEADER.match(dat[0]) and len(dat) == 3


def test_sweep_rerun_is_byte_identical(tmp_path, capsys):
    for sub in ("a", "b"):
        run(["sweep", *SWEEP, "--set", "sweep.replicates=2", "--seed", 11, "--out", tmp_path / sub], capsys)
    assert (tmp_path / "a" / "run.sweep.csv").read_bytes() == (tmp_path / "b" / "run.sweep.csv").read_bytes()


def test_interrupted_sweep_keeps_rows(tmp_path, capsys, monkeypatch):
    real = harness._replicate_task

    def interrupt_at_100(args):
        if args[2] == 100:
            raise KeyboardInterrupt
        return real(args)

    monkeypatch.setattr(harness, "_replicate_task", interrupt_at_100)
    code, _, err = run(["sweep", *SWEEP, "--out", tmp_path], capsys)
    assert code == 130 and "completed rows" in err
    lines = (tmp_path / "run.sweep.csv").read_text().splitlines()
    assert lines[1] == "# partial" and lines[-1].startswith("50,") and len(lines) == 5


def test_netinfo_card(capsys):
    code, out, _ = run(["netinfo", "--set", "sieve.beta=1", "--set", "sieve.lip=1", "--set", "sieve.cells=1",
                        "--set", "sieve.tau=0.25", "--set", "sieve.rho=1", "--set", "sieve.n=100"], capsys)
    assert code == 0
    info = dict(line.split(" = ") for line in out.splitlines())
    assert info["card"] == "5" and info["degree"] == "0"
    assert float(info["epsilon_n"]) == pytest.approx(100 ** (-1 / 3))
    assert "implied_a_prime" in info


def test_probe_large_delta_column_is_zero(tmp_path, capsys):
    args = ["probe", *PARABOLA, "--set", "lp.beta=1", "--set", "sweep.probe=concentration",
            "--set", "sweep.points=0.0; 0.5", "--set", "sweep.deltas=0.1,1.5", "--set", "sweep.n_grid=50,100",
            "--set", "sweep.replicates=20", "--out", tmp_path]
    assert run(args, capsys)[0] == 0
    lines = (tmp_path / "run.probe.csv").read_text().splitlines()
    assert HEADER.match(lines[0])
    cols = lines[[i for i, ln in enumerate(lines) if ln.startswith("n,")][0]].split(",")
    rows = [dict(zip(cols, ln.split(","))) for ln in lines if ln[0].isdigit()]
    assert len(rows) == 8
    assert all(float(r["p_hat"]) == 0 for r in rows if float(r["delta"]) > 1)


def test_probe_exponential_and_assouad(tmp_path, capsys):
    corridor = ["--set", "oracle.kind=corridor", "--set", "oracle.t0=0.1", "--set", "oracle.gap_width=0.3"]
    base = ["probe", *corridor, "--set", "lp.beta=1", "--set", "sweep.probe=exponential",
            "--set", "sweep.n_grid=50,100", "--set", "sweep.mc=200", "--out", tmp_path]
    assert run(base, capsys)[0] == 1
    assert run(base + ["--set", "lp.bandwidth=0.05"], capsys)[0] == 0
    cube = ["--set", "oracle.kind=hypercube", "--set", "oracle.q=4", "--set", "oracle.m=2", "--set", "oracle.w=0.25",
            "--set", "oracle.beta=1", "--set", "oracle.lip=1", "--set", "sweep.probe=assouad", "--set", "sweep.n=32",
            "--set", "sweep.classifier=constant", "--set", "sweep.mc=500", "--set", "out.name=cube"]
    code, out, _ = run(["probe", *cube, "--out", tmp_path], capsys)
    assert code == 0 and "dominates = 1" in out
    assert len((tmp_path / "cube.probe.csv").read_text().splitlines()) == 2 + 4 + 1


def test_console_script_version():
    res = subprocess.run([sys.executable, "-m", "plugin_rates.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip() == f"plugin-rates {__version__}"
