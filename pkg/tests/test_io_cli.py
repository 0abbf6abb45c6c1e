import csv
import os
import subprocess
import sys

import numpy as np
import pytest

from conftest import noisy_panel
from pbpanel.cli import main
from pbpanel.dgp import simulate_ardl_panel
from pbpanel.io import config_hash, load_panel_csv, read_config, read_panel_csv, write_panel
from pbpanel.panel import PanelError


def _write(path, text):
    path.write_text(text)
    return path


def test_round_trip(tmp_path, rng):
    panel = noisy_panel(rng, n=3, T=8, beta=(1.0, -0.5), lengths=[9, 7, 8])
    write_panel(panel, tmp_path / "p.csv", ["inc", "infl"])
    back, names = read_panel_csv(tmp_path / "p.csv")
    assert names == ["inc", "infl"]
    np.testing.assert_array_equal(back.y, panel.y)
    np.testing.assert_array_equal(back.X, panel.X)
    np.testing.assert_array_equal(back.lengths, panel.lengths)
    write_panel(back, tmp_path / "q.csv", names)
    assert (tmp_path / "p.csv").read_text() == (tmp_path / "q.csv").read_text()


def test_rows_sorted_and_grouped(tmp_path):
    rows = ["unit,time,y,x1"] + [f"b,{t},{t},{2 * t}" for t in (3, 1, 2, 0, 4, 5)]
    rows += [f"a,{t},{-t},{t}" for t in range(6)]
    panel = load_panel_csv(_write(tmp_path / "p.csv", "\n".join(rows)))
    assert list(panel.unit_ids) == ["b", "a"] and panel.k == 1
    np.testing.assert_array_equal(panel.unit(0).y, np.arange(6.0))


def test_single_unit(tmp_path):
    text = "unit,time,y,x1\n" + "".join(f"u,{t},{t * 0.5},{t}\n" for t in range(10))
    assert load_panel_csv(_write(tmp_path / "p.csv", text)).n == 1


def test_duplicate_rows_cite_lines(tmp_path):
    text = "unit,time,y,x1\n" + "".join(f"u,{t},1,{t}\n" for t in range(8)) + "u,3,2,2\n"
    with pytest.raises(PanelError, match="lines 5 and 10"):
        load_panel_csv(_write(tmp_path / "p.csv", text))


def test_non_numeric_cell(tmp_path):
    text = "unit,time,y,x1\n" + "".join(f"u,{t},1,{t}\n" for t in range(8)) + "u,8,abc,1\n"
    with pytest.raises(PanelError, match=r":10: column y"):
        load_panel_csv(_write(tmp_path / "p.csv", text))


def test_time_gap_names_unit(tmp_path):
    text = "unit,time,y,x1\n" + "".join(f"DEU,{t},1,{t}\n" for t in range(9) if t != 4)
    with pytest.raises(PanelError, match="DEU.*gap between time 3 and 5"):
        load_panel_csv(_write(tmp_path / "p.csv", text))


def test_missing_values_trimmed_at_edges_only(tmp_path):
    body = [f"u,{t},{t * 0.3 + np.sin(t)},{t}" for t in range(10)]
    edge = ["unit,time,y,x1", "u,-1,,0.5"] + body + ["u,10,NA,3"]
    panel = load_panel_csv(_write(tmp_path / "e.csv", "\n".join(edge)))
    assert panel.lengths[0] == 10 and panel.t0[0] == 0
    body[4] = "u,4,NA,4"
    with pytest.raises(PanelError, match="inside"):
        load_panel_csv(_write(tmp_path / "i.csv", "\n".join(["unit,time,y,x1"] + body)))


def test_short_unit_listed(tmp_path):
    text = "unit,time,y,x1\n" + "".join(f"a,{t},{t},{t * t}\n" for t in range(8))
    text += "".join(f"b,{t},{t},{t}\n" for t in range(3))
    with pytest.raises(PanelError, match="b"):
        load_panel_csv(_write(tmp_path / "p.csv", text))


def test_bad_header(tmp_path):
    with pytest.raises(PanelError, match="header"):
        load_panel_csv(_write(tmp_path / "p.csv", "id,time,y,x\n"))


def test_read_config_and_hash(tmp_path):
    cfg = read_config(_write(tmp_path / "c.txt", "# run\nBootstrap-Reps = 9\n\nlevel=0.1 # note\n"))
    assert cfg == {"bootstrap_reps": "9", "level": "0.1"}
    assert config_hash({"a": 1, "b": 2}) == config_hash({"b": 2, "a": 1})
    assert len(config_hash(cfg)) == 16
    with pytest.raises(ValueError):
        read_config(_write(tmp_path / "d.txt", "nonsense\n"))


def _exact_csv(tmp_path, name, static):
    rng = np.random.default_rng(5)
    beta = np.array([0.8, -0.3])
    n = 5
    # delta_i = beta keeps y - beta'x constant; otherwise only the innovation is zero
    delta = np.tile(beta, (n, 1)) if static else rng.normal(size=(n, 2))
    panel = simulate_ardl_panel(beta, rng.uniform(0.2, 0.6, n), delta, rng.normal(size=n), 30,
                                rng)
    path = tmp_path / name
    write_panel(panel, path, ["x1", "x2"])
    return path, beta


@pytest.fixture
def exact_csv(tmp_path):
    return _exact_csv(tmp_path, "exact.csv", static=False)


def _read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


@pytest.mark.parametrize("estimators, static", [(("pb", "pmg"), False),
                                                (("pdols", "fmols"), True)])
def test_estimate_exact_panels(tmp_path, capsys, estimators, static):
    path, beta = _exact_csv(tmp_path, "exact.csv", static)
    rows = []
    for est in estimators:
        out = tmp_path / est
        main(["estimate", "--input", str(path), "--estimator", est, "--correction", "all",
              "--bootstrap-reps", "20", "--seed", "1", "--output", str(out), "--tol", "1e-12"])
        rows += _read_rows(out / "estimates.csv")
        report = (out / "report.txt").read_text()
        assert f"{est.upper()} (none)" in report and "seed=1" in report
    assert len(rows) == len(estimators) * 3 * 2
    for r in rows:
        j = int(r["coef"][1:]) - 1
        assert float(r["estimate"]) == pytest.approx(beta[j], abs=1e-6), r
        assert float(r["ci_hi"]) - float(r["ci_lo"]) < 1e-5, r
    assert "x1 (95% CI)" in capsys.readouterr().out


def test_estimate_needs_input(tmp_path):
    with pytest.raises(SystemExit):
        main(["estimate", "--output", str(tmp_path)])


def test_config_file_precedence(exact_csv, tmp_path):
    path, _ = exact_csv
    cfg = _write(tmp_path / "run.cfg", f"input = {path}\nlevel = 0.1\nestimator = pmg\n"
                                       f"output = {tmp_path / 'from_file'}\n")
    main(["estimate", "--config", str(cfg), "--estimator", "pb"])
    rows = _read_rows(tmp_path / "from_file" / "estimates.csv")
    assert {r["estimator"] for r in rows} == {"pb"}
    assert float(rows[0]["crit"]) == pytest.approx(1.6448536, rel=1e-6)


def test_unknown_config_key(tmp_path):
    cfg = _write(tmp_path / "bad.cfg", "colour = blue\n")
    with pytest.raises(SystemExit, match="colour"):
        main(["simulate", "--config", str(cfg)])


def test_simulate_reproducible_across_workers(tmp_path):
    args = ["simulate", "--n", "4", "--T", "8,10", "--reps", "4", "--seed", "7",
            "--estimator", "pb", "--correction", "all", "--bootstrap-reps", "9"]
    main(args + ["--workers", "1", "--output", str(tmp_path / "a")])
    main(args + ["--workers", "2", "--output", str(tmp_path / "b")])
    for name in ("mc_summary.csv", "mc_table.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    rows = _read_rows(tmp_path / "a" / "mc_summary.csv")
    assert len(rows) == 2 * 3
    assert all(0 <= float(r["size"]) <= 1 for r in rows)


def test_module_entry_point_and_pure_python_switch(tmp_path, exact_csv):
    path, _ = exact_csv
    env = dict(os.environ, PBPANEL_PURE_PYTHON="1")
    probe = subprocess.run(
        [sys.executable, "-c", "from pbpanel import kernels; print(kernels.BACKEND)"],
        env=env, capture_output=True, text=True, check=True)
    assert probe.stdout.strip() == "python"
    run = subprocess.run([sys.executable, "-m", "pbpanel", "estimate", "--input", str(path),
                          "--output", str(tmp_path / "o")], env=env, capture_output=True,
                         text=True)
    assert run.returncode == 0, run.stderr
    assert (tmp_path / "o" / "estimates.csv").exists()
