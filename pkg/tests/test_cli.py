import csv
import json
import math
import os
import subprocess
import sys

import pytest

from qpurify import cli


def read_csv(path):
    with open(path, encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def run(tmp_path, *argv):
    return cli.main([*argv, "--out", str(tmp_path)])


@pytest.mark.parametrize("v, text", [(0.5, "0.5"), (3, "3"), (0.0, "0"), (1e-5, "1.0000000000e-05"),
                                     (-2.5e-7, "-2.5000000000e-07"), (1e-4, "0.0001"),
                                     (1234.5, "1234.5"), (math.nan, "nan"), (True, "1")])
def test_format_value(v, text):
    assert cli.format_value(v) == text


def test_analytic_tau_q(tmp_path):
    assert run(tmp_path, "analytic", "tau_q", "--epsilon", "1e-6") == 0
    header, rows = read_csv(tmp_path / "analytic_tau_q.csv")
    assert header == ["epsilon", "tau_q"]
    assert float(rows[0][1]) == pytest.approx(3.2806, abs=1e-4)


def test_analytic_mean_fpt(tmp_path):
    assert run(tmp_path, "analytic", "mean_fpt", "--epsilon", "0.25", "--z0", "0") == 0
    _, rows = read_csv(tmp_path / "analytic_mean_fpt.csv")
    assert float(rows[0][3]) == pytest.approx(0.1558, abs=1e-4)


def test_analytic_ratio_asymptote(tmp_path):
    assert run(tmp_path, "analytic", "ratio", "--epsilon", "1e-1", "1e-6", "1e-12") == 0
    _, rows = read_csv(tmp_path / "analytic_ratio.csv")
    vals = [float(r[1]) for r in rows]
    assert vals == sorted(vals)
    assert vals[-1] == pytest.approx(1.902, abs=1e-3)


@pytest.mark.parametrize("quantity", cli.ANALYTIC_QUANTITIES)
def test_every_analytic_quantity_runs(tmp_path, quantity):
    extra = ["--epsilon", "0.05"] if quantity == "fp_survival" else []
    assert run(tmp_path, "analytic", quantity, *extra) == 0
    path = tmp_path / f"analytic_{quantity}.csv"
    header, rows = read_csv(path)
    assert rows and all(len(r) == len(header) for r in rows)
    manifest = json.loads((tmp_path / f"analytic_{quantity}.csv.manifest.json").read_text())
    assert list(manifest)[:5] == ["command", "output", "version", "seed", "duration_s"]
    assert manifest["quantity"] == quantity


def test_fp_survival_manifest_has_mean(tmp_path):
    assert run(tmp_path, "analytic", "fp_survival", "--epsilon", "0.01") == 0
    m = json.loads((tmp_path / "analytic_fp_survival.csv.manifest.json").read_text())
    assert m["fp_mean_fpt"] == pytest.approx(m["exact_mean_fpt"], rel=0.01)


def test_unknown_quantity_is_usage_error(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        run(tmp_path, "analytic", "entropy_of_everything")
    assert exc.value.code != 0
    assert "invalid choice" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [["fpt", "--epsilon", "0.7"], ["fpt", "--n-traj", "0"],
                                  ["fpt", "--dt", "-1"], ["fpt", "--protocol", "magic"],
                                  ["figure1", "--t", "nan"]])
def test_invalid_flags(tmp_path, argv):
    with pytest.raises(SystemExit) as exc:
        run(tmp_path, *argv)
    assert exc.value.code != 0
    assert not os.listdir(tmp_path)


def test_runtime_error_exits_nonzero(tmp_path, capsys):
    # dt larger than the horizon fails config validation inside the command
    code = run(tmp_path, "fpt", "--epsilon", "0.1", "--dt", "1", "--t-max", "0.5")
    assert code == 1
    assert "error" in capsys.readouterr().err
    assert not os.listdir(tmp_path)


def test_purity_requires_times(tmp_path):
    assert run(tmp_path, "purity", "--n-traj", "5") == 1


def test_write_failure_leaves_nothing(tmp_path):
    out = cli.OutputSet(str(tmp_path), "test")
    out.add("good.csv", ["a"], [[1]], {})
    out.add(os.path.join("missing", "bad.csv"), ["a"], [[2]], {})
    with pytest.raises(OSError):
        out.commit()
    assert os.listdir(tmp_path) == []


def test_out_dir_is_a_file(tmp_path):
    target = tmp_path / "taken"
    target.write_text("")
    assert cli.main(["analytic", "tau_q", "--out", str(target)]) == 1


def test_fpt_outputs(tmp_path):
    assert run(tmp_path, "fpt", "--epsilon", "0.01", "--n-traj", "300", "--protocol", "jacobs",
               "--workers", "2") == 0
    header, rows = read_csv(tmp_path / "fpt_jacobs_eps0.01_summary.csv")
    row = dict(zip(header, rows[0]))
    assert float(row["mean_T"]) == pytest.approx(float(row["reference_T"]), rel=2e-3)
    m = json.loads((tmp_path / "fpt_jacobs_eps0.01_hist.csv.manifest.json").read_text())
    for flag in ("epsilon", "dt", "t_max", "n_traj", "master_seed", "workers", "bins"):
        assert flag in m
    assert m["n_censored"] == 0


def test_figure1_single_trajectory(tmp_path):
    assert run(tmp_path, "figure1", "--n-traj", "1", "--t", "0.5", "3.2806") == 0
    for name in ("figure1_t0.5.csv", "figure1_t3.2806.csv"):
        header, rows = read_csv(tmp_path / name)
        assert sum(int(r[header.index("count")]) for r in rows) == 1
    header, rows = read_csv(tmp_path / "figure1_t3.2806.csv")
    jacobs = float(rows[0][header.index("jacobs_log10_s")])
    assert jacobs == pytest.approx(-6.0, abs=1e-4)


def test_figure2_3_table(tmp_path):
    assert run(tmp_path, "figure2-3", "--epsilon", "0.1", "0.01", "0.003", "--n-traj", "400") == 0
    header, rows = read_csv(tmp_path / "figure3_table.csv")
    col = {k: i for i, k in enumerate(header)}
    ratios = [float(r[col["ratio_curve"]]) for r in rows]
    assert ratios == sorted(ratios)
    for r in rows:
        assert abs(float(r[col["mc_mean_T"]]) - float(r[col["exact_mean_T"]])) \
            < 4 * float(r[col["mc_se_T"]])
    m = json.loads((tmp_path / "figure3_table.csv.manifest.json").read_text())
    assert m["n_censored"] == [0, 0, 0]
    assert (tmp_path / "figure2_fpt_eps0.003.csv").exists()


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "qpurify.cli", "analytic", "tau_q",
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.strip().endswith("analytic_tau_q.csv")
