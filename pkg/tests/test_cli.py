import csv
import json
import math
from pathlib import Path

import pytest

from foldfold import cli
from foldfold.cli import main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
S4 = str(CONFIGS / "glacial.ini")
SYN = str(CONFIGS / "synthetic.ini")


def run_json(capsys, *argv):
    code = main([*argv, "--json"])
    out = capsys.readouterr().out
    return code, (json.loads(out) if out.strip() else None)


def write_config(tmp_path, text, name="c.ini"):
    f = tmp_path / name
    f.write_text(text)
    return str(f)


def test_find_foldfold_glacial(capsys):
    code, rep = run_json(capsys, "find-foldfold", "--config", S4)
    assert code == 0
    hits = [s for s in rep["solutions"] if abs(s["y0"] - 0.948796) < 1e-6 and abs(s["z0"] - 0.918074) < 1e-6]
    assert len(hits) == 1
    for s in rep["solutions"]:
        assert max(abs(r) for r in s["residuals"]) <= 1e-10


def test_find_foldfold_planted_root(tmp_path, capsys):
    cfg = write_config(tmp_path, "[model]\nkind = synthetic\n[bifurcation]\n"
                                 "seed_y = 0.2, 0.6, 3\nseed_z = -0.2, 0.2, 3\n")
    code, rep = run_json(capsys, "find-foldfold", "--config", cfg)
    assert code == 0 and rep["n_seeds"] == 9
    assert len(rep["solutions"]) == 1
    s = rep["solutions"][0]
    assert (s["x0"], s["y0"], s["z0"]) == pytest.approx((0.0, 0.4, 0.0), abs=1e-12)


def test_find_foldfold_empty_grid(tmp_path, capsys):
    cfg = write_config(tmp_path, "[bifurcation]\nseed_y = 0, 1, 0\n")
    assert main(["find-foldfold", "--config", cfg]) == 2


def test_find_foldfold_none_found(tmp_path, capsys):
    # Tbar_minus only enters at order eps, so it cannot unfold the singularity
    cfg = write_config(tmp_path, "[bifurcation]\nfree_param = Tbar_minus\n"
                                 "seeds = 5.08, 0.95, 0.92, 1\n")
    assert main(["find-foldfold", "--config", cfg]) == 1


def test_check_glacial(capsys):
    code, rep = run_json(capsys, "check", "--config", S4)
    assert code == 0
    assert rep["applicable"] is True and rep["stable_branch"] == "lower"
    assert rep["coefficients"]["beta_minus"] == -2.0 / rep["coefficients"]["h0_minus"]


def test_check_report_round_trips(tmp_path, capsys):
    code, rep = run_json(capsys, "check", "--config", S4)
    p = rep["point"]
    point = f"{p['x0']!r},{p['y0']!r},{p['z0']!r},{p['param_value']!r}"
    code2, rep2 = run_json(capsys, "check", "--config", S4, "--point", point)
    assert code2 == code
    assert rep2["verdict"] == rep["verdict"]
    assert rep2["coefficients"] == pytest.approx(rep["coefficients"], rel=1e-9)


def test_check_tampered_point(capsys):
    assert main(["check", "--config", S4, "--point", "5.08105,0.948796,1.018074,-10.0202"]) == 3


@pytest.mark.parametrize("variant, code", [("nominal", 0), ("no_gx", 1), ("same_sign_h", 1), ("flipped_slopes", 1)])
def test_check_synthetic_variants(tmp_path, capsys, variant, code):
    cfg = write_config(tmp_path, f"[model]\nkind = synthetic\nvariant = {variant}\n"
                                 "[bifurcation]\npoint = 0, 0.4, 0, 0\n")
    got, rep = run_json(capsys, "check", "--config", cfg)
    assert got == code
    if variant == "same_sign_h":
        assert rep["verdict"]["failed"] == ["timemap"]


def test_predict_rows(capsys):
    code, rep = run_json(capsys, "predict", "--config", S4, "--eps", "1e-3,4e-3,1e-4")
    assert code == 0
    rows = {r["epsilon"]: r for r in rep["rows"]}
    assert rows[1e-3]["T_pred"] / rows[4e-3]["T_pred"] == 0.5
    assert rows[1e-3]["T_pred"] == pytest.approx(0.149956, abs=1e-4)
    assert rows[1e-3]["T_minus"] + rows[1e-3]["T_plus"] == pytest.approx(rows[1e-3]["T_pred"], rel=1e-15)


def test_predict_reference_1e4(capsys):
    code, rep = run_json(capsys, "predict", "--config", S4, "--eps", "1e-4")
    assert rep["rows"][0]["T_pred"] == pytest.approx(0.047202, abs=1e-4)


def test_predict_inapplicable(tmp_path, capsys):
    cfg = write_config(tmp_path, "[model]\nkind = synthetic\nvariant = flipped_slopes\n"
                                 "[bifurcation]\npoint = 0, 0.4, 0, 0\n")
    code, rep = run_json(capsys, "predict", "--config", cfg)
    assert code == 1 and rep["failed"] == ["as4"]


@pytest.mark.parametrize("cmd", ["predict", "verify"])
def test_non_positive_eps_list(capsys, cmd):
    assert main([cmd, "--config", SYN, "--eps", "1e-3,0"]) == 2
    assert main([cmd, "--config", SYN, "--eps", "-1e-3"]) == 2


def test_text_output_has_17_digits(capsys):
    _, rep = run_json(capsys, "predict", "--config", S4, "--eps", "1e-3")
    assert main(["predict", "--config", S4, "--eps", "1e-3"]) == 0
    token = capsys.readouterr().out.splitlines()[1].split()[1]
    assert token == format(rep["rows"][0]["T_pred"], ".17g")
    assert len(token.replace("0.", "", 1)) == 17


@pytest.mark.slow
@pytest.mark.parametrize("eps, reference", [(1e-3, 0.1528), (1e-4, 0.04795)])
def test_simulate_glacial(tmp_path, capsys, eps, reference):
    out = tmp_path / "sim"
    code, rep = run_json(capsys, "simulate", "--config", S4, "--eps", str(eps), "--out", str(out))
    assert code == 0
    with open(out / "trajectory.csv") as fh:
        assert next(csv.reader(fh)) == ["t", "x", "y", "z", "region", "H"]
    assert (out / "events.csv").exists() and (out / "simulate.json").exists()
    cycle = json.loads((out / "cycle.json").read_text())
    assert set(cycle) == set(cli.CYCLE_KEYS)
    assert cycle["period_simulated"] == pytest.approx(cycle["period_newton"], rel=1e-3)
    assert cycle["period_simulated"] == pytest.approx(reference, rel=0.02)


def test_simulate_negative_eps(tmp_path):
    assert main(["simulate", "--config", S4, "--eps", "-1e-3", "--out", str(tmp_path)]) == 2
    assert main(["simulate", "--config", S4, "--eps", "1e-3", "--t-max", "0", "--out", str(tmp_path)]) == 2


def test_simulate_integration_failure_exit_4(tmp_path, capsys):
    cfg = write_config(tmp_path, "[integration]\nmax_events = 3\n[bifurcation]\n"
                                 "point = 5.08105, 0.948796, 0.918074, -10.0202\n")
    assert main(["simulate", "--config", cfg, "--eps", "1e-3", "--t-max", "5", "--out", str(tmp_path / "o")]) == 4


def test_verify_synthetic(capsys):
    code, rep = run_json(capsys, "verify", "--config", SYN)
    assert code == 0 and rep["all_pass"]
    names = [r["name"] for r in rep["rows"]]
    assert "beta_identity_minus" in names and "beta_identity_plus" in names
    assert all(r["tolerance"] <= 1e-4 for r in rep["rows"] if r["name"].startswith("fit_"))


def test_verify_glacial(capsys):
    code, rep = run_json(capsys, "verify", "--config", S4)
    failing = [r["name"] for r in rep["rows"] if not r["pass"]]
    assert code == 0, f"failing rows: {failing}"


def test_forcing_rows(tmp_path, capsys):
    series = write_config(tmp_path, "t,e,beta\n0,0,0\n1,0.5,0\n", "orb.csv")
    assert main(["forcing", series]) == 0
    rows = list(csv.reader(capsys.readouterr().out.splitlines()))
    assert rows[0] == ["t", "Q", "s2"]
    assert [float(v) for v in rows[1]] == [0.0, 343.0, 0.625]
    assert float(rows[2][1]) == 343 / math.sqrt(0.75)


def test_forcing_large_file(tmp_path, capsys):
    lines = ["t,e,beta"] + [f"{i},{0.05 * (i % 7) / 7},{0.4 + 1e-5 * i}" for i in range(10000)]
    series = write_config(tmp_path, "\n".join(lines) + "\n", "orb.csv")
    out = tmp_path / "forcing.csv"
    assert main(["forcing", series, "-o", str(out)]) == 0
    with open(out) as fh:
        rows = list(csv.reader(fh))[1:]
    assert len(rows) == 10000
    t = [float(r[0]) for r in rows]
    assert all(b > a for a, b in zip(t, t[1:]))


def test_forcing_bad_series(tmp_path):
    series = write_config(tmp_path, "t,e,beta\n0,1.5,0\n", "orb.csv")
    assert main(["forcing", series]) == 2
    assert main(["forcing", str(tmp_path / "absent.csv")]) == 2


def test_json_nan_becomes_null():
    assert json.loads(cli.dumps({"a": math.nan, "b": [math.inf, 1.0]})) == {"a": None, "b": [None, 1.0]}


def test_usage_errors(capsys):
    assert main(["bogus"]) == 2
    assert main(["check", "--point", "1,2"]) == 2
    assert main(["check"]) == 2
