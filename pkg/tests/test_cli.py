import csv
import json

import numpy as np
import pytest

from blowup_lab import cli
from blowup_lab.core import NumericalInvariantError

SWEEP_FLIP = """\
experiment = sweep
potential = gaussian_bump
potential_amplitude = 0.5
potential_width = 4
initial_width = 0.6
x_min = -40
x_max = 60
dx = 0.1
t_end = 60
plot = false
"""


def write(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


# ---------------------------------------------------------------- parsing


def test_parse_comments_and_blank_lines():
    raw = cli.parse_config_text("# header\n\n dx = 0.1  # spacing\nt_end=5\n")
    assert raw == {"dx": "0.1", "t_end": "5"}


@pytest.mark.parametrize("text", ["bogus = 1", "dx 0.1", "dx = 1\ndx = 2"])
def test_parse_rejects_bad_lines(text):
    with pytest.raises(cli.ConfigError):
        cli.parse_config_text(text)


def test_build_config_types_and_defaults():
    cfg = cli.build_config(cli.parse_config_text("norms = 1, 3, inf\nworkers = 2"), "simulate")
    assert cfg["norms"] == [1.0, 3.0, float("inf")]
    assert cfg["workers"] == 2
    assert cfg["boundary"] == "neumann"


@pytest.mark.parametrize(
    "text",
    ["norms = 0.5", "dx = -1", "K = 1", "epsilon = 0", "boundary = periodic", "initial = square", "dx = abc"],
)
def test_build_config_rejects(text):
    with pytest.raises(cli.ConfigError):
        cli.build_config(cli.parse_config_text(text), "simulate")


def test_experiment_mismatch_rejected():
    with pytest.raises(cli.ConfigError):
        cli.build_config({"experiment": "certify"}, "sweep")


# ---------------------------------------------------------------- exit codes


def test_demo_instability_blows_up(tmp_path):
    code, rec = cli.run(None, "demo-instability", tmp_path)
    assert code == 0
    assert rec["blowup"]["blew_up"] is True
    assert rec["sign_preserved"]
    assert all(v < 0.5 for v in rec["initial_norms"].values())
    for name in ("norms.csv", "norms.svg", "record.json"):
        assert (tmp_path / name).exists()


@pytest.mark.slow
def test_demo_stability_decays(tmp_path):
    code, rec = cli.run(None, "demo-stability", tmp_path)
    assert code == 0
    assert rec["blowup"]["blew_up"] is False
    assert rec["final_norms"]["inf"] < 1e-6


def test_p_half_exit_2(tmp_path):
    assert cli.run(write(tmp_path, "norms = 0.5, 2"), "simulate", tmp_path / "o")[0] == 2


def test_unknown_key_exit_2(tmp_path):
    assert cli.run(write(tmp_path, "colour = red"), "simulate", tmp_path / "o")[0] == 2


def test_missing_file_exit_2(tmp_path):
    assert cli.run(tmp_path / "nope.cfg", "simulate", tmp_path / "o")[0] == 2


def test_decay_required_exit_2(tmp_path):
    cfg = write(tmp_path, "potential = constant\npotential_amplitude = 0.05\nepsilon = 0.5")
    assert cli.run(cfg, "certify", tmp_path / "o")[0] == 2


def test_numerical_violation_exit_3(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise NumericalInvariantError("non-finite value")

    monkeypatch.setattr(cli, "solve_nonlinear", boom)
    assert cli.run(write(tmp_path, "t_end = 1"), "simulate", tmp_path / "o")[0] == 3


def test_main_prints_summary(tmp_path, capsys):
    cfg = write(tmp_path, "experiment = certify\nepsilon = 0.1\nplot = false")
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["experiment"] == "certify" and out["passes"] is True


def test_main_run_requires_config():
    with pytest.raises(SystemExit):
        cli.main(["run"])


# ---------------------------------------------------------------- records and csv


SMALL = "potential_amplitude = 0.05\ninitial_amplitude = -0.3\ninitial_center = 0\nx_min = -20\nx_max = 20\ndx = 0.1\nt_end = 5\nsnapshot_stride = 10\n"


def test_norms_csv_schema(tmp_path):
    code, rec = cli.run(write(tmp_path, SMALL), "simulate", tmp_path / "o")
    rows = read_rows(tmp_path / "o" / "norms.csv")
    assert rows[0] == ["t", "norm_inf", "norm_1"]
    assert len(rows) - 1 == len(rec["norm_series"]["t"])
    for row in rows[1:]:
        for cell in row:
            assert float(repr(float(cell))) == float(cell)
    # 17 significant digits round-trip every double exactly
    assert [float(r[1]) for r in rows[1:]] == rec["norm_series"]["norm_inf"]


def test_record_rerun_is_bitwise(tmp_path):
    cli.run(write(tmp_path, SMALL), "simulate", tmp_path / "a")
    code, rec2 = cli.run(tmp_path / "a" / "record.json", "simulate", tmp_path / "b")
    assert code == 0
    rec1 = json.loads((tmp_path / "a" / "record.json").read_text())
    assert rec1["norm_series"] == rec2["norm_series"]
    assert (tmp_path / "a" / "norms.csv").read_bytes() == (tmp_path / "b" / "norms.csv").read_bytes()
    assert rec1["config"] == json.loads(json.dumps(rec2["config"]))


def test_record_is_strict_json(tmp_path):
    cli.run(write(tmp_path, SMALL), "simulate", tmp_path / "o")
    json.loads((tmp_path / "o" / "record.json").read_text(), parse_constant=lambda c: pytest.fail(c))


def test_linearize_delta(tmp_path):
    cfg = write(tmp_path, "initial = delta\ndelta_center = 0\nx_min = -15\nx_max = 15\ndx = 0.05\nt_end = 2\nsnapshot_stride = 20")
    code, rec = cli.run(cfg, "linearize", tmp_path / "o")
    assert code == 0
    assert rec["min_value"] >= -1e-10
    assert rec["mass_final"] <= rec["mass_initial"] + 1e-8 <= 1 + 1e-6
    assert rec["boundary_decay_ok"]


def test_certify_record(tmp_path):
    code, rec = cli.run(write(tmp_path, "epsilon = 0.1\nK = 2"), "certify", tmp_path / "o")
    assert code == 0
    c = rec["certificate"]
    assert c["passes"] and c["within_window"] and c["A_max"] > 1
    assert all(r["satisfied"] for r in rec["kernel_tail_checks"])
    assert (tmp_path / "o" / "certificate.svg").exists()


def test_fence_experiment(tmp_path):
    cfg = write(
        tmp_path,
        "potential = constant\npotential_amplitude = 0.05\ninitial_amplitude = -0.01\ninitial_center = 0\n"
        "initial_width = 1\nx_min = -30\nx_max = 30\ndx = 0.1\nt_end = 20\nfence_times = 1, 5, 10, 20\n",
    )
    code, rec = cli.run(cfg, "fence", tmp_path / "o")
    assert code == 0
    assert len(rec["fence"]) == 4
    assert all(r["satisfied"] for r in rec["fence"])


def test_fence_rejects_positive_data(tmp_path):
    assert cli.run(write(tmp_path, "initial_amplitude = 0.1\nt_end = 1"), "fence", tmp_path / "o")[0] == 2


# ---------------------------------------------------------------- sweep


def test_sweep_1x1_matches_simulate(tmp_path):
    body = SMALL + "sweep_amplitudes = -0.3\nsweep_centers = 0\n"
    code, rec = cli.run(write(tmp_path, body), "sweep", tmp_path / "s")
    assert code == 0
    _, sim = cli.run(write(tmp_path, SMALL, "sim.cfg"), "simulate", tmp_path / "m")
    row = rec["sweep"][0]
    assert row["blew_up"] == sim["blowup"]["blew_up"]
    assert row["T_est"] == sim["blowup"]["T_est"]
    assert row["final_time"] == sim["blowup"]["final_time_reached"]


def test_sweep_zero_amplitude_is_stable(tmp_path):
    body = SMALL + "sweep_amplitudes = 0\nsweep_centers = 0, 5\n"
    code, rec = cli.run(write(tmp_path, body), "sweep", tmp_path / "s")
    assert code == 0
    assert [r["blew_up"] for r in rec["sweep"]] == [False, False]
    rows = read_rows(tmp_path / "s" / "sweep.csv")
    assert rows[0] == cli.SWEEP_HEADER
    assert [r[2] for r in rows[1:]] == ["false", "false"]


def test_sweep_partial_failure_recorded(tmp_path, monkeypatch):
    real = cli.solve_nonlinear

    def flaky(f, h, sim, *a, **k):
        if h.values.min() < -0.2:
            raise NumericalInvariantError("forced")
        return real(f, h, sim, *a, **k)

    monkeypatch.setattr(cli, "solve_nonlinear", flaky)
    body = SMALL + "sweep_amplitudes = 0, -0.3\nsweep_centers = 0\n"
    code, rec = cli.run(write(tmp_path, body), "sweep", tmp_path / "s")
    assert code == 0
    assert rec["sweep"][0]["status"] == "ok"
    assert rec["sweep"][1]["status"].startswith("error")
    body = SMALL + "sweep_amplitudes = -0.3\nsweep_centers = 0\n"
    assert cli.run(write(tmp_path, body, "b.cfg"), "sweep", tmp_path / "t")[0] == 3


@pytest.mark.slow
def test_sweep_flips_when_centre_moves_out(tmp_path):
    body = SWEEP_FLIP + "sweep_amplitudes = -0.4\nsweep_centers = 0, 4, 8, 12, 16, 20\nworkers = 2\n"
    code, rec = cli.run(write(tmp_path, body), "sweep", tmp_path / "s")
    assert code == 0
    flags = [r["blew_up"] for r in rec["sweep"]]
    assert flags[0] is False and flags[-1] is True
    # single threshold along the centre axis
    first = flags.index(True)
    assert all(flags[first:]) and not any(flags[:first])


def test_sweep_order_independent_of_workers(tmp_path):
    body = SMALL + "sweep_amplitudes = 0, -0.2, -0.3\nsweep_centers = 0, 3\n"
    cli.run(write(tmp_path, body), "sweep", tmp_path / "one")
    cli.run(write(tmp_path, body + "workers = 3\n", "par.cfg"), "sweep", tmp_path / "many")
    assert (tmp_path / "one" / "sweep.csv").read_bytes() == (tmp_path / "many" / "sweep.csv").read_bytes()
