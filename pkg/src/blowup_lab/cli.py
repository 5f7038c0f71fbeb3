"""Command line entry point: ``blowup-lab <subcommand> --config <path> [--out <dir>]``.

Configs are flat UTF-8 ``key = value`` files; ``#`` starts a comment.
Exit codes: 0 success, 2 configuration error, 3 numerical invariant
violation.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import fence
from .core import INF, Grid1D, NumericalInvariantError, ScalarField, norm_lp
from .model import DecayRequiredError, Potential, select_parameters
from .plots import line_plot_svg
from .solver import Delta, SimConfig, boundary_decay_check, solve_linearized, solve_nonlinear

log = logging.getLogger("blowup_lab")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
EXPERIMENTS = ("simulate", "linearize", "certify", "fence", "sweep", "demo-instability", "demo-stability")


class ConfigError(ValueError):
    pass


def _floats(text):
    out = []
    for tok in text.replace(";", ",").split(","):
        tok = tok.strip()
        if not tok:
            continue
        out.append(INF if tok.lower() in ("inf", "infinity") else float(tok))
    return out


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# key -> (parser, default)
SCHEMA = {
    "experiment": (str, "simulate"),
    "potential": (str, "gaussian_bump"),
    "potential_amplitude": (float, 0.05),
    "potential_width": (float, 1.0),
    "initial": (str, "gaussian"),
    "initial_amplitude": (float, -0.4),
    "initial_center": (float, 15.0),
    "initial_width": (float, 0.6),
    "delta_center": (float, 0.0),
    "epsilon": (float, 0.5),
    "K": (float, 2.0),
    "x_min": (float, -45.0),
    "x_max": (float, 75.0),
    "dx": (float, 0.05),
    "t_end": (float, 200.0),
    "dt_init": (float, 0.01),
    "dt_min": (float, 1e-12),
    "boundary": (str, "neumann"),
    "degree": (float, 2.0),
    "blowup_threshold": (float, 1e6),
    "snapshot_stride": (int, 100),
    "max_diffusion_number": (float, 1.0),
    "norms": (_floats, [1.0, 2.0, INF]),
    "fence_times": (_floats, [1.0, 2.0, 5.0, 10.0]),
    "sweep_amplitudes": (_floats, [0.0, -0.3]),
    "sweep_centers": (_floats, [0.0, 15.0]),
    "workers": (int, 1),
    "plot": (_bool, True),
    "out_dir": (str, ""),
}

DEMO_DEFAULTS = {
    "demo-instability": {
        "potential": "gaussian_bump",
        "potential_amplitude": 0.05,
        "potential_width": 1.0,
        "initial": "gaussian",
        "initial_amplitude": -0.4,
        "initial_center": 15.0,
        "initial_width": 0.6,
        "epsilon": 0.5,
        "x_min": -45.0,
        "x_max": 75.0,
        "dx": 0.05,
        "t_end": 200.0,
    },
    "demo-stability": {
        "potential": "constant",
        "potential_amplitude": 0.05,
        "initial": "gaussian",
        "initial_amplitude": -0.01,
        "initial_center": 0.0,
        "initial_width": 1.0,
        "x_min": -30.0,
        "x_max": 30.0,
        "dx": 0.1,
        "t_end": 200.0,
    },
}


def parse_config_text(text: str) -> dict:
    """Raw ``key -> string`` mapping; rejects malformed lines and unknown keys."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value
    return raw


def build_config(raw: dict, experiment: str | None = None) -> dict:
    """Typed, validated config with defaults filled in."""
    kind = experiment or raw.get("experiment", SCHEMA["experiment"][1])
    if "experiment" in raw and experiment and raw["experiment"] != experiment:
        raise ConfigError(f"config names experiment {raw['experiment']!r}, command is {experiment!r}")
    if kind not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {kind!r}; choose from {EXPERIMENTS}")
    cfg = {k: default for k, (_, default) in SCHEMA.items()}
    cfg.update(DEMO_DEFAULTS.get(kind, {}))
    for key, value in raw.items():
        parser = SCHEMA[key][0]
        try:
            cfg[key] = parser(value) if isinstance(value, str) else value
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}") from None
    cfg["experiment"] = kind
    _validate(cfg)
    return cfg


def _validate(cfg):
    bad = [p for p in cfg["norms"] if not p >= 1]
    if bad:
        raise ConfigError(f"norms: exponent(s) {bad} violate p >= 1")
    if cfg["potential"] not in ("gaussian_bump", "constant", "zero"):
        raise ConfigError(f"potential: unknown kind {cfg['potential']!r}")
    if cfg["initial"] not in ("gaussian", "constant", "delta", "selected"):
        raise ConfigError(f"initial: unknown kind {cfg['initial']!r}")
    if not cfg["dx"] > 0:
        raise ConfigError("dx must be positive")
    if not cfg["initial_width"] > 0:
        raise ConfigError("initial_width must be positive")
    if cfg["workers"] < 1:
        raise ConfigError("workers must be >= 1")
    if not cfg["epsilon"] > 0:
        raise ConfigError("epsilon must be positive")
    if not cfg["K"] > 1:
        raise ConfigError("K must exceed 1")
    if any(t <= 0 for t in cfg["fence_times"]):
        raise ConfigError("fence_times must be positive")
    try:
        make_potential(cfg)
        make_sim_config(cfg)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path, experiment=None) -> dict:
    """Read a ``key = value`` file or re-use the config echo of a run record."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if path.suffix == ".json":
        try:
            echo = json.loads(text)["config"]
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"{path} is not a run record: {exc}") from None
        raw = {k: _echo_to_text(v) for k, v in echo.items() if k != "out_dir"}
        return build_config(parse_config_text("\n".join(f"{k} = {v}" for k, v in raw.items())), experiment)
    return build_config(parse_config_text(text), experiment)


def _echo_to_text(v):
    if isinstance(v, list):
        return ", ".join(_echo_to_text(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def make_potential(cfg) -> Potential:
    kind = cfg["potential"]
    if kind == "gaussian_bump":
        return Potential.gaussian_bump(cfg["potential_amplitude"], cfg["potential_width"])
    if kind == "constant":
        return Potential.constant(cfg["potential_amplitude"])
    return Potential.zero()


def make_grid(cfg) -> Grid1D:
    return Grid1D.from_spacing(cfg["x_min"], cfg["x_max"], cfg["dx"])


def make_sim_config(cfg) -> SimConfig:
    return SimConfig(
        grid=make_grid(cfg),
        t_end=cfg["t_end"],
        dt_init=cfg["dt_init"],
        dt_min=cfg["dt_min"],
        boundary=cfg["boundary"],
        degree=cfg["degree"],
        blowup_threshold=cfg["blowup_threshold"],
        snapshot_stride=cfg["snapshot_stride"],
        max_diffusion_number=cfg["max_diffusion_number"],
    )


def make_initial(cfg, grid: Grid1D) -> ScalarField:
    kind = cfg["initial"]
    x = grid.x
    if kind == "gaussian":
        return ScalarField(grid, cfg["initial_amplitude"] * np.exp(-(((x - cfg["initial_center"]) / cfg["initial_width"]) ** 2)))
    if kind == "constant":
        return ScalarField(grid, np.full(grid.n_points, cfg["initial_amplitude"]))
    if kind == "selected":
        params = select_parameters(cfg["epsilon"], cfg["K"], make_potential(cfg))
        return params.initial_condition.to_field(grid)
    raise ConfigError("initial = delta is only valid for linearized runs")


def _num(v):
    if v is None:
        return None
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def _p_key(p):
    return "inf" if p == INF else f"{p:g}"


def write_series_csv(path: Path, traj):
    with path.open("w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t", "norm_inf", "norm_1"])
        for t, a, b in zip(traj.times, traj.norm_inf.values, traj.norm_1.values):
            wr.writerow([f"{t:.17g}", f"{a:.17g}", f"{b:.17g}"])


def _norm_plot(path: Path, traj, title):
    svg = line_plot_svg(
        {"|u|_inf": (traj.times, traj.norm_inf.values), "|u|_1": (traj.times, traj.norm_1.values)},
        title=title,
        ylabel="log10 norm",
        logy=True,
    )
    path.write_text(svg, encoding="utf-8")


def _config_echo(cfg):
    return {k: ([_num(x) for x in v] if isinstance(v, list) else (_num(v) if isinstance(v, float) else v)) for k, v in cfg.items()}


# ---------------------------------------------------------------- experiments


def _run_simulate(cfg, out: Path, record: dict):
    sim = make_sim_config(cfg)
    f = make_potential(cfg)
    h = make_initial(cfg, sim.grid)
    record["initial_norms"] = {_p_key(p): norm_lp(h, p) for p in cfg["norms"]}
    if cfg["experiment"] == "demo-instability":
        too_big = {k: v for k, v in record["initial_norms"].items() if not v < cfg["epsilon"]}
        if too_big:
            raise ConfigError(f"initial norms {too_big} are not below epsilon={cfg['epsilon']}")
    traj, report = solve_nonlinear(f, h, sim)
    record["blowup"] = {k: _num(v) if not isinstance(v, str) else v for k, v in asdict(report).items()}
    record["final_norms"] = {_p_key(p): norm_lp(traj.final, p) for p in cfg["norms"]}
    if np.all(h.values <= 0):
        record["sign_preserved"] = bool(traj.values.max() <= 1e-10)
    return traj


def _run_linearize(cfg, out: Path, record: dict):
    sim = make_sim_config(cfg)
    f = make_potential(cfg)
    if cfg["initial"] == "delta":
        w0 = Delta(cfg["delta_center"])
    else:
        w0 = make_initial(cfg, sim.grid)
        if np.all(w0.values <= 0):
            w0 = -w0
    traj = solve_linearized(f, w0, sim)
    record["min_value"] = float(traj.values.min())
    record["mass_initial"] = float(traj.norm_1.values[0])
    record["mass_final"] = float(traj.norm_1.values[-1])
    record["boundary_decay_ok"] = boundary_decay_check(traj, 1e-8)
    return traj


def _run_certify(cfg, out: Path, record: dict):
    f = make_potential(cfg)
    params = select_parameters(cfg["epsilon"], cfg["K"], f)
    cert = fence.certificate_A(params)
    record["params"] = {k: _num(v) for k, v in asdict(params).items()}
    record["params"]["t_window"] = params.t_window
    record["certificate"] = {
        "t0": cert.t0,
        "A_max": cert.A_max,
        "asym_value": cert.asym_value,
        "asym_corrected": cert.asym_corrected,
        "within_window": cert.within_window,
        "passes": cert.passes,
    }
    checks = []
    for frac in (1e-3, 1e-2, 1e-1):
        r = fence.kernel_tail_bound(f, params, frac * params.t_window)
        checks.append({"t": r.t, "lhs": r.lhs, "rhs": r.rhs, "satisfied": r.satisfied})
    record["kernel_tail_checks"] = checks
    if cfg["plot"]:
        ts = np.linspace(0.0, params.t_window, 801)
        svg = line_plot_svg({"A(t)": (ts, fence.certificate_curve(params, ts)), "1": (ts, np.ones_like(ts))},
                            title="certificate A(t)", ylabel="A")
        (out / "certificate.svg").write_text(svg, encoding="utf-8")
        record["artifacts"].append("certificate.svg")
    return None


def _run_fence(cfg, out: Path, record: dict):
    sim = make_sim_config(cfg)
    f = make_potential(cfg)
    h = make_initial(cfg, sim.grid)
    if np.any(h.values > 0):
        raise ConfigError("fence experiment needs initial data h <= 0")
    traj, report = solve_nonlinear(f, h, sim)
    w = solve_linearized(f, Delta(cfg["delta_center"]), sim)
    record["blowup"] = {k: _num(v) if not isinstance(v, str) else v for k, v in asdict(report).items()}
    reached = report.final_time_reached if report.blew_up else sim.t_end
    rows = []
    for t in cfg["fence_times"]:
        if t > min(reached, w.times[-1]):
            continue
        r = fence.fence_check(w, h, t)
        rows.append({"t": r.t, "lhs": r.lhs, "rhs": float(r.rhs), "satisfied": r.satisfied})
    record["fence"] = rows
    return traj


def _sweep_cell(args):
    cfg, amp, centre = args
    cell = dict(cfg, initial="gaussian", initial_amplitude=amp, initial_center=centre)
    try:
        _, report = solve_nonlinear(make_potential(cell), make_initial(cell, make_grid(cell)), make_sim_config(cell))
    except (NumericalInvariantError, ValueError) as exc:
        return {"amplitude": amp, "center": centre, "blew_up": "", "T_est": "", "final_time": "", "status": f"error: {exc}"}
    return {
        "amplitude": amp,
        "center": centre,
        "blew_up": report.blew_up,
        "T_est": report.T_est,
        "final_time": report.final_time_reached,
        "status": "ok",
    }


SWEEP_HEADER = ["amplitude", "center", "blew_up", "T_est", "final_time", "status"]


def run_sweep(cfg) -> list[dict]:
    cells = [(cfg, a, c) for a in cfg["sweep_amplitudes"] for c in cfg["sweep_centers"]]
    if cfg["workers"] > 1:
        with ProcessPoolExecutor(max_workers=cfg["workers"]) as pool:
            return list(pool.map(_sweep_cell, cells))
    return [_sweep_cell(c) for c in cells]


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.17g}"
    if v is None:
        return ""
    return str(v)


def write_sweep_csv(path: Path, rows):
    with path.open("w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh)
        wr.writerow(SWEEP_HEADER)
        for row in rows:
            wr.writerow([_fmt(row[k]) for k in SWEEP_HEADER])


def _run_sweep(cfg, out: Path, record: dict):
    rows = run_sweep(cfg)
    write_sweep_csv(out / "sweep.csv", rows)
    record["artifacts"].append("sweep.csv")
    record["sweep"] = [{k: _num(v) if isinstance(v, float) else v for k, v in r.items()} for r in rows]
    if rows and all(r["status"] != "ok" for r in rows):
        raise NumericalInvariantError("every sweep cell failed")
    return None


RUNNERS = {
    "simulate": _run_simulate,
    "demo-instability": _run_simulate,
    "demo-stability": _run_simulate,
    "linearize": _run_linearize,
    "certify": _run_certify,
    "fence": _run_fence,
    "sweep": _run_sweep,
}


def execute(cfg: dict, out_dir=None) -> dict:
    """Run one experiment, write its artifacts, and return the run record."""
    out = Path(out_dir or cfg["out_dir"] or Path("runs") / cfg["experiment"])
    out.mkdir(parents=True, exist_ok=True)
    record = {"experiment": cfg["experiment"], "config": _config_echo(cfg), "artifacts": []}
    start = time.perf_counter()
    traj = RUNNERS[cfg["experiment"]](cfg, out, record)
    if traj is not None:
        write_series_csv(out / "norms.csv", traj)
        record["artifacts"].append("norms.csv")
        record["norm_series"] = {
            "t": traj.times.tolist(),
            "norm_inf": traj.norm_inf.values.tolist(),
            "norm_1": traj.norm_1.values.tolist(),
        }
        if cfg["plot"]:
            _norm_plot(out / "norms.svg", traj, f"{cfg['experiment']}: norms vs time")
            record["artifacts"].append("norms.svg")
    record["wall_clock_s"] = time.perf_counter() - start
    record["artifacts"].append("record.json")
    (out / "record.json").write_text(json.dumps(record, indent=2, allow_nan=False), encoding="utf-8")
    return record


def run(config_path, experiment=None, out_dir=None) -> tuple[int, dict | None]:
    """Load, execute and persist; returns ``(exit_code, record)``."""
    try:
        if config_path is None:
            if experiment not in DEMO_DEFAULTS:
                raise ConfigError(f"{experiment} needs --config")
            cfg = build_config({}, experiment)
        else:
            cfg = load_config(config_path, experiment)
        return EXIT_OK, execute(cfg, out_dir)
    except (ConfigError, DecayRequiredError) as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG, None
    except NumericalInvariantError as exc:
        log.error("numerical invariant violated: %s", exc)
        return EXIT_NUMERIC, None


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="blowup-lab", description=__doc__.splitlines()[0])
    parser.add_argument("subcommand", choices=("run",) + EXPERIMENTS)
    parser.add_argument("--config", help="key = value config file, or a record.json to re-run")
    parser.add_argument("--out", help="output directory (default runs/<experiment>)")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    experiment = None if args.subcommand == "run" else args.subcommand
    if args.subcommand == "run" and not args.config:
        parser.error("run needs --config")
    code, record = run(args.config, experiment, args.out)
    if record is not None:
        summary = record.get("blowup") or record.get("certificate") or {}
        print(json.dumps({"experiment": record["experiment"], **summary}))
    return code


if __name__ == "__main__":
    sys.exit(main())
