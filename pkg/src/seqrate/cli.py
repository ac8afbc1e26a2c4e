"""Command-line front end: configs in, CSV/YAML tables out.

Configs are flat YAML key/value files (arrays allowed); the full schema is
documented in docs/config_schema.md.  The bundled presets fig3, fig5a and
fig5b pin seeds so the headline tables regenerate with one command, e.g.
``seqrate bounds --config fig5a``.

Exit codes: 0 success, 2 config/usage error, 3 infeasible rates,
4 solver non-convergence, 5 statistical check failure.
"""

from __future__ import annotations

import csv
import io
import math
import re
import sys
from importlib import resources
from pathlib import Path

import click
import numpy as np
import yaml

from . import lattice as lattice_mod
from . import lqg as lqg_mod
from . import simulator as sim_mod
from . import waterfill as wf
from .model import (
    ControlModel,
    SourceModel,
    ValidationError,
    validate_control,
    validate_source,
)

EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_NONCONVERGENCE = 4
EXIT_STATFAIL = 5

PRESETS = ("fig3", "fig5a", "fig5b")

_SOURCE_KEYS = {"n", "p", "alpha", "sigma_w2", "sigma_x1_2", "seed"}
_LATTICE_KEYS = {"lattice", "lattice_p", "lattice_g", "prefix_term"}
_CONTROL_KEYS = {"beta", "Q", "N"}
_KEYS = {
    "waterfill": _SOURCE_KEYS | {"D_target", "eps"},
    "bounds": _SOURCE_KEYS | _LATTICE_KEYS | {"D_target", "eps"},
    "lqg": _SOURCE_KEYS | _LATTICE_KEYS | _CONTROL_KEYS | {"D_target", "eps"},
    "simulate": _SOURCE_KEYS | _LATTICE_KEYS | _CONTROL_KEYS
    | {"D_target", "eps", "mode", "task", "trials"},
    "sweep": {"alpha", "sigma_w2", "beta", "Q", "N", "sweep_param", "sweep_values",
              "sweep_start", "sweep_stop", "sweep_num", "sweep_scale"}
    | _LATTICE_KEYS,
}

MAX_GRID = 10**6


class ConfigError(ValueError):
    """The experiment config cannot be parsed or is inconsistent."""


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        if math.isnan(x):
            return ""
        return f"{x:.9g}"
    return str(x)


def load_config(ref: str) -> dict:
    """Read a config by path or bundled preset name."""
    path = Path(ref)
    if path.exists():
        text = path.read_text()
        name = str(path)
    elif ref in PRESETS:
        name = f"preset '{ref}'"
        text = resources.files("seqrate").joinpath(f"presets/{ref}.yaml").read_text()
    else:
        raise ConfigError(f"config {ref!r}: no such file and not a preset {PRESETS}")
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}" if mark is not None else ""
        raise ConfigError(f"{name}: YAML parse error{where}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{name}: config must be a key/value mapping")
    return data


def _check_keys(cfg: dict, command: str) -> None:
    unknown = sorted(set(cfg) - _KEYS[command])
    if unknown:
        raise ConfigError(
            f"unknown config key(s) for '{command}': {', '.join(repr(k) for k in unknown)}"
        )


def _require(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigError(f"missing required config key '{key}'")
    return cfg[key]


_GEN_RE = re.compile(r"^\s*uniform\(\s*([^,\s]+)\s*,\s*([^,\s)]+)\s*\)\s*$")


def _coefficients(value, n: int, name: str, seed) -> np.ndarray:
    """Expand a scalar, list, or 'uniform(lo,hi)' generator to length n."""
    if isinstance(value, str):
        m = _GEN_RE.match(value)
        if not m:
            raise ConfigError(f"key '{name}': unrecognized generator spec {value!r}")
        if seed is None:
            raise ConfigError(f"key '{name}': generator {value!r} needs a 'seed'")
        lo, hi = float(m.group(1)), float(m.group(2))
        return np.random.default_rng(int(seed)).uniform(lo, hi, n)
    if isinstance(value, (int, float)):
        return np.full(n, float(value))
    if isinstance(value, (list, tuple)):
        return np.asarray(value, dtype=np.float64)
    raise ConfigError(f"key '{name}': expected number, list, or generator string")


def _build_source(cfg: dict, seed_override) -> tuple[SourceModel, int | None]:
    n = int(_require(cfg, "n"))
    seed = seed_override if seed_override is not None else cfg.get("seed")
    model = SourceModel(
        n=n,
        p=int(cfg.get("p", 1)),
        alpha=_coefficients(_require(cfg, "alpha"), n, "alpha", seed),
        sigma_w2=_coefficients(_require(cfg, "sigma_w2"), n, "sigma_w2", seed),
        sigma_x1_2=float(_require(cfg, "sigma_x1_2")),
    )
    validate_source(model)
    return model, (None if seed is None else int(seed))


def _build_control(cfg: dict, model: SourceModel) -> ControlModel:
    cm = ControlModel(
        source=model,
        beta=_coefficients(_require(cfg, "beta"), model.n, "beta", None),
        Q=_coefficients(_require(cfg, "Q"), model.n, "Q", None),
        N=_coefficients(_require(cfg, "N"), model.n, "N", None),
    )
    validate_control(cm)
    return cm


def _build_lattices(cfg: dict, mode_override, no_prefix: bool):
    modes = mode_override if mode_override else cfg.get("lattice")
    if modes is None:
        raise ConfigError("missing required config key 'lattice'")
    if isinstance(modes, str):
        modes = [modes]
    specs = [
        lattice_mod.make_lattice(m, p=cfg.get("lattice_p"), g=cfg.get("lattice_g"))
        for m in modes
    ]
    prefix_term = bool(cfg.get("prefix_term", True)) and not no_prefix
    return specs, prefix_term


def _emit(out, header: list[str], rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    _write_text(out, buf.getvalue())


def _write_text(out, text: str) -> None:
    if out is None or out == "-":
        click.echo(text, nl=False)
    else:
        Path(out).write_text(text)


def _config_option(f):
    f = click.option("--config", "config_ref", required=True,
                     help="Config file path or preset name (fig3, fig5a, fig5b).")(f)
    f = click.option("--out", "out", default="-", show_default=True,
                     help="Output path, '-' for stdout.")(f)
    f = click.option("--seed", "seed", type=int, default=None,
                     help="Override the config seed.")(f)
    return f


def _lattice_options(f):
    f = click.option("--lattice", "lattice_override", default=None,
                     help="Override the config lattice mode.")(f)
    f = click.option("--no-prefix-term", "no_prefix", is_flag=True, default=False,
                     help="Drop the 1/p prefix-free coding term from the gap.")(f)
    return f


def _fail(exc: Exception, code: int):
    click.echo(f"error: {exc}", err=True)
    sys.exit(code)


def _guarded(fn):
    try:
        fn()
    except (ConfigError, ValidationError) as exc:
        _fail(exc, EXIT_CONFIG)
    except wf.InfeasibleRateError as exc:
        _fail(exc, EXIT_INFEASIBLE)
    except wf.NonConvergenceError as exc:
        _fail(exc, EXIT_NONCONVERGENCE)


@click.group()
def main():
    """Rate and cost bounds for quantized Gauss-Markov estimation and control."""


@main.command("waterfill")
@_config_option
def cmd_waterfill(config_ref, out, seed):
    """Solve the rate-distortion allocation and emit (t, lambda, D, R)."""

    def run():
        cfg = load_config(config_ref)
        _check_keys(cfg, "waterfill")
        model, _ = _build_source(cfg, seed)
        sched = wf.solve(model, float(_require(cfg, "D_target")),
                         eps=float(cfg.get("eps", wf.DEFAULT_EPS)))
        rows = [
            (t + 1, sched.lam[t], sched.D[t], sched.R[t]) for t in range(model.n)
        ]
        _emit(out, ["t", "lambda_t", "D_t", "R_t"], rows)

    _guarded(run)


@main.command("bounds")
@_config_option
@_lattice_options
def cmd_bounds(config_ref, out, seed, lattice_override, no_prefix):
    """Emit per-step rate lower bounds and per-lattice upper bounds."""

    def run():
        cfg = load_config(config_ref)
        _check_keys(cfg, "bounds")
        model, _ = _build_source(cfg, seed)
        sched = wf.solve(model, float(_require(cfg, "D_target")),
                         eps=float(cfg.get("eps", wf.DEFAULT_EPS)))
        specs, prefix_term = _build_lattices(cfg, lattice_override, no_prefix)
        uppers = [lattice_mod.upper_rates(sched, s, prefix_term=prefix_term) for s in specs]
        header = ["t", "R_lower"] + [f"R_upper_{s.mode}" for s in specs]
        rows = [
            tuple([t + 1, sched.R[t]] + [u[t] for u in uppers]) for t in range(model.n)
        ]
        gaps = [float(np.mean(u - sched.R)) for u in uppers]
        rows.append(tuple(["mean_gap", None] + gaps))
        _emit(out, header, rows)

    _guarded(run)


@main.command("lqg")
@_config_option
@_lattice_options
def cmd_lqg(config_ref, out, seed, lattice_override, no_prefix):
    """Emit the per-step Riccati/cost-bound table plus totals."""

    def run():
        cfg = load_config(config_ref)
        _check_keys(cfg, "lqg")
        model, _ = _build_source(cfg, seed)
        cm = _build_control(cfg, model)
        sched = wf.solve(model, float(_require(cfg, "D_target")),
                         eps=float(cfg.get("eps", wf.DEFAULT_EPS)))
        specs, prefix_term = _build_lattices(cfg, lattice_override, no_prefix)
        sol = lqg_mod.bound_table(cm, sched, specs[0], prefix_term=prefix_term)
        alpha = model.alpha
        header = ["t", "K_t", "L_t", "cost_lower", "cost_upper", "rate_cost", "rate_floor"]
        rows = []
        for t in range(model.n):
            floor = math.log2(abs(alpha[t])) if abs(alpha[t]) > 1.0 else 0.0
            rows.append((t + 1, sol.K[t], sol.L[t], sol.cost_lower[t],
                         sol.cost_upper[t], sol.rate_cost[t], floor))
        rows.append(("total", None, None, float(np.sum(sol.cost_lower)),
                     float(np.sum(sol.cost_upper)), None, None))
        _emit(out, header, rows)

    _guarded(run)


@main.command("simulate")
@_config_option
@click.option("--trials", "trials_override", type=int, default=None,
              help="Override the config trial count.")
def cmd_simulate(config_ref, out, seed, trials_override):
    """Run the Monte-Carlo validator and emit the report plus verdicts."""

    def run():
        cfg = load_config(config_ref)
        _check_keys(cfg, "simulate")
        model, used_seed = _build_source(cfg, seed)
        if used_seed is None:
            raise ConfigError("simulate requires a 'seed' (config key or --seed)")
        trials = trials_override if trials_override is not None else cfg.get("trials")
        if trials is None:
            raise ConfigError("missing required config key 'trials'")
        mode = cfg.get("mode", sim_mod.GAUSSIAN_MODE)
        task = cfg.get("task", "estimation")
        sched = wf.solve(model, float(_require(cfg, "D_target")),
                         eps=float(cfg.get("eps", wf.DEFAULT_EPS)))
        if task == "estimation":
            report = sim_mod.simulate_estimation(model, sched, mode, int(trials), used_seed)
            checks = sim_mod.statistical_checks(report, model, sched)
        elif task == "control":
            cm = _build_control(cfg, model)
            report = sim_mod.simulate_control(cm, sched, mode, int(trials), used_seed)
            checks = sim_mod.statistical_checks(report, model, sched, cm=cm)
        else:
            raise ConfigError(f"unknown task {task!r}; choose estimation or control")
        doc = {
            "report": report.to_dict(),
            "checks": {c.name: ("pass" if c.passed else "fail") for c in checks},
            "details": {c.name: c.detail for c in checks},
            "passed": all(c.passed for c in checks),
        }
        _write_text(out, yaml.safe_dump(doc, default_flow_style=None, sort_keys=True))
        if not doc["passed"]:
            sys.exit(EXIT_STATFAIL)

    _guarded(run)


@main.command("sweep")
@_config_option
@_lattice_options
def cmd_sweep(config_ref, out, seed, lattice_override, no_prefix):
    """Sweep steady-state bounds over a D or R grid (long-format CSV)."""

    def run():
        cfg = load_config(config_ref)
        _check_keys(cfg, "sweep")
        param = _require(cfg, "sweep_param")
        grid = _grid(cfg)
        if len(grid) > MAX_GRID:
            raise ConfigError(f"grid of {len(grid)} points exceeds the cap {MAX_GRID}")
        specs, prefix_term = ([], True)
        if lattice_override or cfg.get("lattice"):
            specs, prefix_term = _build_lattices(cfg, lattice_override, no_prefix)
        alpha = float(_require(cfg, "alpha"))
        sw2 = float(_require(cfg, "sigma_w2"))
        if param == "D":
            header = ["D", "R_lower"] + [f"R_upper_{s.mode}" for s in specs]
            rows = []
            for d in grid:
                row = [d, wf.steady_state_rate(alpha, sw2, d)]
                row += [lattice_mod.steady_upper(alpha, sw2, d, s, prefix_term=prefix_term)
                        for s in specs]
                rows.append(tuple(row))
        elif param == "R":
            beta = float(_require(cfg, "beta"))
            Q = float(_require(cfg, "Q"))
            N = float(_require(cfg, "N"))
            spec = specs[0] if specs else None
            header = ["R", "K_inf", "L_inf", "cost_lower", "cost_upper"]
            cm = ControlModel(
                source=SourceModel(n=2, p=1, alpha=[alpha, alpha],
                                   sigma_w2=[sw2, sw2], sigma_x1_2=sw2),
                beta=[beta, beta], Q=[Q, Q], N=[N, N],
            )
            rows = []
            for r in grid:
                res = lqg_mod.steady_state_lqg(cm, float(r), spec)
                rows.append((r, res.K_inf, res.L_inf, res.cost_lower_inf,
                             res.cost_upper_inf))
        else:
            raise ConfigError(f"sweep_param must be 'D' or 'R', got {param!r}")
        _emit(out, header, rows)

    _guarded(run)


def _grid(cfg: dict) -> list[float]:
    if "sweep_values" in cfg:
        values = cfg["sweep_values"]
        if not isinstance(values, (list, tuple)):
            raise ConfigError("sweep_values must be a list")
        return [float(v) for v in values]
    if {"sweep_start", "sweep_stop", "sweep_num"} <= set(cfg):
        num = int(cfg["sweep_num"])
        if num < 0:
            raise ConfigError("sweep_num must be >= 0")
        scale = cfg.get("sweep_scale", "linear")
        if scale == "linear":
            return list(np.linspace(float(cfg["sweep_start"]), float(cfg["sweep_stop"]), num))
        if scale == "log":
            return list(np.geomspace(float(cfg["sweep_start"]), float(cfg["sweep_stop"]), num))
        raise ConfigError(f"sweep_scale must be linear or log, got {scale!r}")
    raise ConfigError("sweep needs either sweep_values or sweep_start/stop/num")


if __name__ == "__main__":
    main()
