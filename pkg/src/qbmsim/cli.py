"""Config-driven experiment runner.

A TOML config names the reservoir, the run window, the initial state and
the output targets; each subcommand turns one config into CSV series, a
JSON summary with a provenance block, and optionally a gnuplot script.
Output files carry no timestamps and use fixed float formatting, so
rerunning an identical config byte-reproduces every artifact.

Exit codes: 0 success, 1 config validation, 2 numerical failure inside a
module, 3 regime refusal.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import platform
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import scipy
from scipy.integrate import cumulative_trapezoid

try:
    import tomllib
except ModuleNotFoundError:  # python 3.10
    import tomli as tomllib

from . import __version__
from .coefficients import (CoefficientTable, build_coefficient_table,
                           classify_regime, rwa_rates, stationary_rates)
from .errors import ConfigError, QbmsimError, RegimeError
from .fock import (audits_to_csv, choose_truncation, coherent_amplitudes,
                   coherent_density, fock_density, heating_function,
                   integrate_secular, thermal_density, vacuum_density)
from .gaussian_qcf import (GaussianQcfState, build_propagator_bundle,
                           coherent_state, propagate_secular,
                           propagate_series, secular_observable_check,
                           series_to_csv, thermal_state, vacuum_state)
from .mcwf import fock_vector, run_ensemble, run_trajectory, vacuum_vector
from .spectral import ReservoirSpec, thermal_occupation

EXPERIMENTS = ("coefficients", "heating", "qcf", "mcwf", "regimes",
               "rwa-compare")
HEATING_CSV_HEADER = "t,n_mean"
RWA_CSV_HEADER = "t,n_secular,n_rwa,ratio"
REGIMES_CSV_HEADER = "r,classification,first_violation_time,min_rate"
JUMPS_CSV_HEADER = "trajectory,seed,t,channel"
THREADS_ENV = "QBMSIM_THREADS"

_UNITS = ("rad_s", "hz")
_STATE_KINDS = ("vacuum", "coherent", "fock", "thermal", "gaussian")
_GAUSSIAN_KINDS = ("vacuum", "coherent", "thermal", "gaussian")
_PURE_KINDS = ("vacuum", "coherent", "fock")
_FORMATS = ("csv", "gnuplot")
_DEFAULT_R_SWEEP = (0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0)


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated run description; frequencies already in rad/s."""

    experiment: str
    spec: ReservoirSpec
    t_max: float
    n_steps: int
    n_output: int
    truncation: Optional[int]
    solver: str
    variant: str
    r_values: tuple
    state_kind: str
    state_params: dict
    n_traj: int
    master_seed: int
    step_safety: float
    jump_log: int
    out_dir: Optional[Path]
    formats: tuple
    threads: int
    config_sha256: str


# ---------------------------------------------------------------------------
# config loading
# ---------------------------------------------------------------------------


def _num(section, key, bad, *, minimum=None, strict=False, integer=False):
    """Pull one numeric field, recording a violation on any mismatch."""
    v = section.get(key)
    if v is None:
        return None
    label = f"{section['__name__']}.{key}"
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        bad.append(f"{label}: expected a number, got {v!r}")
        return None
    if integer and not isinstance(v, int):
        bad.append(f"{label}: expected an integer, got {v!r}")
        return None
    if minimum is not None and (v < minimum or (strict and v == minimum)):
        op = ">" if strict else ">="
        bad.append(f"{label}: must be {op} {minimum}")
        return None
    return v


def _require(section, key, bad):
    if key not in section:
        bad.append(f"{section['__name__']}.{key}: required field missing")
        return False
    return True


def _check_known(section, allowed, bad):
    for key in section:
        if key != "__name__" and key not in allowed:
            bad.append(f"{section['__name__']}.{key}: unknown field")


def _validate_state(raw: dict, bad) -> tuple:
    sec = dict(raw)
    sec["__name__"] = "initial_state"
    kind = sec.get("kind", "vacuum")
    if kind not in _STATE_KINDS:
        bad.append(f"initial_state.kind: {kind!r} not one of {_STATE_KINDS}")
        return "vacuum", {}
    params: dict = {}
    if kind == "coherent":
        _check_known(sec, ("kind", "mean_x", "mean_p"), bad)
        for key in ("mean_x", "mean_p"):
            if _require(sec, key, bad):
                v = _num(sec, key, bad)
                if v is not None:
                    params[key] = float(v)
    elif kind == "fock":
        _check_known(sec, ("kind", "k"), bad)
        if _require(sec, "k", bad):
            v = _num(sec, "k", bad, minimum=0, integer=True)
            if v is not None:
                params["k"] = v
    elif kind == "thermal":
        _check_known(sec, ("kind", "nbar"), bad)
        if _require(sec, "nbar", bad):
            v = _num(sec, "nbar", bad, minimum=0.0)
            if v is not None:
                params["nbar"] = float(v)
    elif kind == "gaussian":
        _check_known(sec, ("kind", "mean", "cov"), bad)
        ok = _require(sec, "mean", bad) and _require(sec, "cov", bad)
        if ok:
            try:
                mean = np.asarray(sec["mean"], dtype=float)
                cov = np.asarray(sec["cov"], dtype=float)
                GaussianQcfState(mean=mean, cov=cov)
            except (ValueError, TypeError) as exc:
                bad.append(f"initial_state.mean/cov: {exc}")
            else:
                params["mean"] = mean
                params["cov"] = cov
    else:
        _check_known(sec, ("kind",), bad)
    return kind, params


def load_config(path: Path, experiment: str,
                out_override: Optional[Path] = None,
                threads: int = 1) -> ExperimentConfig:
    """Parse and fully validate a TOML config for one experiment.

    Every violation is collected before raising, so a single run reports
    all field problems at once.
    """
    try:
        raw_bytes = Path(path).read_bytes()
    except OSError as exc:
        raise ConfigError([f"config: cannot read {path}: {exc}"])
    sha = hashlib.sha256(raw_bytes).hexdigest()
    try:
        doc = tomllib.loads(raw_bytes.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError([f"config: parse failure: {exc}"])

    bad: list = []
    for name in doc:
        if name not in ("reservoir", "run", "initial_state", "mcwf",
                        "output"):
            bad.append(f"{name}: unknown section")

    res = dict(doc.get("reservoir", {}))
    res["__name__"] = "reservoir"
    if "reservoir" not in doc:
        bad.append("reservoir: required section missing")
    _check_known(res, ("omega0", "alpha", "omega_c", "r", "temperature",
                       "units"), bad)
    units = res.get("units")
    if units is None:
        bad.append("reservoir.units: required field missing "
                   f"(one of {_UNITS})")
    elif units not in _UNITS:
        bad.append(f"reservoir.units: {units!r} not one of {_UNITS}")
        units = None
    omega0 = _num(res, "omega0", bad, minimum=0.0, strict=True)
    alpha = _num(res, "alpha", bad, minimum=0.0)
    temperature = _num(res, "temperature", bad, minimum=0.0)
    for key in ("omega0", "alpha", "temperature"):
        _require(res, key, bad)
    has_wc = "omega_c" in res
    has_r = "r" in res
    if has_wc == has_r:
        bad.append("reservoir.omega_c / reservoir.r: exactly one must be "
                   "present")
    omega_c = _num(res, "omega_c", bad, minimum=0.0, strict=True)
    ratio = _num(res, "r", bad, minimum=0.0, strict=True)

    run = dict(doc.get("run", {}))
    run["__name__"] = "run"
    if "run" not in doc:
        bad.append("run: required section missing")
    _check_known(run, ("t_max", "n_steps", "n_output", "experiment",
                       "truncation", "solver", "variant", "r_values"), bad)
    for key in ("t_max", "n_steps"):
        _require(run, key, bad)
    t_max = _num(run, "t_max", bad, minimum=0.0, strict=True)
    n_steps = _num(run, "n_steps", bad, minimum=2, integer=True)
    n_output = _num(run, "n_output", bad, minimum=2, integer=True)
    truncation = _num(run, "truncation", bad, minimum=2, integer=True)
    declared = run.get("experiment")
    if declared is not None and declared != experiment:
        bad.append(f"run.experiment: config says {declared!r} but the "
                   f"{experiment!r} subcommand was invoked")
    solver = run.get("solver", "gaussian")
    if solver not in ("gaussian", "fock"):
        bad.append(f"run.solver: {solver!r} not one of ('gaussian', 'fock')")
    variant = run.get("variant", "both")
    if variant not in ("full", "secular", "both"):
        bad.append(f"run.variant: {variant!r} not one of "
                   "('full', 'secular', 'both')")
    r_values = _DEFAULT_R_SWEEP
    if "r_values" in run:
        vals = run["r_values"]
        if (not isinstance(vals, list) or not vals
                or any(isinstance(v, bool) or not isinstance(v, (int, float))
                       or v <= 0.0 for v in vals)):
            bad.append("run.r_values: expected a non-empty list of "
                       "positive numbers")
        else:
            r_values = tuple(float(v) for v in vals)

    state_kind, state_params = _validate_state(doc.get("initial_state", {}),
                                               bad)

    mc = dict(doc.get("mcwf", {}))
    mc["__name__"] = "mcwf"
    _check_known(mc, ("n_traj", "master_seed", "step_safety", "jump_log"),
                 bad)
    n_traj = _num(mc, "n_traj", bad, minimum=1, integer=True) or 0
    master_seed = _num(mc, "master_seed", bad, minimum=0, integer=True)
    step_safety = _num(mc, "step_safety", bad, minimum=0.0, strict=True)
    jump_log = _num(mc, "jump_log", bad, minimum=0, integer=True) or 0
    if experiment == "mcwf":
        if "mcwf" not in doc:
            bad.append("mcwf: required section missing for this experiment")
        else:
            _require(mc, "n_traj", bad)
            _require(mc, "master_seed", bad)
        if state_kind not in _PURE_KINDS:
            bad.append(f"initial_state.kind: {state_kind!r} is mixed; the "
                       f"trajectory solver needs one of {_PURE_KINDS}")

    outp = dict(doc.get("output", {}))
    outp["__name__"] = "output"
    _check_known(outp, ("directory", "formats"), bad)
    out_dir: Optional[Path] = out_override
    if out_dir is None and "directory" in outp:
        if isinstance(outp["directory"], str) and outp["directory"]:
            out_dir = Path(outp["directory"])
        else:
            bad.append("output.directory: expected a non-empty string")
    formats = _FORMATS
    if "formats" in outp:
        vals = outp["formats"]
        if (not isinstance(vals, list) or not vals
                or any(v not in _FORMATS for v in vals)):
            bad.append(f"output.formats: expected a non-empty subset of "
                       f"{_FORMATS}")
        else:
            formats = tuple(vals)

    if experiment == "heating" and solver == "fock" \
            and state_kind == "gaussian":
        bad.append("initial_state.kind: general gaussian states need "
                   "solver = 'gaussian'")
    if experiment == "qcf" and state_kind not in _GAUSSIAN_KINDS:
        bad.append(f"initial_state.kind: {state_kind!r} has no "
                   f"characteristic-function form; use one of "
                   f"{_GAUSSIAN_KINDS}")
    if threads < 1:
        bad.append("--threads: must be a positive integer")

    if bad:
        raise ConfigError(bad)

    if units == "hz":
        omega0 = 2.0 * np.pi * omega0
        if omega_c is not None:
            omega_c = 2.0 * np.pi * omega_c
    if has_r:
        spec = ReservoirSpec.from_ratio(omega0=float(omega0),
                                        alpha=float(alpha),
                                        r=float(ratio),
                                        temperature=float(temperature))
    else:
        spec = ReservoirSpec(omega0=float(omega0), alpha=float(alpha),
                             omega_c=float(omega_c),
                             temperature=float(temperature))
    return ExperimentConfig(
        experiment=experiment, spec=spec, t_max=float(t_max),
        n_steps=int(n_steps), n_output=int(n_output or 201),
        truncation=truncation, solver=solver, variant=variant,
        r_values=r_values, state_kind=state_kind, state_params=state_params,
        n_traj=int(n_traj), master_seed=int(master_seed or 0),
        step_safety=float(step_safety or 2.0), jump_log=int(jump_log),
        out_dir=out_dir, formats=formats, threads=int(threads),
        config_sha256=sha)


# ---------------------------------------------------------------------------
# initial states
# ---------------------------------------------------------------------------


def _initial_n(cfg: ExperimentConfig) -> float:
    p = cfg.state_params
    if cfg.state_kind == "coherent":
        return 0.5 * (p["mean_x"] ** 2 + p["mean_p"] ** 2)
    if cfg.state_kind == "fock":
        return float(p["k"])
    if cfg.state_kind == "thermal":
        return p["nbar"]
    if cfg.state_kind == "gaussian":
        st = GaussianQcfState(mean=p["mean"], cov=p["cov"])
        return st.n_mean
    return 0.0


def _default_dim(cfg: ExperimentConfig) -> int:
    """Basis size covering the thermal target and the initial excursion."""
    if cfg.truncation is not None:
        return cfg.truncation
    n0 = _initial_n(cfg)
    dim = choose_truncation(max(cfg.spec.nbar0, n0))
    if cfg.state_kind in ("coherent", "fock"):
        dim = max(dim, int(np.ceil(n0 + 8.0 * np.sqrt(n0 + 1.0) + 16.0)))
    return dim


def _gaussian_initial(cfg: ExperimentConfig) -> GaussianQcfState:
    p = cfg.state_params
    if cfg.state_kind == "coherent":
        return coherent_state(p["mean_x"], p["mean_p"])
    if cfg.state_kind == "thermal":
        return thermal_state(p["nbar"])
    if cfg.state_kind == "gaussian":
        return GaussianQcfState(mean=p["mean"], cov=p["cov"])
    return vacuum_state()


def _fock_initial(cfg: ExperimentConfig, dim: int):
    p = cfg.state_params
    if cfg.state_kind == "coherent":
        return coherent_density(p["mean_x"], p["mean_p"], dim)
    if cfg.state_kind == "fock":
        if p["k"] >= dim:
            raise ConfigError([f"initial_state.k: {p['k']} does not fit "
                               f"the truncation dimension {dim}"])
        return fock_density(p["k"], dim)
    if cfg.state_kind == "thermal":
        return thermal_density(p["nbar"], dim)
    return vacuum_density(dim)


def _pure_initial(cfg: ExperimentConfig, dim: int) -> np.ndarray:
    p = cfg.state_params
    if cfg.state_kind == "coherent":
        psi = coherent_amplitudes(p["mean_x"], p["mean_p"], dim)
        return psi / np.linalg.norm(psi)
    if cfg.state_kind == "fock":
        if p["k"] >= dim:
            raise ConfigError([f"initial_state.k: {p['k']} does not fit "
                               f"the truncation dimension {dim}"])
        return fock_vector(p["k"], dim)
    return vacuum_vector(dim)


# ---------------------------------------------------------------------------
# summary helpers
# ---------------------------------------------------------------------------


def _jsonable(obj):
    """Strip numpy scalar types so json.dumps gets plain python."""
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def _provenance(cfg: ExperimentConfig) -> dict:
    prov = {
        "config_sha256": cfg.config_sha256,
        "package": {"name": "qbmsim", "version": __version__},
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }
    if cfg.experiment == "mcwf":
        prov["seeds"] = {"master_seed": cfg.master_seed,
                         "n_traj": cfg.n_traj}
    return prov


def _regime_summary(spec: ReservoirSpec, table: CoefficientTable) -> dict:
    report = classify_regime(table)
    out = {
        "classification": report.classification.value,
        "first_violation_time": report.first_violation_time,
        "min_rate": report.min_rate_value,
        "stationary": None,
        "detailed_balance": None,
    }
    if spec.alpha == 0.0:
        return out
    try:
        delta_inf, gamma_inf = stationary_rates(spec)
    except QbmsimError as exc:
        out["stationary"] = {"error": str(exc)}
        return out
    out["stationary"] = {
        "delta_inf": delta_inf,
        "gamma_inf": gamma_inf,
        "kappa_down_inf": delta_inf + gamma_inf,
        "kappa_up_inf": delta_inf - gamma_inf,
    }
    if gamma_inf != 0.0:
        target = 2.0 * float(thermal_occupation(spec.omega0, spec.kt)) + 1.0
        ratio = delta_inf / gamma_inf
        out["detailed_balance"] = {
            "ratio": ratio,
            "target": target,
            "residual": ratio / target - 1.0,
        }
    return out


def _short_time_fit(t: np.ndarray, n: np.ndarray, omega_c: float) -> dict:
    """Power-law fit of <n>(t) on (0, 0.1/omega_c]."""
    window = 0.1 / omega_c
    mask = (t > 0.0) & (t <= window) & (n > 0.0)
    if np.count_nonzero(mask) < 4:
        return {"exponent": None, "prefactor": None, "window": window,
                "points": int(np.count_nonzero(mask))}
    slope, intercept = np.polyfit(np.log(t[mask]), np.log(n[mask]), 1)
    return {"exponent": float(slope), "prefactor": float(np.exp(intercept)),
            "window": window, "points": int(np.count_nonzero(mask))}


def _write_text(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8")


def _write_rows(path: Path, header: str, rows) -> None:
    lines = [header] + rows + [""]
    _write_text(path, "\n".join(lines))


def _write_gnuplot(cfg: ExperimentConfig, out: Path, body: str) -> None:
    if "gnuplot" not in cfg.formats:
        return
    text = ("# generated by qbmsim; render with: gnuplot -p plot.gp\n"
            "set datafile separator ','\n"
            "set key autotitle columnhead\n"
            "set xlabel 't (s)'\n" + body)
    _write_text(out / "plot.gp", text)


# ---------------------------------------------------------------------------
# experiment runners
# ---------------------------------------------------------------------------


def _run_coefficients(cfg: ExperimentConfig, out: Path) -> dict:
    table = build_coefficient_table(cfg.spec, cfg.t_max, cfg.n_steps)
    if "csv" in cfg.formats:
        table.to_csv(out / "coefficients.csv")
    _write_gnuplot(cfg, out, (
        "set ylabel 'rate (1/s)'\n"
        "plot 'coefficients.csv' using 1:2 with lines title 'delta', \\\n"
        "     '' using 1:3 with lines title 'gamma', \\\n"
        "     '' using 1:($2-$3) with lines title 'delta - gamma'\n"))
    return {"regime": _regime_summary(cfg.spec, table),
            "table": {"t_max": table.t_max, "points": len(table.grid)}}


def _run_heating(cfg: ExperimentConfig, out: Path) -> dict:
    table = build_coefficient_table(cfg.spec, cfg.t_max, cfg.n_steps)
    tg = np.linspace(0.0, cfg.t_max, cfg.n_output)
    summary: dict = {"solver": cfg.solver,
                     "regime": _regime_summary(cfg.spec, table)}
    if cfg.solver == "gaussian":
        state0 = _gaussian_initial(cfg)
        states = [propagate_secular(state0, table, float(t)) for t in tg]
        n = np.array([st.n_mean for st in states])
    else:
        dim = _default_dim(cfg)
        rho0 = _fock_initial(cfg, dim)
        states, audits = integrate_secular(rho0, table, tg)
        n = heating_function(states)
        if "csv" in cfg.formats:
            audits_to_csv(audits, out / "audit.csv")
        summary["fock"] = {
            "dim": dim,
            "min_eigenvalue": min(a.min_eigenvalue for a in audits),
            "max_trace_error": max(a.trace_error for a in audits),
        }
    if "csv" in cfg.formats:
        np.savetxt(out / "heating.csv", np.column_stack((tg, n)),
                   fmt="%.17g", delimiter=",", header=HEATING_CSV_HEADER,
                   comments="")
    _write_gnuplot(cfg, out, (
        "set ylabel '<n>(t)'\n"
        "plot 'heating.csv' using 1:2 with lines\n"))
    summary["short_time_fit"] = _short_time_fit(tg, n, cfg.spec.omega_c)
    summary["final_n_mean"] = float(n[-1])
    return summary


def _run_qcf(cfg: ExperimentConfig, out: Path) -> dict:
    table = build_coefficient_table(cfg.spec, cfg.t_max, cfg.n_steps)
    bundle = build_propagator_bundle(table)
    state0 = _gaussian_initial(cfg)
    tg = np.linspace(0.0, cfg.t_max, cfg.n_output)
    summary: dict = {"variant": cfg.variant,
                     "regime": _regime_summary(cfg.spec, table)}
    plots = []
    if cfg.variant in ("full", "both"):
        states = propagate_series(state0, bundle, tg)
        if "csv" in cfg.formats:
            series_to_csv(states, out / "qcf_full.csv")
        plots.append("'qcf_full.csv' using 1:7 with lines title 'full'")
    if cfg.variant in ("secular", "both"):
        states = propagate_series(state0, bundle, tg, secular=True)
        if "csv" in cfg.formats:
            series_to_csv(states, out / "qcf_secular.csv")
        plots.append("'qcf_secular.csv' using 1:7 with lines "
                     "title 'secular'")
    if cfg.variant == "both":
        gap = secular_observable_check(state0, bundle, tg)
        summary["secular_gap"] = {"n_mean": gap.n_mean,
                                  "anisotropy": gap.anisotropy}
    _write_gnuplot(cfg, out, ("set ylabel '<n>(t)'\nplot "
                              + ", \\\n     ".join(plots) + "\n"))
    return summary


def _run_mcwf(cfg: ExperimentConfig, out: Path) -> dict:
    table = build_coefficient_table(cfg.spec, cfg.t_max, cfg.n_steps)
    dim = _default_dim(cfg)
    psi0 = _pure_initial(cfg, dim)
    tg = np.linspace(0.0, cfg.t_max, cfg.n_output)
    est = run_ensemble(psi0, table, tg, cfg.n_traj, cfg.master_seed,
                       threads=cfg.threads, step_safety=cfg.step_safety)
    if "csv" in cfg.formats:
        est.to_csv(out / "mcwf.csv")
    if cfg.jump_log > 0 and "csv" in cfg.formats:
        # debug trajectories on offset seeds, outside the ensemble streams
        rows = []
        for i in range(cfg.jump_log):
            seed = cfg.master_seed + 1 + i
            traj = run_trajectory(psi0, table, tg, seed,
                                  step_safety=cfg.step_safety)
            for t, channel in traj.jump_log:
                rows.append(f"{i},{seed},{t:.17g},{channel}")
        _write_rows(out / "jumps.csv", JUMPS_CSV_HEADER, rows)
    _write_gnuplot(cfg, out, (
        "set ylabel '<n>(t)'\n"
        "plot 'mcwf.csv' using 1:2:3 with yerrorbars title 'ensemble', \\\n"
        "     '' using 1:2 with lines notitle\n"))
    return {"regime": _regime_summary(cfg.spec, table),
            "dim": dim,
            "final_n_mean": float(est.n_mean[-1]),
            "final_std_err": float(est.std_err[-1]),
            "jumps_down_mean": est.jumps_down_mean,
            "jumps_up_mean": est.jumps_up_mean}


def _run_regimes(cfg: ExperimentConfig, out: Path) -> dict:
    spec = cfg.spec
    rows = []
    entries = []
    for r in cfg.r_values:
        spec_r = ReservoirSpec.from_ratio(omega0=spec.omega0,
                                          alpha=spec.alpha, r=r,
                                          temperature=spec.temperature)
        table = build_coefficient_table(spec_r, cfg.t_max, cfg.n_steps)
        report = classify_regime(table)
        first = report.first_violation_time
        rows.append(f"{r:.17g},{report.classification.value},"
                    + ("" if first is None else f"{first:.17g}")
                    + f",{report.min_rate_value:.17g}")
        entries.append({"r": r,
                        "classification": report.classification.value,
                        "first_violation_time": first,
                        "min_rate": report.min_rate_value})
    if "csv" in cfg.formats:
        _write_rows(out / "classification.csv", REGIMES_CSV_HEADER, rows)
    return {"sweep": entries}


def _run_rwa_compare(cfg: ExperimentConfig, out: Path) -> dict:
    table = build_coefficient_table(cfg.spec, cfg.t_max, cfg.n_steps)
    rates = rwa_rates(cfg.spec, cfg.t_max, cfg.n_steps)
    # vacuum heating to leading order: n(t) ~ integral of the up rate
    n_sec = cumulative_trapezoid(table.delta - table.gamma, table.grid,
                                 initial=0.0)
    n_rwa = cumulative_trapezoid(rates.gamma_up, rates.grid, initial=0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(n_sec > 0.0, n_rwa / np.where(n_sec > 0.0, n_sec,
                                                       1.0), np.nan)
    if "csv" in cfg.formats:
        np.savetxt(out / "rwa.csv",
                   np.column_stack((table.grid, n_sec, n_rwa, ratio)),
                   fmt="%.17g", delimiter=",", header=RWA_CSV_HEADER,
                   comments="")
    _write_gnuplot(cfg, out, (
        "set ylabel 'n_RWA / n_secular'\n"
        "plot 'rwa.csv' using 1:4 with lines\n"))
    idx = max(2, cfg.n_steps // 100)
    short_ratio = float(ratio[idx]) if np.isfinite(ratio[idx]) else None
    return {"regime": _regime_summary(cfg.spec, table),
            "short_time_ratio": short_ratio,
            "ratio_time": float(table.grid[idx]),
            "short_time_fit": _short_time_fit(table.grid, n_sec,
                                              cfg.spec.omega_c)}


_RUNNERS = {
    "coefficients": _run_coefficients,
    "heating": _run_heating,
    "qcf": _run_qcf,
    "mcwf": _run_mcwf,
    "regimes": _run_regimes,
    "rwa-compare": _run_rwa_compare,
}


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _resolve_threads(flag: Optional[int]) -> int:
    if flag is not None:
        return flag
    env = os.environ.get(THREADS_ENV)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError([f"environment {THREADS_ENV}: {env!r} is not "
                               "an integer"])
    return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qbmsim",
        description="Damped-oscillator reservoir simulations from TOML "
                    "configs.")
    sub = parser.add_subparsers(dest="experiment", required=True)
    helps = {
        "coefficients": "tabulate the time-local generator coefficients",
        "heating": "mean occupation series <n>(t)",
        "qcf": "gaussian characteristic-function moment series",
        "mcwf": "monte carlo wave-function ensemble",
        "regimes": "classification sweep over the cutoff ratio",
        "rwa-compare": "pre-trace vs post-trace rotating-wave heating",
    }
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", required=True, type=Path,
                       help="TOML experiment description")
        p.add_argument("--out", type=Path, default=None,
                       help="output directory (overrides output.directory)")
        p.add_argument("--validate-only", action="store_true",
                       help="check the config and exit")
        p.add_argument("--threads", type=int, default=None,
                       help=f"worker cap (default: ${THREADS_ENV} or 1)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        threads = _resolve_threads(args.threads)
        cfg = load_config(args.config, args.experiment,
                          out_override=args.out, threads=threads)
        if args.validate_only:
            print(f"config ok: {args.experiment} "
                  f"(sha256 {cfg.config_sha256[:12]})")
            return 0
        if cfg.out_dir is None:
            raise ConfigError(["output.directory: required unless --out "
                               "is given"])
        out = cfg.out_dir
        out.mkdir(parents=True, exist_ok=True)
        summary = _RUNNERS[cfg.experiment](cfg, out)
        summary["experiment"] = cfg.experiment
        summary["provenance"] = _provenance(cfg)
        _write_text(out / "summary.json",
                    json.dumps(_jsonable(summary), indent=2,
                               sort_keys=True) + "\n")
    except ConfigError as exc:
        for violation in exc.violations:
            print(violation, file=sys.stderr)
        return 1
    except RegimeError as exc:
        print(exc, file=sys.stderr)
        return 3
    except QbmsimError as exc:
        print(exc, file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
