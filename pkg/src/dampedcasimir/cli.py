"""Command-line front end: ``casimir {fig2,fig3,sweep,verify,steady}``.

CSV goes to ``--output`` (or stdout); the human-readable report goes to
stderr. Exit codes: 0 success, 1 failure, 2 invalid configuration.
Precedence: command-line flags > ``--config`` file > scenario defaults.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__, analytic, correlations, dynamics, fock, verify
from .analytic import C2Convention
from .errors import CasimirError, InvalidParams, TruncationTooSmall
from .params import (
    PARAM_KEYS,
    SystemParams,
    derive,
    hbarK_over_kT_for_occupation,
    parse_config_text,
)

EXIT_OK, EXIT_FAILURE, EXIT_CONFIG = 0, 1, 2
SCENARIOS = ("fig2", "fig3", "sweep", "verify", "steady")
SWEEP_AXES = ("ratio", "gamma", "N_Omega")

# Keys accepted in a config file besides the physical parameters (normalized form).
OPTION_KEYS = {
    "dim": int,
    "points": int,
    "t_max": float,
    "tau_max": float,
    "output": str,
    "convention": str,
    "quick": "bool",
    "jobs": int,
    "axis": str,
    "start": float,
    "stop": float,
    "model": str,
    "plot_script": str,
}

SCENARIO_DEFAULTS = {
    "fig2": dict(points=201, t_max=10.0),
    "fig3": dict(points=400, tau_max=3.0),
    "sweep": dict(points=11, axis="ratio", start=0.5, stop=0.95),
    "verify": dict(),
    "steady": dict(model="microscopic"),
}


class ConfigError(Exception):
    pass


@dataclass
class ScenarioConfig:
    scenario: str
    params: SystemParams
    start: float = 0.0
    stop: float = 0.0
    points: int = 2
    dim: Optional[int] = None
    output: Optional[str] = None
    convention: str = analytic.DEFAULT_C2_CONVENTION.value
    quick: bool = False
    jobs: int = 1
    axis: str = "ratio"
    model: str = "microscopic"
    plot_script: Optional[str] = None
    mutation: Optional[str] = None
    criteria: Optional[list] = None

    def grid(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.points)

    def describe(self) -> list:
        lines = [f"scenario = {self.scenario}"]
        lines += [f"{k} = {getattr(self.params, k)!r}" for k in PARAM_KEYS]
        if self.scenario in ("fig2", "fig3", "sweep"):
            lines.append(f"grid = {self.start!r} .. {self.stop!r} ({self.points} points)")
        if self.scenario == "sweep":
            lines.append(f"axis = {self.axis}")
        if self.scenario == "steady":
            lines.append(f"model = {self.model}")
        lines.append(f"dim = {self.dim if self.dim is not None else 'auto'}")
        if self.scenario == "fig3":
            lines.append(f"convention = {self.convention}")
        return lines


@dataclass
class RunRecord:
    config: ScenarioConfig
    derived: dict
    columns: dict
    notes: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        lengths = {len(v) for v in self.columns.values()}
        if len(lengths) > 1:
            raise ValueError(f"columns of unequal length: {lengths}")


# --------------------------------------------------------------------------
# argument and config handling


def _add_common(parser: argparse.ArgumentParser, grid: Optional[str]):
    g = parser.add_argument_group("parameters")
    g.add_argument("--omega0", type=float)
    g.add_argument("--epsilon", type=float)
    g.add_argument("--K", type=float)
    g.add_argument("--gamma", type=float)
    g.add_argument("--kappa", type=float)
    g.add_argument("--hbarK-over-kT", dest="hbarK_over_kT", type=float,
                   help="hbar K/(k_B T); 0 means zero temperature")
    o = parser.add_argument_group("run options")
    o.add_argument("--dim", type=int, help="Fock truncation (default: automatic)")
    o.add_argument("--points", type=int)
    if grid == "t":
        o.add_argument("--t-max", dest="t_max", type=float, help="final gamma*t")
    elif grid == "tau":
        o.add_argument("--tau-max", dest="tau_max", type=float, help="final gamma*tau")
    o.add_argument("--output", help="CSV path (default: stdout)")
    o.add_argument("--config", help="key = value file; flags take precedence")
    o.add_argument("--convention", choices=("times", "divided", "both"))
    o.add_argument("--quick", action="store_true", default=None, help="reduced grids, looser tolerances")
    o.add_argument("--jobs", type=int, help="worker processes (default: $CASIMIR_JOBS or 1)")
    o.add_argument("--plot-script", dest="plot_script",
                   help="also write a gnuplot script that plots the CSV")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="casimir", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="scenario", required=True)
    p = sub.add_parser("fig2", help="photon number from vacuum: closed form vs Lindblad numerics")
    _add_common(p, "t")
    p = sub.add_parser("fig3", help="g2(tau): closed form vs quantum regression numerics")
    _add_common(p, "tau")
    p = sub.add_parser("sweep", help="steady-state quantities along one parameter axis")
    _add_common(p, None)
    p.add_argument("--axis", choices=SWEEP_AXES, help="ratio = eps*omega0/K")
    p.add_argument("--start", type=float)
    p.add_argument("--stop", type=float)
    p = sub.add_parser("verify", help="run the acceptance suite")
    _add_common(p, None)
    p.add_argument("--mutate", dest="mutation", choices=sorted(verify.MUTATIONS),
                   help="inject a known error to check the suite catches it")
    p.add_argument("--criteria", type=_criteria_list, help="comma-separated subset, e.g. 1,4")
    p = sub.add_parser("steady", help="steady-state photon-number distribution")
    _add_common(p, None)
    p.add_argument("--model", choices=dynamics.MODELS)
    return parser


def _criteria_list(text: str):
    try:
        numbers = sorted({int(part) for part in text.split(",") if part.strip()})
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    unknown = [n for n in numbers if n not in verify.CRITERION_NAMES]
    if unknown or not numbers:
        raise argparse.ArgumentTypeError(f"criteria must be among {sorted(verify.CRITERION_NAMES)}")
    return numbers


def _coerce(key: str, value, kind):
    if kind == "bool":
        if isinstance(value, bool):
            return value
        lowered = str(value).strip().lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {value!r}")
    try:
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: cannot parse {value!r} as {kind.__name__}") from None


def read_config_file(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    try:
        raw = parse_config_text(text)
    except InvalidParams as exc:
        raise ConfigError(str(exc)) from None
    out = {}
    for key, value in raw.items():
        if key in PARAM_KEYS:
            out[key] = _coerce(key, value, float)
        elif key in OPTION_KEYS:
            out[key] = _coerce(key, value, OPTION_KEYS[key])
        else:
            raise ConfigError(f"unknown config key {key!r}")
    return out


def resolve_config(args: argparse.Namespace, environ=os.environ) -> ScenarioConfig:
    scenario = args.scenario
    merged = dict(SCENARIO_DEFAULTS[scenario])
    if getattr(args, "config", None):
        merged.update(read_config_file(args.config))
    for key, value in vars(args).items():
        if value is not None and key not in ("scenario", "config"):
            merged[key] = value

    try:
        params = SystemParams.from_mapping({k: merged[k] for k in PARAM_KEYS if k in merged})
    except InvalidParams as exc:
        raise ConfigError(str(exc)) from None

    jobs = merged.get("jobs")
    if jobs is None:
        env = environ.get("CASIMIR_JOBS")
        if env:
            jobs = _coerce("CASIMIR_JOBS", env, int)
    jobs = 1 if jobs is None else jobs
    if jobs < 1:
        raise ConfigError(f"jobs must be >= 1, got {jobs}")

    cfg = ScenarioConfig(scenario=scenario, params=params, jobs=jobs)
    cfg.points = merged.get("points", 2)
    cfg.dim = merged.get("dim")
    cfg.output = merged.get("output")
    cfg.quick = bool(merged.get("quick", False))
    cfg.plot_script = merged.get("plot_script")
    cfg.mutation = merged.get("mutation")
    cfg.criteria = merged.get("criteria")
    cfg.model = merged.get("model", "microscopic")
    if cfg.model not in dynamics.MODELS:
        raise ConfigError(f"model must be one of {dynamics.MODELS}")
    cfg.convention = merged.get("convention", analytic.DEFAULT_C2_CONVENTION.value)
    if cfg.convention not in ("times", "divided", "both"):
        raise ConfigError(f"convention must be times, divided or both, got {cfg.convention!r}")
    if scenario == "fig2":
        cfg.stop = merged["t_max"]
    elif scenario == "fig3":
        cfg.stop = merged["tau_max"]
    elif scenario == "sweep":
        cfg.axis = merged["axis"]
        if cfg.axis not in SWEEP_AXES:
            raise ConfigError(f"axis must be one of {SWEEP_AXES}")
        cfg.start, cfg.stop = merged["start"], merged["stop"]
    if scenario in ("fig2", "fig3", "sweep"):
        if cfg.points < 2:
            raise ConfigError(f"points must be >= 2, got {cfg.points}")
        if not (cfg.stop > cfg.start >= 0) or not math.isfinite(cfg.stop):
            raise ConfigError(f"grid needs stop > start >= 0, got start={cfg.start}, stop={cfg.stop}")
    if cfg.dim is not None and cfg.dim < 2:
        raise ConfigError(f"dim must be >= 2, got {cfg.dim}")
    return cfg


# --------------------------------------------------------------------------
# output


def format_float(x) -> str:
    return "%.17g" % x


def write_csv(record: RunRecord, stream):
    stream.write(f"# dampedcasimir {__version__}\n")
    for line in record.config.describe():
        stream.write(f"# {line}\n")
    for key, value in record.derived.items():
        stream.write(f"# derived {key} = {format_float(value) if isinstance(value, float) else value}\n")
    for note in record.notes:
        stream.write(f"# {note}\n")
    names = list(record.columns)
    stream.write(",".join(names) + "\n")
    cols = [record.columns[name] for name in names]
    for row in zip(*cols):
        stream.write(",".join(v if isinstance(v, str) else format_float(v) for v in row) + "\n")


def write_plot_script(record: RunRecord, csv_path: str, script_path: str):
    names = list(record.columns)
    x = names[0]
    plots = ", \\\n     ".join(
        f"'{csv_path}' using 1:{i + 1} with lines title '{name}'"
        for i, name in enumerate(names) if i > 0
    )
    text = (
        "# gnuplot script\n"
        "set datafile separator ','\n"
        "set datafile commentschars '#'\n"
        "set key autotitle columnhead\n"
        f"set xlabel '{x}'\n"
        f"plot {plots}\n"
    )
    Path(script_path).write_text(text)


def report(msg: str = ""):
    print(msg, file=sys.stderr)


def _pool_map(fn, items, jobs: int):
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(*item) for item in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as pool:
        return list(pool.map(fn, *zip(*items)))


def _time_unit(raw: SystemParams) -> float:
    return raw.gamma if raw.gamma > 0 else 1.0


def _derived_summary(p) -> dict:
    out = {}
    for key, value in p.as_dict().items():
        if key in PARAM_KEYS or value is None:
            continue
        out[key] = value
    return out


# --------------------------------------------------------------------------
# scenario workers (module-level so process pools can pickle them)


def _photon_worker(raw: SystemParams, times, dim):
    run = dynamics.simulate_photon_number(derive(raw), times, "microscopic", dim=dim,
                                          opts=dynamics.IntegratorOptions(diagnostics=True))
    tr = run.trajectory
    diag = dict(dim=run.dim, retries=run.retries, max_tail_mass=float(np.max(tr.tail_mass)),
                trace_drift=float(np.max(np.abs(tr.diagnostics["trace"] - 1.0))),
                min_eigenvalue=float(np.min(tr.diagnostics["min_eigenvalue"])),
                wall_time=tr.stats["wall_time"])
    return run.photon_number, diag


def _g2_worker(raw: SystemParams, taus, dim):
    p = derive(raw)
    space = fock.HilbertSpace(dim) if dim else None
    s = correlations.g2_numeric(p, space, taus, opts=dynamics.IntegratorOptions(diagnostics=True))
    diag = dict(dim=s.dim, trace_drift=float(np.max(np.abs(s.diagnostics["trace"] / s.n_ss - 1.0))),
                min_eigenvalue=float(np.min(s.diagnostics["min_eigenvalue"])),
                wall_time=s.stats["wall_time"])
    return s.values, diag


def _sweep_worker(raw: SystemParams, dim, numeric: bool):
    """Steady-state quantities at one sweep point; failures become a status string."""
    p = derive(raw)
    row = dict(regime=p.regime.value, Omega=math.nan, gamma_r=math.nan, N_Omega=math.nan,
               n_st=math.nan, g2_zero_analytic=math.nan, n_st_numeric=math.nan,
               g2_zero_numeric=math.nan, dim=0, status="ok")
    if not p.bounded:
        row["status"] = "out-of-regime"
        return row
    row.update(Omega=p.Omega, gamma_r=p.gamma_r, N_Omega=p.N_Omega, n_st=p.n_st,
               g2_zero_analytic=analytic.g2_zero_analytic(p))
    if not numeric:
        row["status"] = "analytic-only"
        return row
    try:
        d = dim or dynamics.steady_dim(p)
        space = fock.HilbertSpace(d)
        rho = dynamics.steady_state(dynamics.liouvillian_microscopic(p, space))
        row.update(dim=d, n_st_numeric=fock.expectation(rho, fock.number(space)).real,
                   g2_zero_numeric=correlations.g2_zero_of_state(rho))
    except CasimirError as exc:
        row["status"] = f"numeric-failed: {type(exc).__name__}"
    return row


# --------------------------------------------------------------------------
# scenarios


def run_fig2(cfg: ScenarioConfig) -> RunRecord:
    raw = cfg.params
    unit = _time_unit(raw)
    grid = cfg.grid()
    times = grid / unit
    cases = {"T0": raw.with_(hbarK_over_kT=0.0), "T": raw}
    results = _pool_map(_photon_worker, [(c, times, cfg.dim) for c in cases.values()], cfg.jobs)
    columns = {("gamma_t" if raw.gamma > 0 else "t"): grid}
    record = RunRecord(cfg, _derived_summary(derive(raw)), columns)
    for (key, case), (numeric, diag) in zip(cases.items(), results):
        analytic_curve = analytic.n_microscopic(times, derive(case))
        columns[f"n_analytic_{key}"] = analytic_curve
        columns[f"n_numeric_{key}"] = numeric
        diag["max_abs_deviation"] = float(np.max(np.abs(numeric - analytic_curve)))
        record.diagnostics[key] = diag
    if raw.gamma == 0:
        record.notes.append("gamma = 0: lossless evolution; time column is t in the frequency unit")
    return record


def _conventions(cfg: ScenarioConfig):
    if cfg.convention == "both":
        return list(C2Convention)
    return [C2Convention(cfg.convention)]


def run_fig3(cfg: ScenarioConfig) -> RunRecord:
    raw = cfg.params
    unit = _time_unit(raw)
    grid = cfg.grid()
    taus = grid / unit
    cases = {"T0": raw.with_(hbarK_over_kT=0.0), "T": raw}
    results = _pool_map(_g2_worker, [(c, taus, cfg.dim) for c in cases.values()], cfg.jobs)
    columns = {("gamma_tau" if raw.gamma > 0 else "tau"): grid}
    record = RunRecord(cfg, _derived_summary(derive(raw)), columns)
    convs = _conventions(cfg)
    for (key, case), (numeric, diag) in zip(cases.items(), results):
        p = derive(case)
        for conv in convs:
            suffix = f"_{conv.value}" if len(convs) > 1 else ""
            curve = analytic.g2_analytic(taus, p, conv)
            columns[f"g2_analytic_{key}{suffix}"] = curve
            diag[f"max_abs_deviation{suffix}"] = float(np.max(np.abs(numeric - curve)))
        columns[f"g2_numeric_{key}"] = numeric
        diag["g2_zero_numeric"] = float(numeric[0]) if grid[0] == 0 else math.nan
        diag["g2_zero_analytic"] = {c.value: analytic.g2_zero_analytic(p, c) for c in convs}
        record.diagnostics[key] = diag
    record.notes.append("convention = " + ", ".join(c.value for c in convs))
    return record


def _sweep_point(raw: SystemParams, axis: str, value: float) -> SystemParams:
    if axis == "ratio":
        return raw.with_(epsilon=value * raw.K / raw.omega0)
    if axis == "gamma":
        return raw.with_(gamma=value)
    p = derive(raw)
    Omega = p.require("Omega")
    return raw.with_(hbarK_over_kT=hbarK_over_kT_for_occupation(value, raw.K, Omega))


def run_sweep(cfg: ScenarioConfig) -> RunRecord:
    values = cfg.grid()
    try:
        points = [_sweep_point(cfg.params, cfg.axis, v) for v in values]
    except InvalidParams as exc:
        raise ConfigError(str(exc)) from None
    rows = _pool_map(_sweep_worker, [(pt, cfg.dim, not cfg.quick) for pt in points], cfg.jobs)
    columns = {cfg.axis: values}
    for key in ("Omega", "gamma_r", "N_Omega", "n_st", "g2_zero_analytic",
                "n_st_numeric", "g2_zero_numeric"):
        columns[key] = np.array([row[key] for row in rows], dtype=float)
    columns["dim"] = np.array([row["dim"] for row in rows], dtype=float)
    columns["regime"] = [row["regime"] for row in rows]
    columns["status"] = [row["status"] for row in rows]
    record = RunRecord(cfg, {}, columns)
    if cfg.axis == "ratio":
        record.notes.append("ratio = epsilon*omega0/K; epsilon is varied at fixed K and omega0")
    flagged = sum(row["status"] != "ok" for row in rows)
    record.diagnostics["flagged"] = flagged
    return record


def run_steady(cfg: ScenarioConfig) -> RunRecord:
    p = derive(cfg.params)
    if cfg.model == "microscopic":
        d = cfg.dim or dynamics.steady_dim(p)
    else:
        n_ph = p.require("n_st_ph")
        d = cfg.dim or fock.auto_dim(2.0 * math.asinh(math.sqrt(n_ph)), 0.0)
    space = fock.HilbertSpace(d)
    rho = dynamics.steady_state(dynamics.build_liouvillian(cfg.model, p, space))
    pops = np.real(np.diagonal(rho.matrix)).copy()
    columns = {"n": np.arange(d, dtype=float), "p_numeric": pops}
    diag = dict(dim=d, mean_n=fock.expectation(rho, fock.number(space)).real,
                g2_zero=correlations.g2_zero_of_state(rho),
                tail_mass=fock.tail_mass(rho, dynamics.leak_marker(space)),
                min_eigenvalue=rho.min_eigenvalue())
    if cfg.model == "microscopic":
        columns["p_analytic"] = fock.squeezed_thermal_populations(p.r, p.N_Omega, d)
        diag["n_st"] = p.n_st
        try:
            diag["fidelity"] = fock.fidelity(rho, fock.squeezed_thermal_state(space, p.r, p.N_Omega))
        except TruncationTooSmall as exc:
            diag["fidelity"] = f"reference state does not fit dim={d}: {exc}"
    else:
        diag["n_st_ph"] = p.n_st_ph
    return RunRecord(cfg, _derived_summary(p), columns, diagnostics=diag)


def _emit(record: RunRecord):
    cfg = record.config
    if cfg.output:
        with open(cfg.output, "w", newline="") as fh:
            write_csv(record, fh)
        report(f"wrote {cfg.output}")
        if cfg.plot_script:
            write_plot_script(record, cfg.output, cfg.plot_script)
            report(f"wrote {cfg.plot_script}")
    else:
        write_csv(record, sys.stdout)
        if cfg.plot_script:
            report("--plot-script needs --output; skipped")


def _report_diagnostics(record: RunRecord):
    for key, diag in record.diagnostics.items():
        if isinstance(diag, dict):
            body = ", ".join(f"{k} = {v:.6g}" if isinstance(v, float) else f"{k} = {v}"
                             for k, v in diag.items())
            report(f"{key}: {body}")
        else:
            report(f"{key}: {diag}")


def run_verify(cfg: ScenarioConfig) -> int:
    start = time.perf_counter()
    mode = "quick" if cfg.quick else "full"
    report(f"acceptance suite ({mode}{', mutation ' + cfg.mutation if cfg.mutation else ''})")
    results = verify.run_all(quick=cfg.quick, mutation=cfg.mutation, jobs=cfg.jobs,
                             select=cfg.criteria, report=report)
    failed = [r for r in results if not r.passed]
    report(f"{len(results) - len(failed)}/{len(results)} criteria passed "
           f"in {time.perf_counter() - start:.1f} s")
    for r in failed:
        report(f"FAILED: criterion {r.number} ({r.name})")
    if cfg.output:
        columns = {
            "criterion": np.array([r.number for r in results], dtype=float),
            "passed": ["yes" if r.passed else "no" for r in results],
            "name": [r.name.replace(",", ";") for r in results],
            "summary": [r.summary.replace(",", ";") for r in results],
        }
        _emit(RunRecord(cfg, {}, columns))
    return EXIT_FAILURE if failed else EXIT_OK


RUNNERS = {"fig2": run_fig2, "fig3": run_fig3, "sweep": run_sweep, "steady": run_steady}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        report(f"invalid configuration: {exc}")
        return EXIT_CONFIG
    try:
        if cfg.scenario == "verify":
            return run_verify(cfg)
        record = RUNNERS[cfg.scenario](cfg)
    except ConfigError as exc:
        report(f"invalid configuration: {exc}")
        return EXIT_CONFIG
    except (CasimirError, ValueError) as exc:
        report(f"error: {type(exc).__name__}: {exc}")
        return EXIT_FAILURE
    _emit(record)
    _report_diagnostics(record)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
