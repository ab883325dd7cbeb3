"""Scenario runner: bounds, optimizations, Zeeman maps and drive checks as CSV + SVG.

All inputs are in units of kappa (kappa = 1).  Every scenario expands into
independent jobs; jobs run in a process pool, results are gathered in input
order and written by the parent process only, so outputs do not depend on the
worker count.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import os
import platform
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .analytic_bounds import ResolutionWarning, lower_bound
from .drive import SineWavepacket, SmallMarginWarning, reconstruct_drive, verify_drive
from .dynamics import DriveContext, instant_excitation, resolved_grid, uniform_grid
from .model import (CavityChannel, ConfigurationError, SystemParams, adiabatic_limit,
                    critical_time)
from .optimizer import OptimizationTarget, OptimizerConfig, normalization_points, optimize
from .spectral import build_basis, default_size, synthesize_time_domain

SCENARIOS = ("bounds_vs_T", "regime_sweep", "metric_optimization", "zeeman_map", "drive_roundtrip")
DIGITS = 12
EXIT_CLEAN, EXIT_FLAGGED, EXIT_ERROR = 0, 3, 1


class SchemaError(ValueError):
    pass


# -- configuration ---------------------------------------------------------------
@dataclass(frozen=True)
class OptimizerSettings:
    N: int | None = None
    T_b_factor: float = 1.25
    normalization_points: int | None = None
    restarts: int = 1
    max_iterations: int = 4000

    def basis(self, T: float, params: SystemParams):
        T_b, N = default_size(T, params, self.T_b_factor)
        return build_basis(T, T_b, self.N or N, params)

    def config(self, seed: int) -> OptimizerConfig:
        return OptimizerConfig(normalization_points=self.normalization_points,
                               restarts=self.restarts, max_iterations=self.max_iterations,
                               seed=seed)


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    kappa_over_g: tuple[float, ...] = (10.0, 1.0, 0.1)
    cooperativity: float = 1.0
    gamma: float = 0.6
    channels: tuple[tuple[float, float], ...] = ()  # (g, delta) pairs
    T_over_tcrit: tuple[float, ...] = ()
    T_values: tuple[float, ...] = ()
    delta_z: tuple[float, ...] = ()
    targets: tuple[tuple[int, ...], ...] = ((1,),)
    chi: tuple[float, ...] = (0.05,)
    theta_0: float = 0.0
    numeric: bool = True
    report_points: int = 401
    optimizer: OptimizerSettings = OptimizerSettings()
    seed: int = 0
    out: str = "results"

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigurationError(f"unknown scenario {self.scenario!r}; choose from {SCENARIOS}")
        need = {
            "bounds_vs_T": ("kappa_over_g", "T_over_tcrit"),
            "regime_sweep": ("kappa_over_g", "T_over_tcrit"),
            "metric_optimization": ("channels", "T_values", "targets"),
            "zeeman_map": ("channels", "T_values", "delta_z"),
            "drive_roundtrip": ("kappa_over_g", "T_over_tcrit", "chi"),
        }[self.scenario]
        for name in need:
            if not getattr(self, name):
                raise ConfigurationError(f"{self.scenario} needs a nonempty {name}")

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        data = dict(data)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        opt = OptimizerSettings(**data.pop("optimizer", {}) or {})
        for key in ("kappa_over_g", "T_over_tcrit", "T_values", "delta_z", "chi"):
            if key in data:
                data[key] = tuple(float(x) for x in np.atleast_1d(data[key]))
        if "channels" in data:
            data["channels"] = tuple(
                (float(c["g"]), float(c.get("delta", 0.0))) if isinstance(c, dict)
                else (float(c[0]), float(c[1])) for c in data["channels"])
        if "targets" in data:
            data["targets"] = tuple(tuple(int(j) for j in np.atleast_1d(t)) for t in data["targets"])
        return cls(optimizer=opt, **data)

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        with open(path) as fh:
            return cls.from_dict(yaml.safe_load(fh) or {})

    def to_dict(self) -> dict:
        return json.loads(json.dumps(dataclasses.asdict(self)))

    def lambda_params(self, ratio: float) -> SystemParams:
        return SystemParams.from_cooperativity(1.0, 1.0 / ratio, self.cooperativity)

    def multi_params(self, delta_z: float | None = None) -> SystemParams:
        chans = self.channels
        if delta_z is not None:
            # two channels split symmetrically by delta_z
            if len(chans) != 2:
                raise ConfigurationError("delta_z sweeps need exactly two channels")
            chans = ((chans[0][0], delta_z / 2), (chans[1][0], -delta_z / 2))
        p = SystemParams(1.0, self.gamma, tuple(CavityChannel(g, d) for g, d in chans))
        return p.centered()


PRESETS: dict[str, dict] = {
    "lambda-bounds": dict(scenario="bounds_vs_T", kappa_over_g=[10, 1, 0.1],
                 T_over_tcrit=[float(x) for x in np.geomspace(0.2, 50, 8)]),
    "regime-shapes": dict(scenario="regime_sweep", kappa_over_g=[10, 1, 0.1], T_over_tcrit=[2.5]),
    "three-level": dict(scenario="metric_optimization", gamma=0.6,
                 channels=[[math.sqrt(1 / 3), 5.0], [-math.sqrt(4 / 15), 0.0],
                           [math.sqrt(1 / 30), -5.0]],
                 T_values=[5.0], targets=[[1], [2], [1, 2]]),
    "zeeman-grid": dict(scenario="zeeman_map", gamma=0.6,
                 channels=[[math.sqrt(1 / 3), 0.0], [-math.sqrt(4 / 15), 0.0]],
                 T_values=[1.0, 2.5, 5.0, 7.5, 10.0, 12.5],
                 delta_z=[0.0, 1.0, 2.5, 5.0, 10.0, 20.0]),
    "drive-margins": dict(scenario="drive_roundtrip", kappa_over_g=[10, 1, 0.1], T_over_tcrit=[2.5],
                 chi=[0.2, 0.1, 0.05, 0.02]),
}


# -- jobs ---------------------------------------------------------------------
@dataclass(frozen=True)
class Job:
    scenario: str
    index: int
    payload: dict
    config: ScenarioConfig
    seed: int


@dataclass
class JobResult:
    index: int
    row: dict = field(default_factory=dict)
    tables: dict[str, tuple[list[str], list[list[float]]]] = field(default_factory=dict)
    converged: bool = True
    error: str | None = None
    info: dict = field(default_factory=dict)


def expand(config: ScenarioConfig) -> list[Job]:
    """Independent jobs of a scenario, in a fixed order."""
    s = config.scenario
    points: list[dict] = []
    if s in ("bounds_vs_T", "regime_sweep"):
        points = [dict(ratio=r, T_over_tcrit=f) for r in config.kappa_over_g for f in config.T_over_tcrit]
    elif s == "metric_optimization":
        points = [dict(T=T, target=list(t)) for T in config.T_values for t in config.targets]
    elif s == "zeeman_map":
        points = [dict(T=T, delta_z=d) for T in config.T_values for d in config.delta_z]
    elif s == "drive_roundtrip":
        points = [dict(ratio=r, T_over_tcrit=f, chi=c)
                  for r in config.kappa_over_g for f in config.T_over_tcrit for c in config.chi]
    seeds = np.random.SeedSequence(config.seed).generate_state(len(points))
    return [Job(s, i, p, config, int(seeds[i])) for i, p in enumerate(points)]


def _wavepacket_table(sol, params, times):
    cols = ["t"]
    data = [times]
    for j in range(1, params.n_channels + 1):
        a = synthesize_time_domain(sol.coefficients, params, j, times, basis=sol.basis)
        cols += [f"re_alpha_g{j}", f"im_alpha_g{j}", f"flux_{j}"]
        data += [a.real, a.imag, 2 * params.kappa * np.abs(a) ** 2]
    for name, trace in sol.probability_traces.items():
        cols.append(f"P_{name}")
        data.append(np.interp(times, sol.times, trace))
    return cols, [list(r) for r in np.column_stack(data)]


def _optimize(params, T, channels, config: ScenarioConfig, seed):
    target = OptimizationTarget.emission(T, *channels)
    basis = config.optimizer.basis(T, params)
    sol = optimize(params, target, config.optimizer.config(seed), basis=basis)
    return sol


def run_job(job: Job) -> JobResult:
    res = JobResult(job.index)
    try:
        _RUNNERS[job.scenario](job, res)
    except Exception as exc:  # isolated per job
        res.error = f"{type(exc).__name__}: {exc}"
        res.converged = False
    return res


def _bounds_job(job: Job, res: JobResult):
    cfg, p = job.config, job.payload
    params = cfg.lambda_params(p["ratio"])
    T = p["T_over_tcrit"] * critical_time(params)
    lb = lower_bound(params, T, strict=_STRICT)
    traj = instant_excitation(params, resolved_grid(params, T))
    res.row = {"kappa_over_g": p["ratio"], "T": T, "T_over_tcrit": p["T_over_tcrit"],
               "P_upper": lb.P_upper, "P_lower": lb.P_lower}
    if cfg.numeric:
        sol = _optimize(params, T, (1,), cfg, job.seed)
        res.row["P_numeric"] = sol.objective
        res.converged = sol.converged
        res.info = _info(sol, cfg)
    res.row["P_instant"] = float(traj.P_kappa[-1, 0])
    res.row["P_adiabatic"] = adiabatic_limit(params)


def _info(sol, cfg: ScenarioConfig):
    pts = cfg.optimizer.normalization_points or normalization_points(sol.basis, sol.target.T)
    return {"N": sol.basis.N, "T_b": sol.basis.T_b, "normalization_points": pts,
            "restarts": len(sol.restart_objectives), "restart_spread": sol.restart_spread,
            "converged": sol.converged, "iterations": sol.iterations,
            "audit_max_total": sol.audit_max_total}


def _regime_job(job: Job, res: JobResult):
    cfg, p = job.config, job.payload
    params = cfg.lambda_params(p["ratio"])
    T = p["T_over_tcrit"] * critical_time(params)
    lb = lower_bound(params, T, strict=_STRICT)
    sol = _optimize(params, T, (1,), cfg, job.seed)
    times = np.linspace(0.0, T, cfg.report_points)
    a = synthesize_time_domain(sol.coefficients, params, 1, times, basis=sol.basis)
    # compare shapes up to a global phase, both normalized on [0, T]
    sine = np.sin(lb.omega_m * times)
    phase = np.vdot(a, sine)
    a_aligned = a * (np.conj(phase) / abs(phase)) if abs(phase) > 0 else a
    na = math.sqrt(np.trapezoid(np.abs(a) ** 2, times))
    ns = math.sqrt(np.trapezoid(sine ** 2, times))
    dist = math.sqrt(np.trapezoid(np.abs(a_aligned / na - sine / ns) ** 2, times))
    flux = np.abs(a) ** 2
    res.row = {"kappa_over_g": p["ratio"], "T": T, "P_numeric": sol.objective,
               "P_lower": lb.P_lower, "P_upper": lb.P_upper, "l2_to_sine": dist,
               "peak_flux_t_over_T": float(times[int(np.argmax(flux))] / T),
               "t_max_over_T": sol.t_max / T}
    res.tables[f"wavepacket_kg{_tag(p['ratio'])}"] = _wavepacket_table(sol, params, times)
    res.converged = sol.converged
    res.info = _info(sol, cfg)


def _metric_job(job: Job, res: JobResult):
    cfg, p = job.config, job.payload
    params = cfg.multi_params()
    sol = _optimize(params, p["T"], tuple(p["target"]), cfg, job.seed)
    times = np.linspace(0.0, p["T"], cfg.report_points)
    res.row = {"target": "*".join(f"kappa{j}" for j in p["target"]), "T": p["T"],
               "objective": sol.objective}
    for j in range(1, params.n_channels + 1):
        res.row[f"P_kappa{j}"] = float(np.interp(p["T"], sol.times, sol.probability_traces[f"kappa{j}"]))
    res.tables[f"wavepacket_{res.row['target'].replace('*', '_')}_T{_tag(p['T'])}"] = \
        _wavepacket_table(sol, params, times)
    res.converged = sol.converged
    res.info = _info(sol, cfg)


def _zeeman_job(job: Job, res: JobResult):
    cfg, p = job.config, job.payload
    params = cfg.multi_params(p["delta_z"])
    sol = _optimize(params, p["T"], (1, 2), cfg, job.seed)
    res.row = {"T": p["T"], "delta_z": p["delta_z"], "P_kappa1": sol.term_values[0],
               "P_kappa2": sol.term_values[1], "product": sol.objective}
    res.converged = sol.converged
    res.info = _info(sol, cfg)


def _drive_job(job: Job, res: JobResult):
    cfg, p = job.config, job.payload
    params = cfg.lambda_params(p["ratio"])
    T = p["T_over_tcrit"] * critical_time(params)
    lb = lower_bound(params, T, strict=_STRICT)
    ctx = DriveContext(chi=p["chi"], theta_0=cfg.theta_0)
    wp = SineWavepacket(lb)
    grid = uniform_grid(T, 2000)
    pulse = reconstruct_drive(wp, params, ctx, grid)
    rep = verify_drive(pulse, params, ctx, wp)
    res.row = {"kappa_over_g": p["ratio"], "T": T, "chi": p["chi"], "theta_0": cfg.theta_0,
               "dynamic_l2_error": rep.dynamic_l2_error, "algebraic_residual": rep.algebraic_residual,
               "imag_fraction": rep.imag_fraction, "max_abs_omega": rep.max_abs_omega,
               "P_simulated": rep.simulated_emission}
    step = max(1, (len(pulse.times) - 1) // (cfg.report_points - 1))
    rows = [[t, o.real, o.imag] for t, o in zip(pulse.times[::step], pulse.Omega[::step])]
    res.tables[f"drive_kg{_tag(p['ratio'])}_chi{_tag(p['chi'])}"] = (["t", "re_Omega", "im_Omega"], rows)


_RUNNERS = {"bounds_vs_T": _bounds_job, "regime_sweep": _regime_job,
            "metric_optimization": _metric_job, "zeeman_map": _zeeman_job,
            "drive_roundtrip": _drive_job}
_STRICT = False


def _tag(x: float) -> str:
    return f"{x:g}".replace(".", "p").replace("-", "m")


def _init_worker(strict: bool):
    global _STRICT
    _STRICT = strict
    if strict:
        warnings.simplefilter("error", ResolutionWarning)
        warnings.simplefilter("error", SmallMarginWarning)


def sweep(jobs: list[Job], workers: int = 1, strict: bool = False) -> list[JobResult]:
    """Run jobs; results come back in input order whatever the worker count."""
    if workers <= 1 or len(jobs) <= 1:
        _init_worker(strict)
        return [run_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker,
                             initargs=(strict,)) as pool:
        return list(pool.map(run_job, jobs))


# -- persistence ---------------------------------------------------------------
def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.{DIGITS}g}"
    return str(x)


def write_csv(path: Path, columns: list[str], rows: list[list]):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(x) for x in r])


def write_results(config: ScenarioConfig, results: list[JobResult], out: Path) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    ok = [r for r in results if r.error is None]
    columns: list[str] = []
    for r in ok:
        for k in r.row:
            if k not in columns:
                columns.append(k)
    columns.append("converged")
    rows = [[r.row.get(k, "") for k in columns[:-1]] + [r.converged] for r in ok]
    files = {}
    summary = out / f"{config.scenario}.csv"
    write_csv(summary, columns, rows)
    files[summary.name] = "summary"
    for r in ok:
        for name, (cols, data) in sorted(r.tables.items()):
            path = out / f"{name}.csv"
            write_csv(path, cols, data)
            files[path.name] = "table"
    return files


def versions() -> dict:
    import matplotlib
    import numba
    import scipy
    return {"photonlimits": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__,
            "numba": numba.__version__, "matplotlib": matplotlib.__version__}


def write_manifest(config: ScenarioConfig, results: list[JobResult], files: dict,
                   out: Path, verb: str, extra: dict | None = None) -> dict:
    jobs = []
    for r in results:
        jobs.append({"index": r.index, "converged": r.converged, "error": r.error, **r.info})
    manifest = {
        "verb": verb,
        "config": config.to_dict(),
        "seed": config.seed,
        "versions": versions(),
        "files": files,
        "jobs": jobs,
        "flagged": any((not r.converged) or r.error for r in results),
        **(extra or {}),
        "metadata": {"created": time.strftime("%Y-%m-%dT%H:%M:%S%z")},
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return manifest


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialize {type(x)}")


def run_scenario(config: ScenarioConfig, out: Path | None = None, workers: int = 1,
                 strict: bool = False, verb: str = "sweep", plots: bool = True) -> dict:
    out = Path(out or config.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    if not os.access(out, os.W_OK):
        raise OSError(f"output directory {out} is not writable")
    results = sweep(expand(config), workers, strict)
    files = write_results(config, results, out)
    if plots:
        files.update(default_plots(config, out))
    return write_manifest(config, results, files, out, verb)


# -- plotting -------------------------------------------------------------------
@dataclass(frozen=True)
class PlotSpec:
    x: str
    y: tuple[str, ...] = ()
    z: str | None = None
    kind: str = "line"
    group: str | None = None
    title: str = ""
    xlabel: str | None = None
    ylabel: str | None = None
    logx: bool = False


def read_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or not rows[0]:
        raise SchemaError(f"{path} is empty")
    header, body = rows[0], rows[1:]
    if not body:
        raise SchemaError(f"{path} has a header but no rows")

    def num(v):
        try:
            return float(v)
        except ValueError:
            return {"true": 1.0, "false": 0.0}.get(v, float("nan"))

    return header, np.array([[num(v) for v in r] for r in body])


def emit_plot(csv_path, spec: PlotSpec, out_path) -> Path:
    """Static SVG line plot or heatmap with byte-stable output."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    header, data = read_csv(csv_path)
    needed = [spec.x, *spec.y] + ([spec.z] if spec.z else []) + ([spec.group] if spec.group else [])
    missing = [c for c in needed if c not in header]
    if missing:
        raise SchemaError(f"{csv_path} lacks columns {missing}")
    col = {name: data[:, i] for i, name in enumerate(header)}
    plt.rcParams["svg.hashsalt"] = "photonlimits"
    plt.rcParams["svg.fonttype"] = "path"
    fig, ax = plt.subplots(figsize=(6, 4))
    if spec.kind == "heatmap":
        if not spec.y or not spec.z:
            raise SchemaError("a heatmap needs y and z columns")
        xs, ys = np.unique(col[spec.x]), np.unique(col[spec.y[0]])
        Z = np.full((len(ys), len(xs)), np.nan)
        for xv, yv, zv in zip(col[spec.x], col[spec.y[0]], col[spec.z]):
            Z[np.searchsorted(ys, yv), np.searchsorted(xs, xv)] = zv
        mesh = ax.pcolormesh(xs, ys, Z, shading="nearest", cmap="viridis")
        fig.colorbar(mesh, ax=ax, label=spec.z)
        ax.set_ylabel(spec.ylabel or spec.y[0])
    elif spec.kind == "line":
        groups = np.unique(col[spec.group]) if spec.group else [None]
        for gv in groups:
            mask = np.ones(len(data), bool) if gv is None else col[spec.group] == gv
            for y in spec.y:
                label = y if gv is None else f"{y} ({spec.group}={gv:g})"
                ax.plot(col[spec.x][mask], col[y][mask], marker="o" if mask.sum() < 30 else None,
                        ms=3, label=label)
        ax.set_ylabel(spec.ylabel or ", ".join(spec.y))
        if len(spec.y) > 1 or spec.group:
            ax.legend(fontsize=6)
    else:
        raise SchemaError(f"unknown plot kind {spec.kind!r}")
    if spec.logx:
        ax.set_xscale("log")
    ax.set_xlabel(spec.xlabel or spec.x)
    if spec.title:
        ax.set_title(spec.title)
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return out_path


def default_plots(config: ScenarioConfig, out: Path) -> dict:
    s = config.scenario
    summary = out / f"{s}.csv"
    specs = []
    if s == "bounds_vs_T":
        ys = ("P_upper", "P_lower") + (("P_numeric",) if config.numeric else ()) + ("P_instant", "P_adiabatic")
        specs.append((summary, PlotSpec("T_over_tcrit", ys, group="kappa_over_g", logx=True,
                                        xlabel="T / t_crit", ylabel="probability")))
    elif s == "zeeman_map":
        specs.append((summary, PlotSpec("T", ("delta_z",), z="product", kind="heatmap",
                                        xlabel="T kappa", ylabel="Delta_Z / kappa")))
    elif s in ("regime_sweep", "metric_optimization"):
        for path in sorted(out.glob("wavepacket_*.csv")):
            header, _ = read_csv(path)
            flux = tuple(h for h in header if h.startswith("flux_"))
            specs.append((path, PlotSpec("t", flux, xlabel="t kappa", ylabel="output flux")))
    elif s == "drive_roundtrip":
        for path in sorted(out.glob("drive_*.csv")):
            if path == summary:
                continue
            specs.append((path, PlotSpec("t", ("re_Omega", "im_Omega"), xlabel="t kappa",
                                         ylabel="Omega / kappa")))
    files = {}
    for csv_path, spec in specs:
        svg = csv_path.with_suffix(".svg")
        emit_plot(csv_path, spec, svg)
        files[svg.name] = "plot"
    return files


# -- command line ----------------------------------------------------------------
def _load_config(args, scenario: str | None, overrides: dict | None = None) -> ScenarioConfig:
    if args.config:
        with open(args.config) as fh:
            data = yaml.safe_load(fh) or {}
    elif args.preset:
        data = dict(PRESETS[args.preset])
    else:
        data = {}
    if scenario and data.get("scenario", scenario) != scenario:
        raise ConfigurationError(f"this verb runs {scenario}, config asks for {data['scenario']}")
    if scenario:
        data["scenario"] = scenario
    data.update(overrides or {})
    if args.seed is not None:
        data["seed"] = args.seed
    if args.out:
        data["out"] = args.out
    if "scenario" not in data:
        raise ConfigurationError("no scenario given; pass --config or --preset")
    return ScenarioConfig.from_dict(data)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="photonlimits", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p):
        p.add_argument("--config", help="YAML scenario file")
        p.add_argument("--preset", choices=sorted(PRESETS), help="bundled parameter set")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="random seed (u64)")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--strict", action="store_true",
                       help="treat resolution and margin warnings as errors")
        p.add_argument("--no-plots", action="store_true")

    common(sub.add_parser("bounds", help="analytic bounds, instant excitation and adiabatic limit vs T"))
    common(sub.add_parser("optimize", help="optimize a single-channel emission vs T and compare"))
    common(sub.add_parser("sweep", help="run any scenario from a config or preset"))
    common(sub.add_parser("zeeman-map", help="optimized P_kappa1 P_kappa2 over (T, Delta_Z)"))
    common(sub.add_parser("drive-check", help="reconstruct drives and simulate them forward"))
    plot = sub.add_parser("plot", help="render a CSV as SVG")
    plot.add_argument("csv")
    plot.add_argument("--x", required=True)
    plot.add_argument("--y", nargs="+", default=[])
    plot.add_argument("--z")
    plot.add_argument("--kind", choices=["line", "heatmap"], default="line")
    plot.add_argument("--group")
    plot.add_argument("--logx", action="store_true")
    plot.add_argument("--title", default="")
    plot.add_argument("--out", help="SVG path (default: next to the CSV)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.verb == "plot":
            spec = PlotSpec(args.x, tuple(args.y), args.z, args.kind, args.group, args.title,
                            logx=args.logx)
            target = args.out or str(Path(args.csv).with_suffix(".svg"))
            emit_plot(args.csv, spec, target)
            print(target)
            return EXIT_CLEAN
        verb_scenario = {"bounds": "bounds_vs_T", "optimize": "bounds_vs_T",
                         "zeeman-map": "zeeman_map", "drive-check": "drive_roundtrip",
                         "sweep": None}[args.verb]
        overrides = {"numeric": False} if args.verb == "bounds" else {}
        if args.verb == "bounds" and not (args.config or args.preset):
            args.preset = "lambda-bounds"
        if args.verb == "optimize" and not (args.config or args.preset):
            args.preset = "lambda-bounds"
        if args.verb == "zeeman-map" and not (args.config or args.preset):
            args.preset = "zeeman-grid"
        if args.verb == "drive-check" and not (args.config or args.preset):
            args.preset = "drive-margins"
        config = _load_config(args, verb_scenario, overrides)
        manifest = run_scenario(config, Path(config.out), args.workers, args.strict,
                                verb=args.verb, plots=not args.no_plots)
    except (ConfigurationError, SchemaError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print(json.dumps({"out": config.out, "files": sorted(manifest["files"]),
                      "flagged": manifest["flagged"]}))
    return EXIT_FLAGGED if manifest["flagged"] else EXIT_CLEAN


if __name__ == "__main__":
    sys.exit(main())
