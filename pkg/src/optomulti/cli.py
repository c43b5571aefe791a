"""Batch experiment runner.

Run configurations are flat INI documents (sections of key = value pairs).
Parsing is fail-closed: unknown sections or keys are errors, type errors
report the offending line.  A parsed config fully determines a run; the
resolved config is echoed into the output directory so every run can be
reproduced bit-identically.

Subcommands:
    run <config>         execute a configuration
    validate <config>    parse and echo the resolved configuration
    playbook <figure>    write the preset configs that regenerate one of the
                         standard result figures (fig1 .. fig7); --desk emits
                         reduced-size variants for quick runs

Exit codes: 0 success, 2 config error, 3 physics abort (truncation leak or
norm collapse), 4 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import io
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .classical import (
    ClassicalState,
    amplitude_chart,
    classify_attractor,
    integrate_classical,
    largest_lyapunov,
    stroboscopic_samples,
)
from .errors import (
    ConfigError,
    ConvergenceError,
    NormCollapseError,
    SimulationError,
    TruncationLeakError,
)
from .master import integrate_master, partial_trace_mech
from .model import (
    FockConfig,
    ModelParams,
    build_operators,
    cat_state,
    coherent_state,
    derive_couplings,
    product_state,
)
from .observables import (
    autocorrelation_regression,
    autocorrelation_trajectories,
    stroboscopic_quantum,
    uncertainty_floor,
    wigner,
)
from .output import ensure_dir, write_csv, write_grid, write_snapshot
from .qsd import Schedule, run_ensemble

TWO_PI = 2.0 * math.pi

ENGINES = ("classical", "master", "qsd", "chart")


@dataclass(frozen=True)
class GridSpec:
    """Inclusive linear grid lo:hi:n."""

    lo: float
    hi: float
    n: int

    def points(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.n)

    def __str__(self) -> str:
        return f"{self.lo!r}:{self.hi!r}:{self.n}"

    @classmethod
    def parse(cls, text: str) -> "GridSpec":
        lo, hi, n = text.split(":")
        return cls(float(lo), float(hi), int(n))


@dataclass(frozen=True)
class RunConfig:
    engine: str
    out_dir: str = "out"
    # model block
    model: ModelParams = ModelParams(delta=-0.4)
    # fock block (quantum engines)
    n_cav: int = 8
    n_mech: int = 8
    leak_budget: float = 1e-4
    # initial block: classical-scale amplitudes (alpha, beta); a cat state
    # superposes the two mechanical amplitudes beta and beta2
    initial_kind: str = "coherent"
    alpha0: complex = 0j
    beta0: complex = 0j
    beta0_cat: complex = 0j
    # schedule block
    tau_end: float = 50.0
    record_stride: float = 0.1
    snapshot_taus: tuple = ()
    # ensemble block
    trajectories: int = 1
    base_seed: int = 1
    # integrator block
    dt: float = 1e-3 * TWO_PI
    method: str = "rk4"
    rtol: float = 1e-8
    atol: float = 1e-10
    # observables block
    wigner_x: GridSpec | None = None
    wigner_p: GridSpec | None = None
    autocorr_taus: tuple = ()
    autocorr_dtau: GridSpec | None = None
    stroboscope: bool = False
    # chart block
    chart_delta: GridSpec | None = None
    chart_amp: GridSpec | None = None
    workers: int = 1


# section -> key -> (RunConfig field, converter, formatter)
def _complex(s: str) -> complex:
    return complex(s.replace(" ", ""))


def _bool(s: str) -> bool:
    if s.lower() in ("true", "yes", "1", "on"):
        return True
    if s.lower() in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _tuple_floats(s: str) -> tuple:
    s = s.strip()
    return tuple(float(v) for v in s.split(",")) if s else ()


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ", ".join(repr(x) for x in v)
    if isinstance(v, complex):
        return repr(v).strip("()")
    return str(v) if isinstance(v, (GridSpec, int, str)) else repr(v)


_SCHEMA = {
    "run": {
        "engine": ("engine", str),
        "out_dir": ("out_dir", str),
    },
    "model": {
        "delta": ("model.delta", float),
        "pump": ("model.pump", float),
        "sigma": ("model.sigma", float),
        "kappa_bar": ("model.kappa_bar", float),
        "gamma_bar": ("model.gamma_bar", float),
    },
    "fock": {
        "n_cav": ("n_cav", int),
        "n_mech": ("n_mech", int),
        "leak_budget": ("leak_budget", float),
    },
    "initial": {
        "kind": ("initial_kind", str),
        "alpha": ("alpha0", _complex),
        "beta": ("beta0", _complex),
        "beta_cat": ("beta0_cat", _complex),
    },
    "schedule": {
        "tau_end": ("tau_end", float),
        "record_stride": ("record_stride", float),
        "snapshot_taus": ("snapshot_taus", _tuple_floats),
    },
    "ensemble": {
        "trajectories": ("trajectories", int),
        "base_seed": ("base_seed", int),
    },
    "integrator": {
        "dt": ("dt", float),
        "method": ("method", str),
        "rtol": ("rtol", float),
        "atol": ("atol", float),
    },
    "observables": {
        "wigner_x": ("wigner_x", GridSpec.parse),
        "wigner_p": ("wigner_p", GridSpec.parse),
        "autocorr_taus": ("autocorr_taus", _tuple_floats),
        "autocorr_dtau": ("autocorr_dtau", GridSpec.parse),
        "stroboscope": ("stroboscope", _bool),
    },
    "chart": {
        "delta_grid": ("chart_delta", GridSpec.parse),
        "amp_grid": ("chart_amp", GridSpec.parse),
        "workers": ("workers", int),
    },
}


def _line_of(text: str, section: str, key: str) -> int | None:
    in_section = False
    for i, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            in_section = s[1:-1].strip() == section
        elif in_section and s.split("=", 1)[0].strip() == key:
            return i
    return None


def parse_config(text: str) -> RunConfig:
    """Parse and validate an INI run configuration; fail-closed."""
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc

    values: dict = {}
    model_kw: dict = {}
    for section in cp.sections():
        if section not in _SCHEMA:
            raise ConfigError(
                f"unknown section [{section}] (known: {', '.join(_SCHEMA)})"
            )
        for key, raw in cp.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(
                    f"unknown key '{key}' in section [{section}] "
                    f"(known: {', '.join(_SCHEMA[section])})"
                )
            target, conv = _SCHEMA[section][key]
            try:
                val = conv(raw)
            except (ValueError, TypeError) as exc:
                line = _line_of(text, section, key)
                where = f" (line {line})" if line else ""
                raise ConfigError(
                    f"bad value for [{section}] {key} = {raw!r}{where}: {exc}"
                ) from exc
            if target.startswith("model."):
                model_kw[target.split(".", 1)[1]] = val
            else:
                values[target] = val

    if "engine" not in values:
        raise ConfigError("missing required key [run] engine")
    if values["engine"] not in ENGINES:
        raise ConfigError(
            f"unknown engine {values['engine']!r} (known: {', '.join(ENGINES)})"
        )
    if "delta" not in model_kw:
        raise ConfigError("missing required key [model] delta")
    values["model"] = ModelParams(**model_kw)

    cfg = RunConfig(**values)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    if cfg.initial_kind not in ("coherent", "cat"):
        raise ConfigError(f"unknown initial state kind {cfg.initial_kind!r}")
    if cfg.method not in ("em", "rk4"):
        raise ConfigError(f"unknown integrator method {cfg.method!r}")
    if cfg.tau_end <= 0 or cfg.record_stride <= 0 or cfg.dt <= 0:
        raise ConfigError("tau_end, record_stride, and dt must be positive")
    if cfg.trajectories < 1:
        raise ConfigError("trajectories must be >= 1")
    if cfg.engine == "chart" and (cfg.chart_delta is None or cfg.chart_amp is None):
        raise ConfigError("chart engine needs [chart] delta_grid and amp_grid")
    if cfg.engine in ("master", "qsd"):
        if cfg.model.sigma <= 0:
            raise ConfigError("quantum engines need sigma > 0")
        if (cfg.wigner_x is None) != (cfg.wigner_p is None):
            raise ConfigError("wigner_x and wigner_p must be given together")
        if cfg.autocorr_taus and cfg.autocorr_dtau is None:
            raise ConfigError("autocorr_taus needs autocorr_dtau")


def format_config(cfg: RunConfig) -> str:
    """Render the fully resolved configuration; parse(format(c)) == c."""
    lines = []
    for section, keys in _SCHEMA.items():
        lines.append(f"[{section}]")
        for key, (target, _conv) in keys.items():
            if target.startswith("model."):
                val = getattr(cfg.model, target.split(".", 1)[1])
            else:
                val = getattr(cfg, target)
            if val is None:
                continue
            lines.append(f"{key} = {_fmt(val)}")
        lines.append("")
    return "\n".join(lines)


# --- engine dispatch ----------------------------------------------------------


def _initial_vectors(cfg: RunConfig, n_cav: int, n_mech: int):
    """Quantum initial state from the classical-scale amplitudes."""
    coup = derive_couplings(cfg.model)
    z_cav = 2.0 * coup.eps * cfg.alpha0
    z_mech = cfg.beta0 / coup.g
    cav = coherent_state(z_cav, n_cav)
    if cfg.initial_kind == "cat":
        mech = cat_state(z_mech, cfg.beta0_cat / coup.g, n_mech)
    else:
        mech = coherent_state(z_mech, n_mech)
    return product_state(cav, mech)


def _run_classical(cfg: RunConfig, out: Path) -> dict:
    state0 = ClassicalState(alpha=cfg.alpha0, beta=cfg.beta0)
    grid = np.arange(0.0, cfg.tau_end + cfg.record_stride / 2, cfg.record_stride)
    series = integrate_classical(state0, cfg.model, cfg.tau_end, tau_eval=grid,
                                 rtol=cfg.rtol, atol=cfg.atol)
    write_csv(out / "series.csv", {
        "tau": series.tau, "x": series.x, "p": series.p,
        "alpha": series.alpha, "beta": series.beta,
    })
    lyap = largest_lyapunov(cfg.model, state0,
                            tau_end=max(cfg.tau_end, 2000.0), transient=300.0)
    report = classify_attractor(series, lyap.value)
    with open(out / "attractor.json", "w") as fh:
        json.dump({
            "kind": report.kind,
            "period": None if report.period is None else int(report.period),
            "amplitude": float(report.amplitude),
            "offset": float(report.offset),
            "lyapunov": float(report.lyapunov),
            "lyapunov_converged": bool(lyap.converged),
        }, fh, indent=2)
    if cfg.stroboscope:
        xs, ps = stroboscopic_samples(series)
        write_csv(out / "stroboscope.csv", {"x": xs, "p": ps})
    return {"attractor": report.kind}


def _run_chart(cfg: RunConfig, out: Path) -> dict:
    chart = amplitude_chart(cfg.chart_delta.points(), cfg.chart_amp.points(),
                            cfg.model, workers=cfg.workers)
    write_grid(out / "chart.grid", chart.amps, chart.deltas, chart.net,
               x_name="amplitude", y_name="delta")
    rows_d, rows_a = [], []
    for d, amps in zip(chart.deltas, chart.branches):
        for a in amps:
            rows_d.append(d)
            rows_a.append(a)
    write_csv(out / "branches.csv", {"delta": np.array(rows_d),
                                     "amplitude": np.array(rows_a)})
    return {"branches": len(rows_a)}


def _wigner_outputs(cfg: RunConfig, out: Path, tag: str, mech_rho, g: float):
    wg = wigner(mech_rho, g, cfg.wigner_x.points(), cfg.wigner_p.points())
    write_grid(out / f"wigner_{tag}.grid", wg.x, wg.p, wg.w,
               x_name="x", y_name="p")


def _run_master(cfg: RunConfig, out: Path) -> dict:
    coup = derive_couplings(cfg.model)
    fock = FockConfig(cfg.n_cav, cfg.n_mech)
    ops = build_operators(fock, coup, cfg.model.delta)
    psi0 = _initial_vectors(cfg, cfg.n_cav, cfg.n_mech)
    rho0 = np.outer(psi0, psi0.conj())
    grid = np.arange(0.0, cfg.tau_end + cfg.record_stride / 2, cfg.record_stride)
    series = integrate_master(
        rho0, ops, cfg.model, grid, rtol=cfg.rtol, atol=cfg.atol,
        observables={"x": ops.x, "p": ops.p, "na": ops.num_a, "nb": ops.num_b,
                     "x2": ops.x2, "p2": ops.p2},
        leak_budget=cfg.leak_budget,
    )
    obs = series.observables
    var_x = np.real(obs["x2"]) - np.real(obs["x"]) ** 2
    var_p = np.real(obs["p2"]) - np.real(obs["p"]) ** 2
    write_csv(out / "observables.csv", {
        "tau": grid,
        "x": np.real(obs["x"]), "p": np.real(obs["p"]),
        "na": np.real(obs["na"]), "nb": np.real(obs["nb"]),
        "sigma_x": np.sqrt(np.clip(var_x, 0, None)),
        "sigma_p": np.sqrt(np.clip(var_p, 0, None)),
    })
    for t in cfg.snapshot_taus:
        i = int(np.argmin(np.abs(grid - t)))
        rho = series.states[i]
        write_snapshot(out / f"rho_{t:g}.bin", rho)
        if cfg.wigner_x is not None:
            mech = partial_trace_mech(rho, cfg.n_cav, cfg.n_mech)
            _wigner_outputs(cfg, out, f"{t:g}", mech, coup.g)
    if cfg.autocorr_taus:
        rows = {"tau": [], "dtau": [], "R": []}
        for t in cfg.autocorr_taus:
            ac = autocorrelation_regression(series.states, grid, ops, cfg.model,
                                            t, cfg.autocorr_dtau.points())
            rows["tau"].extend([t] * len(ac.dtau))
            rows["dtau"].extend(ac.dtau)
            rows["R"].extend(ac.values)
        write_csv(out / "autocorrelation.csv",
                  {k: np.array(v) for k, v in rows.items()})
    return {"times": len(grid)}


def _run_qsd(cfg: RunConfig, out: Path) -> dict:
    coup = derive_couplings(cfg.model)
    fock = FockConfig(cfg.n_cav, cfg.n_mech)
    ops = build_operators(fock, coup, cfg.model.delta)
    psi0 = _initial_vectors(cfg, cfg.n_cav, cfg.n_mech)
    sched = Schedule(tau_end=cfg.tau_end, record_stride=cfg.record_stride,
                     snapshot_taus=cfg.snapshot_taus)
    ens = run_ensemble(cfg.trajectories, cfg.base_seed, psi0, ops, cfg.model,
                       sched, dt=cfg.dt, method=cfg.method,
                       leak_budget=cfg.leak_budget)
    floor = uncertainty_floor(cfg.model)
    write_csv(out / "ensemble_mean.csv", {
        "tau": ens.tau,
        "x": ens.mean("x"), "x_stderr": ens.stderr("x"),
        "p": ens.mean("p"), "p_stderr": ens.stderr("p"),
        "sigma_x": ens.mean("sigma_x"), "sigma_p": ens.mean("sigma_p"),
    })
    rec0 = ens.record(0)
    write_csv(out / "trajectory_0.csv", {
        "tau": rec0.tau, "x": rec0.x, "p": rec0.p,
        "sigma_x": rec0.sigma_x, "sigma_p": rec0.sigma_p,
        "uncertainty_product": rec0.sigma_x * rec0.sigma_p,
        "localized": (rec0.sigma_x * rec0.sigma_p < 2 * floor).astype(float),
    })
    if cfg.stroboscope:
        xs, ps = stroboscopic_quantum(rec0)
        write_csv(out / "stroboscope_0.csv", {"x": xs, "p": ps})
    for t, rho in ens.mech_rho.items():
        write_snapshot(out / f"mech_rho_{t:g}.bin", rho)
        if cfg.wigner_x is not None:
            _wigner_outputs(cfg, out, f"{t:g}", rho, coup.g)
    if cfg.autocorr_taus:
        rows = {"tau": [], "dtau": [], "R": [], "residual_bound": [], "stderr": []}
        for t in cfg.autocorr_taus:
            ac = autocorrelation_trajectories(ens, t, cfg.autocorr_dtau.points())
            rows["tau"].extend([t] * len(ac.dtau))
            rows["dtau"].extend(ac.dtau)
            rows["R"].extend(ac.values)
            rows["residual_bound"].extend(ac.residual_bound)
            rows["stderr"].extend(ac.stderr)
        write_csv(out / "autocorrelation.csv",
                  {k: np.array(v) for k, v in rows.items()})
    return {"trajectories": cfg.trajectories, "failed": list(ens.failed)}


def run(cfg: RunConfig, out_dir: str | None = None) -> Path:
    """Execute a configuration; returns the output directory."""
    out = ensure_dir(out_dir or cfg.out_dir)
    t0 = time.time()
    with open(out / "config.resolved.ini", "w") as fh:
        fh.write(format_config(cfg))
    dispatch = {"classical": _run_classical, "chart": _run_chart,
                "master": _run_master, "qsd": _run_qsd}
    info = dispatch[cfg.engine](cfg, out)
    manifest = {
        "version": __version__,
        "engine": cfg.engine,
        "base_seed": cfg.base_seed,
        "wall_clock_s": round(time.time() - t0, 3),
        **info,
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)
    return out


# --- figure playbook ----------------------------------------------------------


def _cfg(**kw) -> RunConfig:
    return RunConfig(**kw)


CASES = {"a": -0.4, "b": -1.1, "c": -0.85, "d": -0.7}


def figure_playbook(figure_id: str, desk: bool = False) -> dict:
    """Preset configurations regenerating the data behind each standard
    figure.  Desk variants shrink ensembles and horizons for quick runs."""
    mk = lambda **kw: _cfg(**kw)  # noqa: E731
    q = dict(sigma=0.1)
    # the cavity fills to ~46 photons (and blinks higher at resonance
    # crossings), so its truncation cannot shrink in desk variants; only
    # the mechanical cutoff and the ensembles do
    full_fock = dict(n_cav=104, n_mech=560)
    desk_fock = dict(n_cav=104, n_mech=352)
    fock = desk_fock if desk else full_fock
    k_ens = 24 if desk else 3000
    # shared initial condition: cantilever displaced to x = 0.9 with the
    # cavity in its mean-field steady state
    alpha_ss = (-0.5j) / (0.5 - 1j * CASES["a"])
    start = dict(alpha0=alpha_ss, beta0=0.9 / math.sqrt(2) + 0j)
    configs: dict[str, RunConfig] = {}

    if figure_id == "fig1":
        configs["chart"] = mk(
            engine="chart", model=ModelParams(delta=-0.4),
            chart_delta=GridSpec(-1.3, -0.2, 12 if desk else 45),
            chart_amp=GridSpec(0.05, 3.8, 16 if desk else 31),
            workers=4,
        )
    elif figure_id == "fig2":
        configs["classical"] = mk(
            engine="classical", model=ModelParams(delta=CASES["a"]), **start,
            tau_end=40.0 if desk else 100.0, record_stride=0.05,
        )
        configs["qsd"] = mk(
            engine="qsd", model=ModelParams(delta=CASES["a"], **q),
            **fock, **start, trajectories=k_ens, dt=2e-3,
            tau_end=40.0 if desk else 100.0,
            record_stride=0.05, base_seed=100,
        )
    elif figure_id == "fig3":
        taus = (16.0, 64.0) if desk else (16.0, 64.0, 270.0)
        configs["qsd"] = mk(
            engine="qsd", model=ModelParams(delta=CASES["a"], **q),
            **fock, **start, trajectories=k_ens, dt=2e-3,
            tau_end=(70.0 if desk else 280.0),
            record_stride=0.05, snapshot_taus=taus, base_seed=300,
            wigner_x=GridSpec(-3.5, 3.5, 141), wigner_p=GridSpec(-3.5, 3.5, 141),
            autocorr_taus=taus, autocorr_dtau=GridSpec(0.0, 25.0, 251),
        )
    elif figure_id == "fig4":
        # cantilever cat at x = +-1 with the cavity pre-filled to its
        # mean-field steady state, so the which-path measurement through the
        # cavity output acts from tau = 0
        alpha_ss = (-0.5j) / (0.5 - 1j * CASES["a"])
        configs["trajectory"] = mk(
            engine="qsd", model=ModelParams(delta=CASES["a"], **q),
            n_cav=96, n_mech=140, trajectories=1, base_seed=400,
            initial_kind="cat", alpha0=alpha_ss,
            beta0=1.0 / math.sqrt(2) + 0j, beta0_cat=-1.0 / math.sqrt(2) + 0j,
            tau_end=(0.4 if desk else 40.0), record_stride=0.001,
            snapshot_taus=(0.0, 0.001, 0.008, 0.4),
            wigner_x=GridSpec(-1.8, 1.8, 241), wigner_p=GridSpec(-1.8, 1.8, 241),
            dt=5e-4,
        )
    elif figure_id == "fig5":
        for case, delta in CASES.items():
            configs[f"case_{case}"] = mk(
                engine="qsd", model=ModelParams(delta=delta, **q),
                **fock, **start, trajectories=1, base_seed=500, dt=2e-3,
                tau_end=(60.0 if desk else 400.0), record_stride=0.05,
                stroboscope=True,
            )
    elif figure_id == "fig6":
        for sig in (0.05, 0.1):
            configs[f"sigma_{sig:g}"] = mk(
                engine="qsd", model=ModelParams(delta=CASES["d"], sigma=sig),
                **(desk_fock if desk else dict(n_cav=104, n_mech=700)),
                **start, trajectories=(12 if desk else k_ens), dt=2e-3,
                tau_end=(60.0 if desk else 300.0), record_stride=0.05,
                snapshot_taus=(60.0,) if desk else (150.0, 300.0),
                base_seed=600,
                wigner_x=GridSpec(-4.5, 4.5, 141), wigner_p=GridSpec(-4.5, 4.5, 141),
            )
    elif figure_id == "fig7":
        configs["classical"] = mk(
            engine="classical", model=ModelParams(delta=CASES["d"]), **start,
            tau_end=(60.0 if desk else 300.0), record_stride=0.05,
        )
        for sig in (0.05, 0.1):
            configs[f"sigma_{sig:g}"] = mk(
                engine="qsd", model=ModelParams(delta=CASES["d"], sigma=sig),
                **(desk_fock if desk else dict(n_cav=104, n_mech=700)),
                **start, trajectories=(12 if desk else k_ens), dt=2e-3,
                tau_end=(60.0 if desk else 300.0), record_stride=0.05,
                base_seed=700,
                autocorr_taus=(30.0,) if desk else (50.0, 150.0, 250.0),
                autocorr_dtau=GridSpec(0.0, 25.0, 251),
            )
    else:
        known = ", ".join(f"fig{i}" for i in range(1, 8))
        raise ConfigError(f"unknown figure id {figure_id!r} (known: {known})")
    return configs


# --- entry point --------------------------------------------------------------


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    updates = {}
    if args.seed_override is not None:
        updates["base_seed"] = args.seed_override
    if getattr(args, "threads", None):
        updates["workers"] = args.threads
    return dataclasses.replace(cfg, **updates) if updates else cfg


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="optomulti",
                                     description="cavity-cantilever simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a run configuration")
    p_run.add_argument("config", help="path to an INI run configuration")
    p_run.add_argument("--out-dir", default=None)
    p_run.add_argument("--seed-override", type=int, default=None)
    p_run.add_argument("--threads", type=int, default=None)

    p_val = sub.add_parser("validate", help="parse a config and echo it resolved")
    p_val.add_argument("config")

    p_play = sub.add_parser("playbook", help="emit preset figure configs")
    p_play.add_argument("figure", help="fig1 .. fig7")
    p_play.add_argument("--out-dir", default="playbook")
    p_play.add_argument("--desk", action="store_true",
                        help="reduced-size variants for quick runs")
    p_play.add_argument("--run", action="store_true", dest="execute",
                        help="run the configs after writing them")
    p_play.add_argument("--seed-override", type=int, default=None)
    p_play.add_argument("--threads", type=int, default=None)

    args = parser.parse_args(argv)
    try:
        if args.command == "validate":
            cfg = parse_config(Path(args.config).read_text())
            sys.stdout.write(format_config(cfg))
            return 0
        if args.command == "run":
            cfg = parse_config(Path(args.config).read_text())
            cfg = _apply_overrides(cfg, args)
            out = run(cfg, out_dir=args.out_dir)
            print(f"run complete: {out}")
            return 0
        if args.command == "playbook":
            configs = figure_playbook(args.figure, desk=args.desk)
            base = ensure_dir(args.out_dir)
            for name, cfg in configs.items():
                cfg = _apply_overrides(cfg, args)
                sub_dir = f"{args.figure}_{name}" + ("_desk" if args.desk else "")
                cfg = dataclasses.replace(cfg, out_dir=str(base / sub_dir))
                path = base / f"{sub_dir}.ini"
                path.write_text(format_config(cfg))
                print(f"wrote {path}")
                if args.execute:
                    run(cfg)
                    print(f"ran {sub_dir}")
            return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (TruncationLeakError, NormCollapseError) as exc:
        print(f"physics abort: {exc}", file=sys.stderr)
        return 3
    except (ConvergenceError, SimulationError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
