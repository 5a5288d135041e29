"""Command-line driver.

Every subcommand reads an optional YAML config (``--config``) whose nesting
mirrors :meth:`RunConfig.to_dict`; command-line flags override file values.
Exit status: 0 success, 1 configuration error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .compare import OBSERVABLES, compare_report
from .ensemble import DEFAULT_TRAJECTORIES, EnsembleConfig, run_ensemble
from .errors import ConfigError, NumericalError
from .exact import exact_timeseries
from .meanfield import ALIGN_TOL, SADDLE, IntegratorConfig, tdhf_timeseries
from .model import ModelParams, landscape_scan
from .output import FORMATS, emit_timeseries, gnuplot_script, render_json, write_text

SOLVERS = ("hf-scan", "exact", "tdhf", "smf", "compare")
PAPER_CHI = (0.5, 1.8, 5.0)

DEFAULTS = {
    "params": {"n_particles": 40, "chi": 0.5, "epsilon": 1.0},
    "integrator": {"scheme": "rk2", "dt": 0.01, "t_end": 10.0},
    "output_interval": 0.1,
    "ensemble": {"n_trajectories": DEFAULT_TRAJECTORIES, "master_seed": 0, "antithetic": False, "workers": 1},
    "scan": {"phi": 0.0, "alpha_range": [-math.pi / 2, math.pi / 2, 400]},
    "tdhf": {"j0": list(SADDLE)},
    "compare": {"early": [0.0, 10.0], "late": [10.0, 50.0]},
    "output": {"path": None, "format": "csv", "plot_script": None},
}


@dataclass(frozen=True)
class RunConfig:
    solver: str
    params: ModelParams
    integrator: IntegratorConfig
    output_interval: float = 0.1
    n_trajectories: int = DEFAULT_TRAJECTORIES
    master_seed: int = 0
    antithetic: bool = False
    workers: int = 1
    phi: float = 0.0
    alpha_range: tuple = (-math.pi / 2, math.pi / 2, 400)
    j0: tuple = SADDLE
    early_window: tuple | None = (0.0, 10.0)
    late_window: tuple | None = (10.0, 50.0)
    output_path: str | None = None
    format: str = "csv"
    plot_script: str | None = None
    explicit_windows: frozenset = field(default=frozenset(), compare=False)

    def __post_init__(self):
        if self.solver not in SOLVERS:
            raise ConfigError(f"unknown solver {self.solver!r}")
        if self.format not in FORMATS:
            raise ConfigError(f"unknown format {self.format!r}; choose csv or json")
        if not (math.isfinite(self.output_interval) and self.output_interval > 0):
            raise ConfigError(f"output interval must be positive, got {self.output_interval!r}")
        ratio = self.output_interval / self.integrator.dt
        if round(ratio) < 1 or abs(ratio - round(ratio)) > ALIGN_TOL * ratio:
            raise ConfigError(
                f"output interval {self.output_interval} is not an integer multiple of dt={self.integrator.dt}"
            )
        if len(self.j0) != 3:
            raise ConfigError("j0 needs three components")
        lo, hi, n = self.alpha_range
        if int(n) != n or n < 2 or not lo < hi:
            raise ConfigError(f"alpha range needs lo < hi and >= 2 points, got {lo}:{hi}:{n}")
        if int(self.workers) != self.workers or self.workers < 1:
            raise ConfigError(f"workers must be a positive integer, got {self.workers!r}")

    @property
    def sample_times(self) -> np.ndarray:
        n = int(math.floor(self.integrator.t_end / self.output_interval * (1 + ALIGN_TOL) + ALIGN_TOL))
        return self.output_interval * np.arange(n + 1)

    @property
    def ensemble(self) -> EnsembleConfig:
        return EnsembleConfig(
            integrator=self.integrator,
            sample_times=tuple(self.sample_times),
            n_trajectories=self.n_trajectories,
            master_seed=self.master_seed,
            antithetic=self.antithetic,
        )

    def windows(self):
        """Comparison windows, with defaults clipped to the simulated range."""
        t_end = self.integrator.t_end
        out = []
        for name, win in (("early", self.early_window), ("late", self.late_window)):
            if win is None or name in self.explicit_windows:
                out.append(win)
                continue
            lo, hi = win[0], min(win[1], t_end)
            out.append((lo, hi) if hi > lo else None)
        return tuple(out)

    def to_dict(self) -> dict:
        return {
            "solver": self.solver,
            "params": {"n_particles": self.params.n_particles, "chi": self.params.chi,
                       "epsilon": self.params.epsilon},
            "integrator": {"scheme": self.integrator.scheme, "dt": self.integrator.dt,
                           "t_end": self.integrator.t_end},
            "output_interval": self.output_interval,
            "ensemble": {"n_trajectories": self.n_trajectories, "master_seed": self.master_seed,
                         "antithetic": self.antithetic, "workers": self.workers},
            "scan": {"phi": self.phi, "alpha_range": list(self.alpha_range)},
            "tdhf": {"j0": list(self.j0)},
            "compare": {"early": list(self.early_window) if self.early_window else None,
                        "late": list(self.late_window) if self.late_window else None},
            "output": {"path": self.output_path, "format": self.format, "plot_script": self.plot_script},
        }

    @classmethod
    def from_dict(cls, d: dict, explicit_windows=frozenset()) -> "RunConfig":
        _check_keys(d, {**DEFAULTS, "solver": None}, "config")
        merged = _merge(DEFAULTS, d)
        try:
            p, i, e = merged["params"], merged["integrator"], merged["ensemble"]
            cmp, out = merged["compare"], merged["output"]
            return cls(
                solver=merged.get("solver", "exact"),
                params=ModelParams(int(p["n_particles"]), float(p["chi"]), float(p["epsilon"])),
                integrator=IntegratorConfig(str(i["scheme"]), float(i["dt"]), float(i["t_end"])),
                output_interval=float(merged["output_interval"]),
                n_trajectories=_as_int(e["n_trajectories"], "n_trajectories"),
                master_seed=_as_int(e["master_seed"], "seed"),
                antithetic=bool(e["antithetic"]),
                workers=_as_int(e["workers"], "workers"),
                phi=float(merged["scan"]["phi"]),
                alpha_range=tuple(float(x) for x in merged["scan"]["alpha_range"][:2])
                + (_as_int(merged["scan"]["alpha_range"][2], "alpha points"),),
                j0=tuple(float(x) for x in merged["tdhf"]["j0"]),
                early_window=_window(cmp["early"]),
                late_window=_window(cmp["late"]),
                output_path=out["path"],
                format=str(out["format"]),
                plot_script=out["plot_script"],
                explicit_windows=frozenset(explicit_windows),
            )
        except (TypeError, ValueError, IndexError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"malformed config value: {exc}") from exc


def _as_int(x, name):
    if isinstance(x, bool) or float(x) != int(float(x)):
        raise ConfigError(f"{name} must be an integer, got {x!r}")
    return int(float(x))


def _window(w):
    if w is None:
        return None
    if len(w) != 2:
        raise ConfigError(f"a window needs two bounds, got {w!r}")
    return (float(w[0]), float(w[1]))


def _check_keys(d, template, where):
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be a mapping, got {type(d).__name__}")
    for key, value in d.items():
        if key not in template:
            raise ConfigError(f"unknown key {where}.{key}")
        if isinstance(template[key], dict):
            _check_keys(value, template[key], f"{where}.{key}")


def _merge(base, over):
    out = copy.deepcopy(base)
    for key, value in over.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


# flag destination -> path in the nested config
FLAG_KEYS = {
    "n": ("params", "n_particles"),
    "chi": ("params", "chi"),
    "epsilon": ("params", "epsilon"),
    "dt": ("integrator", "dt"),
    "t_end": ("integrator", "t_end"),
    "scheme": ("integrator", "scheme"),
    "out_interval": ("output_interval",),
    "traj": ("ensemble", "n_trajectories"),
    "seed": ("ensemble", "master_seed"),
    "antithetic": ("ensemble", "antithetic"),
    "workers": ("ensemble", "workers"),
    "phi": ("scan", "phi"),
    "alpha_range": ("scan", "alpha_range"),
    "j0": ("tdhf", "j0"),
    "early_window": ("compare", "early"),
    "late_window": ("compare", "late"),
    "format": ("output", "format"),
    "out": ("output", "path"),
    "plot_script": ("output", "plot_script"),
}

# value-taking flags whose values may start with '-'
_SIGNED_VALUE_FLAGS = ("--alpha-range", "--j0", "--early-window", "--late-window", "--chi", "--phi")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def _floats(sep, count=None):
    def parse(text):
        try:
            vals = [float(x) for x in text.split(sep)]
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected numbers separated by '{sep}', got {text!r}")
        if count is not None and len(vals) != count:
            raise argparse.ArgumentTypeError(f"expected {count} values separated by '{sep}', got {text!r}")
        return vals
    return parse


def _common_flags(p):
    s = argparse.SUPPRESS
    p.add_argument("--config", metavar="PATH", help="YAML run configuration")
    p.add_argument("--n", type=int, default=s, help="particle number N (default 40)")
    p.add_argument("--chi", type=float, default=s, help="coupling chi = V(N-1)/eps (default 0.5)")
    p.add_argument("--epsilon", type=float, default=s, help="level splitting (default 1)")
    p.add_argument("--format", choices=FORMATS, default=s)
    p.add_argument("--out", metavar="PATH", default=s, help="output file (default stdout)")


def _time_flags(p):
    s = argparse.SUPPRESS
    p.add_argument("--dt", type=float, default=s, help="integrator step (default 0.01)")
    p.add_argument("--t-end", type=float, default=s, help="final time (default 10)")
    p.add_argument("--out-interval", type=float, default=s, help="output cadence, multiple of dt (default 0.1)")
    p.add_argument("--scheme", choices=("rk2", "rk4"), default=s)
    p.add_argument("--plot-script", metavar="PATH", default=s, help="also write a gnuplot script")


def _ensemble_flags(p):
    s = argparse.SUPPRESS
    p.add_argument("--traj", type=int, default=s, help="number of trajectories (default 100000)")
    p.add_argument("--seed", type=int, default=s, help="master seed (default 0)")
    p.add_argument("--antithetic", action="store_true", default=s, help="pair each draw with its mirror")
    p.add_argument("--workers", type=int, default=s, help="worker processes (default 1)")


def build_parser():
    parser = _Parser(prog="lmg-smf", description="Exact, TDHF and stochastic mean-field dynamics of the LMG model.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("hf-scan", help="Hartree-Fock energy versus alpha")
    _common_flags(p)
    p.add_argument("--phi", type=float, default=argparse.SUPPRESS)
    p.add_argument("--alpha-range", type=_floats(":", 3), default=argparse.SUPPRESS, metavar="LO:HI:N")

    p = sub.add_parser("exact", help="exact evolution from |j,-j>")
    _common_flags(p)
    _time_flags(p)

    p = sub.add_parser("tdhf", help="single mean-field trajectory")
    _common_flags(p)
    _time_flags(p)
    p.add_argument("--j0", type=_floats(",", 3), default=argparse.SUPPRESS, metavar="JX,JY,JZ",
                   help="initial scaled spin (default 0,0,-0.5)")

    p = sub.add_parser("smf", help="stochastic mean-field ensemble")
    _common_flags(p)
    _time_flags(p)
    _ensemble_flags(p)

    p = sub.add_parser("compare", help="exact and SMF side by side with deviation summary")
    _common_flags(p)
    _time_flags(p)
    _ensemble_flags(p)
    p.add_argument("--early-window", type=_floats(":", 2), default=argparse.SUPPRESS, metavar="LO:HI")
    p.add_argument("--late-window", type=_floats(":", 2), default=argparse.SUPPRESS, metavar="LO:HI")

    sub.add_parser("verify", help="run the built-in invariant checks")
    return parser


def _join_signed_values(argv):
    out, i = [], 0
    while i < len(argv):
        if argv[i] in _SIGNED_VALUE_FLAGS and i + 1 < len(argv):
            out.append(f"{argv[i]}={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def load_config(args) -> RunConfig:
    data = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        try:
            data = yaml.safe_load(path.read_text()) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} must hold a mapping at top level")
    data = dict(data)
    data["solver"] = args.command
    for dest, keys in FLAG_KEYS.items():
        if dest not in vars(args):
            continue
        node = data
        for k in keys[:-1]:
            node = node.setdefault(k, {})
        node[keys[-1]] = getattr(args, dest)
    cmp = data.get("compare", {}) if isinstance(data.get("compare"), dict) else {}
    explicit = {name for name in ("early", "late") if name in cmp}
    return RunConfig.from_dict(data, explicit_windows=explicit)


def _metadata(cfg: RunConfig, **extra):
    meta = {
        "solver": cfg.solver,
        "params": {"n_particles": cfg.params.n_particles, "chi": cfg.params.chi, "epsilon": cfg.params.epsilon},
    }
    if cfg.solver != "hf-scan":
        meta.update(scheme=cfg.integrator.scheme, dt=cfg.integrator.dt, t_end=cfg.integrator.t_end)
    if cfg.solver in ("smf", "compare"):
        meta.update(seed=cfg.master_seed, n_trajectories=cfg.n_trajectories, antithetic=cfg.antithetic)
    meta.update(extra)
    return meta


def _note(msg):
    print(msg, file=sys.stderr)


def _write_plot_script(cfg, columns, title):
    if cfg.plot_script and cfg.output_path and cfg.format == "csv":
        write_text(gnuplot_script(cfg.output_path, title, columns), cfg.plot_script)
    elif cfg.plot_script:
        _note("plot script skipped: it needs --out with --format csv")


def _run_hf_scan(cfg):
    lo, hi, n = cfg.alpha_range
    points = landscape_scan(cfg.params, lo, hi, n, cfg.phi)
    rows = [{"alpha": p.alpha, "phi": p.phi, "energy": p.energy} for p in points]
    emit_timeseries(rows, cfg.format, cfg.output_path, _metadata(cfg), columns=("alpha", "phi", "energy"))


def _run_series(cfg):
    times = cfg.sample_times
    if cfg.solver == "exact":
        series = exact_timeseries(cfg.params, times)
        meta = _metadata(cfg)
        meta.pop("scheme")
        meta.pop("dt")
    elif cfg.solver == "tdhf":
        series = tdhf_timeseries(cfg.params, cfg.integrator, times, cfg.j0)
        meta = _metadata(cfg, j0=list(cfg.j0))
    else:
        series = run_ensemble(cfg.params, cfg.ensemble, workers=cfg.workers)
        meta = _metadata(cfg)
        _note(f"worst conservation drift: spin length^2 {series.max_drift[0]:.3e}, "
              f"energy/particle {series.max_drift[1]:.3e}")
    emit_timeseries(series.rows(), cfg.format, cfg.output_path, meta)
    _write_plot_script(cfg, ("Jz",) if cfg.solver != "exact" else ("var_x", "var_y", "var_z"),
                       f"{cfg.solver} N={cfg.params.n_particles} chi={cfg.params.chi}")


def _run_compare(cfg):
    times = cfg.sample_times
    exact = exact_timeseries(cfg.params, times)
    smf = run_ensemble(cfg.params, cfg.ensemble, workers=cfg.workers)
    early, late = cfg.windows()
    report = compare_report(exact, smf, early, late)
    summary = report.summary()
    rows = report.rows()
    columns = ("t",) + tuple(f"{k}_{s}" for k in OBSERVABLES for s in ("exact", "smf"))
    if cfg.format == "json":
        doc = json.loads(render_json(rows, _metadata(cfg), columns=columns))
        doc["summary"] = summary
        write_text(json.dumps(doc, indent=1) + "\n", cfg.output_path)
    else:
        emit_timeseries(rows, "csv", cfg.output_path, columns=columns)
    if early:
        _note(f"max |exact - smf| over t in [{early[0]:g}, {early[1]:g}]:")
        for k, v in report.max_deviation.items():
            _note(f"  {k:6s} {v:.6g}")
    if late:
        _note(f"time averages over t in [{late[0]:g}, {late[1]:g}] (exact, smf, |diff|):")
        for k in OBSERVABLES:
            _note(f"  {k:6s} {report.reference_average[k]:.6g} {report.candidate_average[k]:.6g} "
                  f"{report.average_deviation[k]:.6g}")


def _run_verify():
    from .verify import run_checks

    failed = 0
    for name, ok, detail in run_checks():
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
        failed += not ok
    return 0 if not failed else 2


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(_join_signed_values(argv))
        if args.command == "verify":
            return _run_verify()
        cfg = load_config(args)
        if cfg.solver == "hf-scan":
            _run_hf_scan(cfg)
        elif cfg.solver == "compare":
            _run_compare(cfg)
        else:
            _run_series(cfg)
    except ConfigError as exc:
        _note(f"error: {exc}")
        return 1
    except NumericalError as exc:
        _note(f"numerical failure: {exc}")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
