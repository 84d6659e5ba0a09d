"""Command-line entry point.

Subcommands: list-models, check-conditions, bounds, strong-error,
divergence, moment-bound, stability.  Settings merge with precedence
flags > config file > defaults; the fully resolved configuration is echoed
to ``manifest.txt`` in the output directory and parses back losslessly.

Exit codes: 0 success, 1 runtime failure (an ``error.txt`` is left next to
the manifest), 2 configuration errors.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, fields

import numpy as np

from . import __version__
from .analysis import (audit_catalog_entry, exit_probability_bound,
                       scheme_second_moment_bound, solution_second_moment_bound,
                       state_norm_bound)
from .errors import ConfigError, StiffSdeError
from .experiments import (divergence_demo, moment_bound_study,
                          stability_study, strong_error_study)
from .models import build_entry, catalog_defaults, catalog_labels
from .noise import TimePartition, generate
from .reporting import (format_value, read_keyvalue_file, write_csv,
                        write_text_atomic, write_trajectory_csv)
from .schemes import SchemeConfig, check_step_admissibility, run_path
from .solvers import SolverConfig

_SUBCOMMANDS = ("list-models", "check-conditions", "bounds", "strong-error",
                "divergence", "moment-bound", "stability")


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved settings of one CLI run."""

    subcommand: str
    model: str
    params: tuple          # ((name, value), ...)
    scheme: str
    theta: float
    dt: float
    T: float
    paths: int
    seed: int
    x0: float
    solver: str
    tol: float
    max_iter: int
    out: str
    workers: int
    allow_unsafe: bool
    ref_level: int
    levels: tuple
    dt_list: tuple
    steps: int
    tol_stab: float
    fine_factor: int
    radius: float
    dump_trajectory: bool

    def manifest_lines(self):
        lines = [f"# stiffsde={__version__}", f"# numpy={np.__version__}"]
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "params":
                for key, val in value:
                    lines.append(f"param.{key}={format_value(val)}")
            elif f.name in ("levels", "dt_list"):
                lines.append(f"{f.name}={','.join(format_value(v) for v in value)}")
            else:
                lines.append(f"{f.name}={format_value(value)}")
        return lines


_BASE_DEFAULTS = dict(
    model="cubic", scheme="theta_em", theta=1.0, dt=2.0 ** -6, T=1.0,
    paths=2000, seed=42, x0=1.0, solver="newton", tol=1e-12, max_iter=50,
    workers=1, allow_unsafe=False, ref_level=12, levels=(11, 9, 7, 5),
    dt_list=(0.25,), steps=100_000, tol_stab=1e-2, fine_factor=16,
    radius=50.0, dump_trajectory=False,
)

_SUB_DEFAULTS = {
    "divergence": dict(x0=5.0, paths=1000),
    "moment-bound": dict(paths=10_000),
    "stability": dict(model="dissipative", dt=0.01, paths=100),
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stiffsde",
        description="Implicit Euler-Maruyama experiments for SDEs with "
                    "super-linearly growing coefficients.")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in _SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="key=value settings file")
        p.add_argument("--model", help="catalog label, see list-models")
        p.add_argument("--param", action="append", default=None,
                       metavar="NAME=VALUE", help="model parameter override")
        p.add_argument("--scheme",
                       choices=("explicit_em", "theta_em", "split_theta_em"))
        p.add_argument("--theta", type=float)
        p.add_argument("--dt", type=float)
        p.add_argument("--T", type=float, dest="T")
        p.add_argument("--paths", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--x0", type=float)
        p.add_argument("--solver", choices=("newton", "fixed_point",
                                            "scalar_hybrid",
                                            "closed_form_cubic"))
        p.add_argument("--tol", type=float)
        p.add_argument("--max-iter", type=int, dest="max_iter")
        p.add_argument("--out", help="output directory "
                       "(default $STIFFSDE_OUT/<subcommand> or runs/<subcommand>)")
        p.add_argument("--workers", type=int)
        p.add_argument("--allow-unsafe", action=argparse.BooleanOptionalAction,
                       default=None, dest="allow_unsafe")
        p.add_argument("--ref-level", type=int, dest="ref_level")
        p.add_argument("--levels", help="comma-separated dyadic levels")
        p.add_argument("--dt-list", dest="dt_list",
                       help="comma-separated step sizes")
        p.add_argument("--steps", type=int, help="stability horizon steps")
        p.add_argument("--tol-stab", type=float, dest="tol_stab")
        p.add_argument("--fine-factor", type=int, dest="fine_factor")
        p.add_argument("--radius", type=float, help="exit-probability radius")
        p.add_argument("--dump-trajectory",
                       action=argparse.BooleanOptionalAction, default=None,
                       dest="dump_trajectory",
                       help="also write the path-0 trajectory as CSV")
    return parser


def _parse_params(values) -> dict:
    out = {}
    for item in values:
        if "=" not in item:
            raise ConfigError(f"--param expects NAME=VALUE, got {item!r}")
        key, _, value = item.partition("=")
        try:
            out[key.strip()] = float(value)
        except ValueError as exc:
            raise ConfigError(f"parameter {key!r} is not a real: {value!r}") from exc
    return out


_CONVERTERS = dict(
    model=str, scheme=str, theta=float, dt=float, T=float, paths=int,
    seed=int, x0=float, solver=str, tol=float, max_iter=int, workers=int,
    allow_unsafe=lambda s: str(s).lower() in ("1", "true", "yes"),
    ref_level=int,
    levels=lambda s: tuple(int(v) for v in str(s).split(",") if v != ""),
    dt_list=lambda s: tuple(float(v) for v in str(s).split(",") if v != ""),
    steps=int, tol_stab=float, fine_factor=int, radius=float,
    dump_trajectory=lambda s: str(s).lower() in ("1", "true", "yes"),
)

# accepted spellings for the nested solver settings in config files
_KEY_ALIASES = {"solver.method": "solver", "solver.tol": "tol",
                "solver.max_iter": "max_iter"}


def parse_and_validate(argv) -> RunConfig:
    """Merge flags > config file > defaults into a validated RunConfig."""
    args = _build_parser().parse_args(argv)
    sub = args.subcommand

    file_cfg = {}
    file_params = {}
    if args.config:
        if not os.path.exists(args.config):
            raise ConfigError(f"config file not found: {args.config}")
        for key, value in read_keyvalue_file(args.config).items():
            key = _KEY_ALIASES.get(key, key)
            if key.startswith("param."):
                file_params[key[len("param."):]] = float(value)
            elif key == "subcommand":
                if value != sub:
                    raise ConfigError(
                        f"config file is for subcommand {value!r}, not {sub!r}")
            else:
                if key not in _CONVERTERS and key != "out":
                    raise ConfigError(f"unknown config key {key!r}")
                file_cfg[key] = value

    defaults = {**_BASE_DEFAULTS, **_SUB_DEFAULTS.get(sub, {})}

    def resolve(name):
        flag = getattr(args, name, None)
        if name in ("levels", "dt_list") and isinstance(flag, str):
            flag = _CONVERTERS[name](flag)
        if flag is not None:
            return flag
        if name in file_cfg:
            return _CONVERTERS[name](file_cfg[name])
        return defaults[name]

    model = resolve("model")
    params = dict(catalog_defaults(model))
    params.update(file_params)
    if args.param:
        params.update(_parse_params(args.param))

    out_dir = args.out or file_cfg.get("out") or os.path.join(
        os.environ.get("STIFFSDE_OUT", "runs"), sub)

    cfg = RunConfig(
        subcommand=sub, model=model, params=tuple(params.items()),
        scheme=resolve("scheme"), theta=resolve("theta"), dt=resolve("dt"),
        T=resolve("T"), paths=resolve("paths"), seed=resolve("seed"),
        x0=resolve("x0"), solver=resolve("solver"), tol=resolve("tol"),
        max_iter=resolve("max_iter"), out=out_dir,
        workers=resolve("workers"), allow_unsafe=resolve("allow_unsafe"),
        ref_level=resolve("ref_level"), levels=tuple(resolve("levels")),
        dt_list=tuple(resolve("dt_list")), steps=resolve("steps"),
        tol_stab=resolve("tol_stab"), fine_factor=resolve("fine_factor"),
        radius=resolve("radius"),
        dump_trajectory=resolve("dump_trajectory"))
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    if cfg.paths < 1:
        raise ConfigError(f"paths must be positive, got {cfg.paths}")
    if cfg.workers < 1:
        raise ConfigError(f"workers must be positive, got {cfg.workers}")
    if not (cfg.T > 0.0):
        raise ConfigError(f"T must be positive, got {cfg.T}")
    entry = _entry(cfg)
    if cfg.subcommand in ("bounds", "moment-bound", "stability"):
        scheme_cfg = _scheme_cfg(cfg)
        if cfg.subcommand != "bounds":
            check_step_admissibility(scheme_cfg, entry.profile)


def _entry(cfg: RunConfig):
    return build_entry(cfg.model, **dict(cfg.params))


def _scheme_cfg(cfg: RunConfig, dt=None) -> SchemeConfig:
    solver = SolverConfig(tolerance=cfg.tol, max_iterations=cfg.max_iter,
                          method=cfg.solver)
    return SchemeConfig(kind=cfg.scheme, theta=cfg.theta,
                        dt=cfg.dt if dt is None else dt, solver=solver,
                        allow_unsafe=cfg.allow_unsafe)


def _write_manifest(cfg: RunConfig) -> None:
    os.makedirs(cfg.out, exist_ok=True)
    write_text_atomic(os.path.join(cfg.out, "manifest.txt"),
                      "\n".join(cfg.manifest_lines()) + "\n")


def config_from_manifest(path: str, subcommand: str) -> RunConfig:
    """Rebuild a RunConfig from a manifest file (lossless round trip)."""
    return parse_and_validate([subcommand, "--config", path])


def _run_list_models(cfg: RunConfig) -> str:
    lines = []
    for label in catalog_labels():
        defaults = ", ".join(f"{k}={format_value(v)}"
                             for k, v in catalog_defaults(label))
        lines.append(f"{label}: {defaults}")
    print("\n".join(lines))
    return f"{len(catalog_labels())} models"


def _run_check_conditions(cfg: RunConfig) -> str:
    entry = _entry(cfg)
    z = (lambda x: 0.5 * np.sum(np.square(x), axis=-1))
    audits = audit_catalog_entry(entry, theta=cfg.theta, dt=cfg.dt, z=z)
    rows = [(a.condition_id, a.verdict, a.worst_margin,
             " ".join(format_value(float(v)) for v in a.worst_point),
             a.probes) for a in audits]
    write_csv(os.path.join(cfg.out, "conditions.csv"), "conditions",
              [("model", cfg.model), ("theta", cfg.theta), ("dt", cfg.dt),
               ("seed", cfg.seed)],
              ["condition_id", "verdict", "worst_margin", "worst_point",
               "probes"], rows)
    n_pass = sum(a.passed for a in audits)
    return f"{n_pass}/{len(audits)} conditions pass"


def _run_bounds(cfg: RunConfig) -> str:
    entry = _entry(cfg)
    x0 = np.full(entry.model.state_dim, cfg.x0)
    sol = solution_second_moment_bound(entry.profile, x0, cfg.T)
    exitp = exit_probability_bound(entry.profile, x0, cfg.T, cfg.radius)
    sch = scheme_second_moment_bound(entry.model, entry.profile, cfg.theta,
                                     cfg.dt, cfg.T, x0)
    f0 = entry.model.drift(x0)
    F0_sq = float(np.sum(np.square(x0 - cfg.theta * cfg.dt * f0)))
    state = state_norm_bound(entry.profile, cfg.theta, cfg.dt, F0_sq)
    reports = [sol, exitp, sch]
    rows = [(r.bound_id, r.value,
             ";".join(f"{k}={format_value(float(v))}" for k, v in r.inputs))
            for r in reports]
    rows.append(("state_from_transform", state,
                 f"transform_norm_sq={format_value(F0_sq)}"))
    write_csv(os.path.join(cfg.out, "bounds.csv"), "bounds",
              [("model", cfg.model), ("theta", cfg.theta), ("dt", cfg.dt),
               ("T", cfg.T), ("x0", cfg.x0)],
              ["bound_id", "value", "inputs"], rows)
    return (f"sde_moment={sol.value:.6g} exit_probability={exitp.value:.6g} "
            f"scheme_moment={sch.value:.6g}")


def _run_strong_error(cfg: RunConfig) -> str:
    entry = _entry(cfg)
    x0 = np.full(entry.model.state_dim, cfg.x0)
    report = strong_error_study(entry, _scheme_cfg(cfg, dt=2.0 ** -cfg.ref_level),
                                cfg.T, cfg.ref_level, cfg.levels, cfg.paths,
                                x0, cfg.seed, workers=cfg.workers)
    rows = [(s.dt, s.mse, s.ci_halfwidth, s.n_paths, s.err_s1, s.err_s15)
            for s in report.levels]
    write_csv(os.path.join(cfg.out, "levels.csv"), "strong_error",
              [("fitted_slope", report.fitted_slope),
               ("fit_intercept", report.fit_intercept),
               ("reference_dt", report.reference_dt),
               ("seed", report.seed), ("model", cfg.model),
               ("theta", cfg.theta), ("T", cfg.T)],
              ["dt", "mse", "ci_halfwidth", "n_paths", "err_s1", "err_s15"],
              rows)
    return f"fitted_slope={report.fitted_slope:.4f} levels={len(report.levels)}"


def _run_divergence(cfg: RunConfig) -> str:
    entry = _entry(cfg)
    x0 = np.full(entry.model.state_dim, cfg.x0)
    report = divergence_demo(entry, cfg.dt_list, cfg.paths, x0, cfg.T,
                             cfg.seed, theta=cfg.theta, workers=cfg.workers)
    rows = [(r.scheme, r.dt, r.blowup_fraction, r.max_finite_norm,
             r.endpoint_second_moment, r.moment_is_infinite)
            for r in report.rows]
    write_csv(os.path.join(cfg.out, "divergence.csv"), "divergence",
              [("model", cfg.model), ("x0", cfg.x0), ("T", cfg.T),
               ("seed", cfg.seed), ("paths", cfg.paths)],
              ["scheme", "dt", "blowup_fraction", "max_finite_norm",
               "endpoint_second_moment", "moment_is_infinite"], rows)
    parts = [f"{r.scheme}@dt={r.dt:g}: blowup={r.blowup_fraction:.3f}"
             for r in report.rows]
    return "; ".join(parts)


def _run_moment_bound(cfg: RunConfig) -> str:
    entry = _entry(cfg)
    x0 = np.full(entry.model.state_dim, cfg.x0)
    report = moment_bound_study(entry, _scheme_cfg(cfg), cfg.T, cfg.paths,
                                x0, cfg.seed, fine_factor=cfg.fine_factor,
                                workers=cfg.workers)
    rows = list(zip(report.times, report.second_moments,
                    report.ci_halfwidths))
    write_csv(os.path.join(cfg.out, "moments.csv"), "moment_bound",
              [("sup_moment", report.sup_moment), ("sup_ci", report.sup_ci),
               ("scheme_bound", report.scheme_bound),
               ("solution_bound", report.solution_bound),
               ("fine_dt", report.fine_dt),
               ("fine_sup_moment", report.fine_sup_moment),
               ("model", cfg.model), ("seed", cfg.seed),
               ("paths", cfg.paths)],
              ["t", "second_moment", "ci_halfwidth"], rows)
    verdict = "pass" if (report.passes_scheme_bound
                         and report.passes_solution_bound) else "FAIL"
    return (f"sup_moment={report.sup_moment:.4f}+-{report.sup_ci:.4f} "
            f"scheme_bound={report.scheme_bound:.4f} "
            f"fine_sup={report.fine_sup_moment:.4f} "
            f"solution_bound={report.solution_bound:.4f} [{verdict}]")


def _run_stability(cfg: RunConfig) -> str:
    entry = _entry(cfg)
    x0 = np.full(entry.model.state_dim, cfg.x0)
    z = (lambda x: 0.5 * np.sum(np.square(x), axis=-1))
    report = stability_study(entry, _scheme_cfg(cfg), z, cfg.steps,
                             cfg.paths, x0, cfg.seed, tol_stab=cfg.tol_stab,
                             workers=cfg.workers)
    rows = [(p, report.final_norms[p], report.sup_tail_norms[p],
             report.z_finals[p], report.min_A[p],
             bool(report.final_norms[p] < report.tol_stab))
            for p in range(report.n_paths)]
    write_csv(os.path.join(cfg.out, "stability.csv"), "stability",
              [("fraction_converged", report.fraction_converged),
               ("tol_stab", report.tol_stab),
               ("audit_margin", report.audit.worst_margin),
               ("model", cfg.model), ("seed", cfg.seed),
               ("steps", cfg.steps), ("dt", cfg.dt)],
              ["path", "final_norm", "sup_tail_norm", "z_final", "min_A",
               "converged"], rows)
    trace_rows = []
    for i, step in enumerate(report.trace_steps):
        t = step * cfg.dt
        for p in range(report.n_paths):
            trace_rows.append((int(step), t, p, report.trace_norms[i, p],
                               report.trace_lasalle[i, p]))
    write_csv(os.path.join(cfg.out, "stability_traces.csv"),
              "stability_traces",
              [("paths", report.n_paths), ("dt", cfg.dt),
               ("seed", cfg.seed)],
              ["step", "t", "path", "norm", "lasalle_sum"], trace_rows)
    return (f"fraction_converged={report.fraction_converged:.3f} "
            f"lasalle_nondecreasing={report.lasalle_nondecreasing}")


_RUNNERS = {
    "list-models": _run_list_models,
    "check-conditions": _run_check_conditions,
    "bounds": _run_bounds,
    "strong-error": _run_strong_error,
    "divergence": _run_divergence,
    "moment-bound": _run_moment_bound,
    "stability": _run_stability,
}


def _dump_path_zero(cfg: RunConfig) -> None:
    """Write the trajectory of path index 0 at the configured scheme."""
    entry = _entry(cfg)
    if cfg.subcommand == "strong-error":
        dt = 2.0 ** -cfg.ref_level
        steps = int(round(cfg.T / dt))
    elif cfg.subcommand == "divergence":
        dt = cfg.dt_list[0]
        steps = int(round(cfg.T / dt))
    elif cfg.subcommand == "stability":
        dt, steps = cfg.dt, cfg.steps
    else:
        dt = cfg.dt
        steps = int(round(cfg.T / dt))
    grid = generate(TimePartition(steps * dt, steps), entry.model.noise_dim,
                    cfg.seed, path_index=0)
    traj = run_path(entry.model, _scheme_cfg(cfg, dt=dt), grid,
                    np.full(entry.model.state_dim, cfg.x0))
    write_trajectory_csv(os.path.join(cfg.out, "trajectory.csv"), traj,
                         seed=cfg.seed)


def execute(cfg: RunConfig) -> int:
    """Run a validated config: manifest first, then artifacts, then summary."""
    if cfg.subcommand == "list-models":
        _RUNNERS[cfg.subcommand](cfg)
        return 0
    _write_manifest(cfg)
    try:
        summary = _RUNNERS[cfg.subcommand](cfg)
        if cfg.dump_trajectory and cfg.subcommand in (
                "strong-error", "divergence", "moment-bound", "stability"):
            _dump_path_zero(cfg)
    except Exception as exc:
        write_text_atomic(os.path.join(cfg.out, "error.txt"),
                          f"{type(exc).__name__}: {exc}\n")
        raise
    print(f"{cfg.subcommand}: {summary}")
    return 0


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cfg = parse_and_validate(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        return execute(cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except StiffSdeError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
