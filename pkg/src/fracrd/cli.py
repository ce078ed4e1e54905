"""Command-line front end: ``fracrd run|converge|verify|presets``.

Config files are INI-style: ``[section]`` headers and one ``key = value`` per
line.  Lists are comma separated; mesh sizes may be written as fractions.

    [model]    preset, s, N, d, alpha, beta, m
    [domain]   a, b, n
    [time]     T, k
    [stepper]  fp_tol, fp_max_iters, blowup_threshold
    [initial]  profile (getoor | constant | bump | zero), scale
    [output]   dir, stride, p, threads
    [converge] h

Exit codes: 0 success, 1 configuration error, 2 blow-up, 3 fixed-point
failure, 4 verification failure.
"""

import argparse
import configparser
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np
from threadpoolctl import threadpool_limits

from . import artifacts
from .analysis import StudyError, convergence_study
from .errors import ConfigError, DomainError
from .operator import FracOperator, Mesh1D
from .systems import EXP_PARAMS, PRESET_NAMES, getoor_profile, make_preset
from .timestepper import StepperConfig, TimeGrid, solve_forward

EXIT_OK, EXIT_CONFIG, EXIT_BLOWUP, EXIT_FIXED_POINT, EXIT_VERIFY = 0, 1, 2, 3, 4

SCHEMA = {
    "model": {"preset", "s", "N", "d", "alpha", "beta", "m"},
    "domain": {"a", "b", "n"},
    "time": {"T", "k"},
    "stepper": {"fp_tol", "fp_max_iters", "blowup_threshold"},
    "initial": {"profile", "scale"},
    "output": {"dir", "stride", "p", "threads"},
    "converge": {"h"},
}
PROFILES = ("getoor", "constant", "bump", "zero")
DEFAULT_LADDER = (1 / 64, 1 / 128, 1 / 256, 1 / 512)


@dataclass(frozen=True)
class RunConfig:
    preset: str = "s_exp"
    s: float = 0.75
    N: int = 1
    d: Optional[tuple] = None
    alpha: Optional[tuple] = None
    beta: Optional[float] = None
    m: Optional[int] = None
    a: float = -1.0
    b: float = 1.0
    n: int = 255
    T: float = 1.0
    k: float = 1e-2
    stepper: StepperConfig = field(default_factory=StepperConfig)
    profile: str = "getoor"
    scale: Optional[tuple] = None
    out_dir: str = "out"
    stride: int = 10
    p: float = 2.0
    threads: Optional[int] = None
    h_list: tuple = DEFAULT_LADDER

    def __post_init__(self):
        if self.preset not in PRESET_NAMES:
            raise ConfigError(f"unknown preset {self.preset!r}; choose from {', '.join(PRESET_NAMES)}")
        if not 0 < self.s < 1:
            raise ConfigError(f"s must lie in (0, 1), got {self.s}")
        if self.N != 1:
            raise ConfigError("only N = 1 is supported")
        if not self.a < self.b:
            raise ConfigError(f"need a < b, got ({self.a}, {self.b})")
        if self.n < 1:
            raise ConfigError(f"n must be >= 1, got {self.n}")
        if self.profile not in PROFILES:
            raise ConfigError(f"unknown profile {self.profile!r}; choose from {', '.join(PROFILES)}")
        if self.stride < 1:
            raise ConfigError("stride must be >= 1")
        if not self.p >= 1:
            raise ConfigError(f"p must be >= 1, got {self.p}")
        if self.threads is not None and self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if len(self.h_list) < 3:
            raise ConfigError("a convergence study needs at least three mesh sizes")
        if any(not 0 < h < 1 for h in self.h_list):
            raise ConfigError("mesh sizes must lie in (0, 1)")
        try:
            TimeGrid(self.T, self.k)
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc


def _num(text, kind=float):
    try:
        return kind(Fraction(text.strip())) if kind is float else kind(text.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"cannot read {text!r} as {kind.__name__}") from exc


def _list(text):
    return tuple(_num(v) for v in text.split(",") if v.strip())


def parse_config(text):
    """Parse config text into a RunConfig; unknown sections or keys are errors."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    kw, step = {}, {}
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key, val in cp.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            if section == "stepper":
                step[key] = _num(val, int) if key == "fp_max_iters" else _num(val)
            elif key in ("preset", "profile"):
                kw[key] = val.strip()
            elif key == "dir":
                kw["out_dir"] = val.strip()
            elif key in ("d", "alpha", "scale"):
                kw[key] = _list(val)
            elif key == "h":
                kw["h_list"] = _list(val)
            elif key in ("N", "m", "n", "stride", "threads"):
                kw[key] = _num(val, int)
            else:
                kw[key] = _num(val)
    try:
        kw["stepper"] = StepperConfig(**step)
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc
    return RunConfig(**kw)


def load_config(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def build_preset(cfg):
    try:
        return make_preset(cfg.preset, s=cfg.s, d=cfg.d, alpha=cfg.alpha, beta=cfg.beta,
                           m=cfg.m, N=cfg.N)
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc


def initial_data(cfg, mesh, preset):
    scale = preset.initial_scale if cfg.scale is None else cfg.scale
    if len(scale) != preset.system.m:
        raise ConfigError(f"{len(scale)} initial scales for {preset.system.m} species")
    x = mesh.nodes
    y = (x - 0.5 * (mesh.a + mesh.b)) / (0.5 * (mesh.b - mesh.a))  # mapped to (-1, 1)
    if cfg.profile == "getoor":
        shape = getoor_profile(y, cfg.s)
    elif cfg.profile == "constant":
        shape = np.ones_like(x)
    elif cfg.profile == "bump":
        z = np.clip(1.0 - 4.0 * y * y, 0.0, None)
        with np.errstate(divide="ignore"):
            shape = np.where(z > 0, np.exp(1.0 - 1.0 / np.where(z > 0, z, 1.0)), 0.0)
    else:
        shape = np.zeros_like(x)
    return np.stack([c * shape for c in scale])


def _report_items(cfg, mesh, preset, report):
    m = preset.system.m
    items = [
        ("preset", cfg.preset), ("s", cfg.s), ("N", cfg.N), ("m", m),
        ("d", ", ".join(artifacts.fmt(v) for v in preset.d)),
        ("domain", f"{artifacts.fmt(mesh.a)}, {artifacts.fmt(mesh.b)}"),
        ("n", mesh.n), ("h", mesh.h), ("T", cfg.T), ("k", cfg.k),
        ("fp_tol", cfg.stepper.fp_tol), ("blowup_threshold", cfg.stepper.blowup_threshold),
        ("profile", cfg.profile), ("p", cfg.p),
        ("status", report.status), ("steps_completed", report.steps),
        ("final_time", float(report.times[-1])),
        ("max_fp_iters", int(report.fp_iters.max())),
        ("max_contraction_ratio", float(np.nanmax(report.contraction_ratios))
         if np.any(np.isfinite(report.contraction_ratios)) else float("nan")),
    ]
    for i in range(m):
        items.append((f"final_linf_{i + 1}", float(report.linf_norms[i, -1])))
    for i in range(m):
        items.append((f"min_value_{i + 1}", float(report.min_values[i].min())))
    if report.weighted_mass is not None:
        items += [("weighted_mass_initial", float(report.weighted_mass[0])),
                  ("weighted_mass_final", float(report.weighted_mass[-1]))]
    if report.blowup is not None:
        t, sp, val = report.blowup
        items += [("blowup_time", float(t)), ("blowup_species", sp + 1), ("blowup_value", float(val))]
    if report.failure_time is not None:
        items.append(("failure_time", float(report.failure_time)))
    return items


def _limits(cfg):
    return threadpool_limits(limits=cfg.threads)


def cmd_run(path, out=None):
    out = sys.stdout if out is None else out
    cfg = load_config(path)
    preset = build_preset(cfg)
    mesh = Mesh1D(cfg.a, cfg.b, cfg.n)
    if cfg.preset == "manufactured" and (cfg.a, cfg.b) != (-1.0, 1.0):
        raise ConfigError("the manufactured preset lives on (-1, 1)")
    u0 = initial_data(cfg, mesh, preset)
    tgrid = TimeGrid(cfg.T, cfg.k)
    with _limits(cfg):
        op = FracOperator.build(mesh, cfg.s)
        ops = [op.with_diffusion(d) for d in preset.d]
        traj = solve_forward(u0, ops, preset.system, tgrid, cfg.stepper,
                             stride=cfg.stride, p=cfg.p)
    outdir = Path(cfg.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    rep = traj.report
    artifacts.write_timeseries(outdir / "timeseries.csv", rep)
    for st in traj.states:
        artifacts.write_snapshot(outdir / artifacts.snapshot_name(st.t), mesh, st)
    artifacts.write_keyvalue(outdir / "report.txt", _report_items(cfg, mesh, preset, rep))
    artifacts.write_svg(outdir / "norms.svg", artifacts.norms_svg(rep))
    print(f"{cfg.preset}: {rep.status} after {rep.steps} steps (t = {rep.times[-1]:.6g}); "
          f"artifacts in {outdir}", file=out)
    if rep.status == "blowup":
        t, sp, val = rep.blowup
        print(f"blow-up of species {sp + 1} at t = {t:.6g} (value {val:.3e})", file=out)
        return EXIT_BLOWUP
    if rep.status == "fp_failure":
        print(f"fixed-point iteration failed at t = {rep.failure_time:.6g}", file=out)
        return EXIT_FIXED_POINT
    return EXIT_OK


def cmd_converge(path, out=None):
    out = sys.stdout if out is None else out
    cfg = load_config(path)
    if cfg.preset != "manufactured":
        raise ConfigError("converge needs preset = manufactured")
    d1, d2, beta = EXP_PARAMS.get(cfg.s, (1.0, 2.0, 3.0))
    if cfg.d is not None:
        if len(cfg.d) != 2:
            raise ConfigError("manufactured preset needs two diffusions")
        d1, d2 = cfg.d
    if cfg.beta is not None:
        beta = cfg.beta
    with _limits(cfg):
        fit = convergence_study(cfg.s, cfg.h_list, T=cfg.T, k=cfg.k, params=(d1, d2, beta),
                                cfg=cfg.stepper)
    outdir = Path(cfg.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    artifacts.write_convergence(outdir / "convergence.csv", fit)
    artifacts.write_svg(outdir / "convergence.svg", artifacts.convergence_svg(fit))
    for h, e in zip(fit.h_values, fit.errors):
        print(f"h = {h:.6g}  L2 error = {e:.6e}", file=out)
    print(f"fitted slope {fit.fitted_slope:.4f} (R^2 = {fit.r_squared:.4f})", file=out)
    return EXIT_OK


def cmd_verify(out=None, extra_systems=()):
    out = sys.stdout if out is None else out
    from .verify import format_table, run_checks

    results = run_checks(extra_systems)
    print(format_table(results), file=out)
    ok = all(r.passed for r in results)
    print("all checks passed" if ok else "some checks FAILED", file=out)
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_presets(out=None):
    out = sys.stdout if out is None else out
    for name in PRESET_NAMES:
        pre = make_preset(name)
        dd = ", ".join(f"{v:g}" for v in pre.d)
        print(f"{name:<16} m={pre.system.m}  d=({dd})  {pre.description}", file=out)
    return EXIT_OK


def main(argv=None):
    parser = argparse.ArgumentParser(prog="fracrd",
                                     description="Fractional reaction-diffusion simulations.")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="integrate one configuration")
    p_run.add_argument("config")
    p_conv = sub.add_parser("converge", help="manufactured-solution convergence study")
    p_conv.add_argument("config")
    sub.add_parser("verify", help="run the built-in self checks")
    sub.add_parser("presets", help="list the available presets")
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args.config)
        if args.command == "converge":
            return cmd_converge(args.config)
        if args.command == "verify":
            return cmd_verify()
        return cmd_presets()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StudyError as exc:
        print(f"study failed: {exc}", file=sys.stderr)
        return EXIT_BLOWUP


if __name__ == "__main__":
    sys.exit(main())
