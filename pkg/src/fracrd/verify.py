"""Self-check bundle behind ``fracrd verify``.

Every check is cheap (small meshes, short horizons) and independent of the
others: one failing check never prevents the rest from running.
"""

from dataclasses import dataclass

import numpy as np

from .analysis import (cn_local_error, check_comparison, getoor_galerkin_error,
                       getoor_residual, mass_is_monotone)
from .operator import FracOperator, Mesh1D
from .systems import (ChemParams, ExpParams, chemistry, check_mass, check_quasi_positivity,
                      check_triangular, getoor_profile, make_preset, s_exp, triangular_demo,
                      zero_system)
from .timestepper import StepperConfig, TimeGrid, solve_dual, solve_forward

S_VALUES = (0.25, 0.5, 0.75)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _getoor():
    lines, ok = [], True
    for s in S_VALUES:
        res = getoor_residual(Mesh1D(-1.0, 1.0, 64), s)
        errs = [getoor_galerkin_error(Mesh1D(-1.0, 1.0, n), s) for n in (32, 64, 128)]
        good = res <= 0.10 and errs[0] > errs[1] > errs[2]
        ok &= good
        lines.append(f"s={s}: residual {res:.3%}, galerkin L2 {errs[-1]:.2e}")
    return ok, "; ".join(lines)


def psd_symmetry(A, vectors=1000, rng=0):
    """Exact symmetry plus v^T A v >= -1e-12 |v|^2 max|A| on random vectors."""
    V = np.random.default_rng(rng).standard_normal((vectors, A.shape[0]))
    quad = np.einsum("ij,jk,ik->i", V, A, V)
    floor = -1e-12 * np.einsum("ij,ij->i", V, V) * np.abs(A).max()
    return bool(np.array_equal(A, A.T)) and bool(np.all(quad >= floor)), float((quad / -floor).min())


def _psd():
    ok, worst = True, np.inf
    for s in S_VALUES:
        good, w = psd_symmetry(FracOperator.build(Mesh1D(-1.0, 1.0, 64), s).A)
        ok &= good
        worst = min(worst, w)
    return ok, f"min v'Av / (1e-12 |v|^2 max|A|) = {worst:.3g}"


def _comparison():
    mesh = Mesh1D(-1.0, 1.0, 64)
    tgrid = TimeGrid(0.5, 1e-3)
    cfg = StepperConfig()
    ok, parts = True, []
    for s in S_VALUES:
        op = FracOperator.build(mesh, s)
        cases = ((getoor_profile(mesh.nodes, s), 0.0), (np.zeros(mesh.n), -1.0),
                 (np.full(mesh.n, 2.0), 0.0))
        for w0, h in cases:
            rep = check_comparison(op, tgrid, cfg, w0, h)
            ok &= rep.passed
            if not rep.passed:
                parts.append(f"s={s} h={h}: overshoot {rep.overshoot:.2e} "
                             f"at t={rep.worst_time}, node {rep.worst_node}")
    return ok, "; ".join(parts) or "9 cases, no overshoot beyond allowance"


def _mass():
    mesh = Mesh1D(-1.0, 1.0, 64)
    cfg = StepperConfig()
    tgrid = TimeGrid(1.0, 1e-2)
    ok, worst = True, -np.inf
    for name in ("chemistry", "s_exp"):
        pre = make_preset(name)
        op = FracOperator.build(mesh, 0.5)
        u0 = np.stack([c * getoor_profile(mesh.nodes, 0.5) for c in pre.initial_scale])
        traj = solve_forward(u0, [op.with_diffusion(d) for d in pre.d], pre.system, tgrid, cfg)
        good, inc, _ = mass_is_monotone(traj.report, tgrid.k, cfg.fp_tol, pre.system.mass_vector)
        ok &= good and traj.report.completed
        worst = max(worst, inc)
    return ok, f"largest per-step increase {worst:.2e}"


def _dual():
    mesh = Mesh1D(-1.0, 1.0, 32)
    op = FracOperator.build(mesh, 0.5)
    tgrid = TimeGrid(0.2, 1e-2)
    t = tgrid.times[:, None]
    phi = np.cos(3 * t) * getoor_profile(mesh.nodes, 0.5)[None, :]
    dual = solve_dual(phi, 1.5, op, tgrid)
    fwd = solve_forward(np.zeros((1, mesh.n)), [op.with_diffusion(1.5)], zero_system(1), tgrid,
                        forcing=phi[::-1, None, :])
    same = all(np.array_equal(z.U, w.U) for z, w in zip(dual.states, reversed(fwd.states)))
    terminal = not np.any(dual.states[-1].U)
    return same and terminal, "Z(t_j) equals forward w(T - t_j) bit for bit"


def _local_order():
    mesh = Mesh1D(-1.0, 1.0, 32)
    ratios = []
    for s in S_VALUES:
        op = FracOperator.build(mesh, s)
        u0 = getoor_profile(mesh.nodes, s)
        ratios.append(cn_local_error(op, u0, 2e-3) / cn_local_error(op, u0, 1e-3))
    ok = all(5.6 <= r <= 10.4 for r in ratios)
    return ok, "error ratios " + ", ".join(f"{r:.2f}" for r in ratios) + " (target 8 +- 30%)"


def _structural(system, samples=20_000):
    reports = [check_quasi_positivity(system, samples)]
    if system.mass_vector is not None:
        reports.append(check_mass(system, samples))
    if system.triangular is not None:
        reports.append(check_triangular(system, samples))
    failed = [r for r in reports if not r.passed]
    detail = ", ".join(f"{r.name} {'ok' if r.passed else 'FAIL'}" for r in reports)
    if failed:
        w = failed[0].witness
        detail += f"; witness {np.array2string(w, precision=3)}" if w is not None else ""
    return not failed, detail


def shipped_systems():
    systems = [make_preset(name).system for name in ("chemistry", "s_exp", "manufactured",
                                                      "triangular_demo", "zero")]
    systems += [chemistry(ChemParams(alpha=a)) for a in ((1, 1, 3), (2, 2, 1), (2, 2, 3))]
    systems += [s_exp(ExpParams(beta=5.0)), triangular_demo(5)]
    return systems


CHECKS = (
    ("getoor identity", _getoor),
    ("psd + symmetry", _psd),
    ("comparison principle", _comparison),
    ("mass monotonicity", _mass),
    ("dual-forward equivalence", _dual),
    ("cn local order", _local_order),
)


def run_checks(extra_systems=()):
    """All checks, in a fixed order; structural checks get one row per system."""
    results = []
    for name, fn in CHECKS:
        try:
            ok, detail = fn()
        except Exception as exc:  # a crashing check is a failing check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append(CheckResult(name, bool(ok), detail))
    for i, system in enumerate(list(shipped_systems()) + list(extra_systems)):
        try:
            ok, detail = _structural(system)
        except Exception as exc:
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append(CheckResult(f"structure [{system.name}#{i}]", bool(ok), detail))
    return results


def format_table(results):
    width = max(len(r.name) for r in results)
    lines = [f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL'}  {r.detail}" for r in results]
    return "\n".join(lines)
