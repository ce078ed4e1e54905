"""Error norms, convergence rates, and the theory-backed run checks."""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import trapezoid
from scipy.linalg import eigh

from .errors import DomainError, FracRDError
from .operator import FracOperator, Mesh1D, apply_mass, getoor_constant
from .report import RunReport, lp_norm, lumped_weights
from .systems import (EXP_PARAMS, getoor_profile, make_preset, manufactured,
                      manufactured_exact, zero_system)
from .timestepper import CrankNicolson, StepperConfig, SystemState, TimeGrid, solve_forward

__all__ = [
    "RunReport", "RateFit", "StudyError", "l2_error", "fit_rate", "convergence_study",
    "ComparisonReport", "check_comparison", "duality_ratio", "mass_increments",
    "mass_is_monotone", "blowup_is_consistent", "getoor_residual", "getoor_galerkin_error",
    "cn_local_error", "PositivityMonitor", "ContractionMonitor", "long_horizon_norms",
]


class StudyError(FracRDError):
    """A run inside a convergence study did not complete."""


def l2_error(field, exact, mesh, t=None, order=3):
    """L^2(a, b) distance between a P1 field and an exact function.

    Each element is integrated with an ``order``-point Gauss rule applied to
    (u_h - u)^2, so the comparison is against the true function and not only
    its interpolant.  ``exact`` is called as exact(x), or exact(t, x) if ``t``
    is given.
    """
    field = np.asarray(field, dtype=float)
    if field.shape != (mesh.n,):
        raise DomainError(f"field has shape {field.shape}, expected {(mesh.n,)}")
    g, w = leggauss(order)
    g = 0.5 * (g + 1.0)
    w = 0.5 * w
    full = np.concatenate([[0.0], field, [0.0]])
    left = mesh.all_nodes[:-1]
    total = 0.0
    for q, wq in zip(g, w):
        xq = left + q * mesh.h
        uh = full[:-1] * (1.0 - q) + full[1:] * q
        ue = exact(xq) if t is None else exact(t, xq)
        total += wq * np.sum((uh - ue) ** 2)
    return math.sqrt(total * mesh.h)


@dataclass(frozen=True)
class RateFit:
    h_values: np.ndarray
    errors: np.ndarray
    fitted_slope: float
    r_squared: float


def fit_rate(h_values, errors):
    """Least-squares slope of log(error) against log(h)."""
    h = np.asarray(h_values, dtype=float)
    e = np.asarray(errors, dtype=float)
    if h.shape != e.shape or h.size < 3:
        raise DomainError("a rate fit needs at least three (h, error) pairs")
    if np.any(h <= 0) or np.any(e <= 0):
        raise DomainError("mesh sizes and errors must be positive")
    if np.any(np.diff(h) >= 0):
        raise DomainError("mesh sizes must be strictly decreasing")
    x, y = np.log(h), np.log(e)
    slope, icpt = np.polyfit(x, y, 1)
    resid = y - (slope * x + icpt)
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid ** 2) / ss_tot if ss_tot > 0 else 1.0
    return RateFit(h, e, float(slope), float(r2))


def convergence_study(s, h_list, T=1.0, k=None, params=None, cfg=None, a=-1.0, b=1.0):
    """Manufactured-solution errors at time T on a ladder of mesh sizes.

    ``params`` is (d1, d2, beta); the default is the set used for ``s`` in the
    exponential-growth experiments.  The time step defaults to 1e-3 * T so the
    temporal error stays below the spatial one.
    """
    h_list = sorted((float(h) for h in h_list), reverse=True)
    if len(h_list) < 3:
        raise DomainError("a convergence study needs at least three mesh sizes")
    if (a, b) != (-1.0, 1.0):
        raise DomainError("the manufactured solution lives on (-1, 1)")
    d1, d2, beta = EXP_PARAMS.get(s, (1.0, 2.0, 3.0)) if params is None else params
    tgrid = TimeGrid(T, 1e-3 * T if k is None else k)
    system = manufactured(s, 1, d1, d2, beta)
    errors = []
    for h in h_list:
        mesh = Mesh1D.uniform(h, a, b)
        op = FracOperator.build(mesh, s)
        u0 = np.stack(manufactured_exact(0.0, mesh.nodes, s))
        traj = solve_forward(u0, [op.with_diffusion(d1), op.with_diffusion(d2)],
                             system, tgrid, cfg, stride=tgrid.steps)
        if not traj.report.completed:
            raise StudyError(f"run with h={h} ended with status {traj.report.status}")
        U = traj.final.U
        t_end = traj.final.t
        eu = l2_error(U[0], lambda x: manufactured_exact(t_end, x, s)[0], mesh)
        ev = l2_error(U[1], lambda x: manufactured_exact(t_end, x, s)[1], mesh)
        errors.append(eu + ev)
    return fit_rate(h_list, errors)


@dataclass(frozen=True)
class ComparisonReport:
    passed: bool
    sup_w: float  # max over steps and nodes of w (signed)
    w0_norm: float
    overshoot: float  # amount by which sup_w exceeds ||w0||(1 + tol), >= 0
    max_abs: float  # max over steps of ||w||_inf, for information
    worst_time: float
    worst_node: int
    decay_monotone: bool  # ||w(t)||_inf non-increasing step to step


def check_comparison(op, tgrid, cfg, w0, h_forcing, tol=1e-8, allowance=1e-3):
    """Solve w' + d A w = h with h <= 0 and check w <= ||w0||_inf.

    PASS iff the overshoot beyond ||w0||_inf (1 + tol) is at most
    ``allowance * ||w0||_inf``; the overshoot itself is reported.
    """
    n = op.mesh.n
    steps = tgrid.steps
    w0 = np.asarray(w0, dtype=float).reshape(n)
    forcing = np.broadcast_to(np.asarray(h_forcing, dtype=float), (steps + 1, n))
    if np.any(forcing > 0):
        raise DomainError("the comparison check needs a nonpositive forcing")
    traj = solve_forward(w0[None, :], [op], zero_system(1), tgrid, cfg,
                         forcing=forcing[:, None, :])
    # stride 1 keeps every state
    W = np.array([st.U[0] for st in traj.states])
    norm0 = float(np.abs(w0).max())
    j, i = np.unravel_index(int(np.argmax(W)), W.shape)
    sup_w = float(W[j, i])
    over = max(0.0, sup_w - norm0 * (1.0 + tol))
    linf = np.abs(W).max(axis=1)
    return ComparisonReport(
        passed=bool(over <= allowance * norm0) and traj.report.completed,
        sup_w=sup_w, w0_norm=norm0, overshoot=over, max_abs=float(linf.max()),
        worst_time=float(traj.states[j].t), worst_node=int(i),
        decay_monotone=bool(np.all(np.diff(linf) <= 1e-15 * max(norm0, 1.0))),
    )


def _spacetime_norm(report, species, p, mesh=None, states=None):
    if report.p == p:
        per_step = report.lp_norms[species]
    else:
        if mesh is None or states is None or len(states) != len(report.times):
            raise DomainError(f"report stores p={report.p}; need every state and the mesh for p={p}")
        w = lumped_weights(mesh)
        per_step = np.array([lp_norm(st.U[species], w, p) for st in states])
    return trapezoid(per_step ** p, report.times) ** (1.0 / p)


def duality_ratio(traj, p, mesh=None):
    """||u2||_{L^p(Q_T)} / (1 + ||u1||_{L^p(Q_T)}) for a two-species run."""
    if not p > 1:
        raise DomainError(f"p must exceed 1, got {p}")
    rep = traj.report
    if rep.linf_norms.shape[0] != 2:
        raise DomainError("the duality ratio is defined for two species")
    n1 = _spacetime_norm(rep, 0, p, mesh, traj.states)
    n2 = _spacetime_norm(rep, 1, p, mesh, traj.states)
    return float(n2 / (1.0 + n1))


def mass_increments(report):
    if report.weighted_mass is None:
        raise DomainError("run has no weighted mass (system without mass vector)")
    return np.diff(report.weighted_mass)


def mass_is_monotone(report, k, fp_tol, mass_vector):
    """Weighted mass non-increasing up to k * fp_tol * m * (1 + ||a||_1) per step."""
    a = np.asarray(mass_vector, dtype=float)
    slack = k * fp_tol * a.size * (1.0 + np.abs(a).sum())
    inc = mass_increments(report)
    return bool(np.all(inc <= slack)), float(inc.max(initial=-np.inf)), slack


def blowup_is_consistent(report, window=10):
    """L^inf norms strictly increase over the last ``window`` steps before blow-up."""
    if report.blowup is None:
        return True
    sup = report.linf_norms.max(axis=0)[-window - 1:]
    return bool(np.all(np.diff(sup) > 0))


def getoor_residual(op_or_mesh, s=None):
    """||A I_h(rho) - lambda M 1|| / ||lambda M 1|| (Euclidean) on (-1, 1)."""
    op = op_or_mesh if isinstance(op_or_mesh, FracOperator) else FracOperator.build(op_or_mesh, s)
    mesh = op.mesh
    if (mesh.a, mesh.b) != (-1.0, 1.0):
        raise DomainError("the Getoor profile lives on (-1, 1)")
    lam = getoor_constant(1, op.s)
    target = lam * apply_mass(mesh.h, np.ones(mesh.n))
    res = op.A @ getoor_profile(mesh.nodes, op.s) - target
    return float(np.linalg.norm(res) / np.linalg.norm(target))


def getoor_galerkin_error(op_or_mesh, s=None):
    """L^2 error of the Galerkin solution of (-Delta)^s u = lambda against rho."""
    op = op_or_mesh if isinstance(op_or_mesh, FracOperator) else FracOperator.build(op_or_mesh, s)
    mesh = op.mesh
    lam = getoor_constant(1, op.s)
    u = np.linalg.solve(op.A, np.full(mesh.n, lam * mesh.h))
    return l2_error(u, lambda x: getoor_profile(x, op.s), mesh)


def cn_local_error(op, u0, k):
    """Error of one linear CN step against exp(-k d M^{-1} A) u0.

    The reference uses the generalized eigendecomposition A V = M V diag(lam)
    with V^T M V = I, independent of the stepper's factorization.
    """
    lam, V = eigh(op.A, op.M)
    u0 = np.asarray(u0, dtype=float)
    exact = V @ (np.exp(-k * op.d * lam) * (V.T @ (op.M @ u0)))
    stepper = CrankNicolson([op], zero_system(1), k, StepperConfig(fp_tol=1e-14))
    new, _ = stepper.step(SystemState(0.0, u0[None, :]))
    diff = new.U[0] - exact
    return math.sqrt(float(diff @ op.M @ diff))


class PositivityMonitor:
    """Tracks the most negative nodal value seen (never clips)."""

    def __init__(self):
        self.min_value = np.inf
        self.time = None

    def __call__(self, state, info):
        low = float(state.U.min())
        if low < self.min_value:
            self.min_value, self.time = low, state.t

    @property
    def undershoot(self):
        return max(0.0, -self.min_value)


class ContractionMonitor:
    """Records steps whose fixed-point contraction ratio reached 1."""

    def __init__(self):
        self.flagged = []
        self.max_ratio = 0.0

    def __call__(self, state, info):
        if info is None or math.isnan(info.contraction):
            return
        self.max_ratio = max(self.max_ratio, info.contraction)
        if info.contraction >= 1.0:
            self.flagged.append((state.t, info.contraction))


def long_horizon_norms(s, d1, d2, beta, n, T=100.0, k=1e-2, cfg=None):
    """Final (||U||_inf, ||V||_inf, status) of S_exp from (rho, rho/2)."""
    preset = make_preset("s_exp", s=s, d=(d1, d2), beta=beta)
    mesh = Mesh1D(-1.0, 1.0, n)
    op = FracOperator.build(mesh, s)
    rho = getoor_profile(mesh.nodes, s)
    u0 = np.stack([rho * c for c in preset.initial_scale])
    tgrid = TimeGrid(T, k)
    traj = solve_forward(u0, [op.with_diffusion(d) for d in preset.d], preset.system,
                         tgrid, cfg, stride=tgrid.steps)
    final = traj.report.linf_norms[:, -1]
    return float(final[0]), float(final[1]), traj.report
