"""Crank-Nicolson time stepping with Picard iteration on the reaction term.

For every species i the step solves

    M (u^{n+1} - u^n) / k + d_i A (u^{n+1} + u^n) / 2 = M (F_i(u^n) + F_i(u^{n+1})) / 2

where F is the nodal evaluation of the reaction (plus any explicit source).
Averaging F rather than evaluating it at the averaged state keeps every linear
identity among the f_i exact at the discrete level.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import BlowUpError, DomainError, FixedPointError
from .operator import apply_mass
from .report import ReportBuilder, RunReport
from .systems import zero_system


@dataclass(frozen=True)
class TimeGrid:
    T: float
    k: float

    def __post_init__(self):
        if not (self.T > 0 and self.k > 0):
            raise DomainError(f"need T > 0 and k > 0, got T={self.T}, k={self.k}")
        steps = round(self.T / self.k)
        if steps < 1 or abs(steps * self.k - self.T) > 1e-12 * self.T:
            raise DomainError(f"time step {self.k} does not divide T={self.T}")

    @property
    def steps(self):
        return round(self.T / self.k)

    @property
    def times(self):
        return self.k * np.arange(self.steps + 1)


@dataclass(frozen=True)
class StepperConfig:
    fp_tol: float = 1e-6
    fp_max_iters: int = 200
    blowup_threshold: float = 1e8
    theta: float = 0.5

    def __post_init__(self):
        if not self.fp_tol > 0:
            raise DomainError("fp_tol must be positive")
        if self.fp_max_iters < 1:
            raise DomainError("fp_max_iters must be >= 1")
        if not self.blowup_threshold > 0:
            raise DomainError("blowup_threshold must be positive")
        if self.theta != 0.5:
            raise DomainError("only the Crank-Nicolson scheme (theta = 1/2) is supported")


@dataclass(frozen=True)
class SystemState:
    t: float
    U: np.ndarray


@dataclass(frozen=True)
class StepInfo:
    iterations: int
    contraction: float  # largest ratio of successive increments; nan if < 2 increments
    increment: float


@dataclass(frozen=True)
class Trajectory:
    states: tuple
    report: RunReport

    @property
    def final(self):
        return self.states[-1]


class CrankNicolson:
    """Stepper with the implicit matrices factored once.

    Species that share a stiffness matrix and a diffusion coefficient share one
    Cholesky factor and are solved together.
    """

    def __init__(self, ops, system, k, cfg=None):
        self.cfg = StepperConfig() if cfg is None else cfg
        if len(ops) != system.m:
            raise DomainError(f"{len(ops)} operators for {system.m} species")
        mesh = ops[0].mesh
        if any(op.mesh != mesh for op in ops):
            raise DomainError("all operators must share one mesh")
        self.ops = tuple(ops)
        self.system = system
        self.k = float(k)
        self.mesh = mesh
        groups = {}
        for i, op in enumerate(ops):
            groups.setdefault((id(op.A), op.d), []).append(i)
        self._groups = []
        for idx in groups.values():
            op = ops[idx[0]]
            half = 0.5 * self.k * op.d
            factor = cho_factor(op.M + half * op.A, check_finite=False)
            self._groups.append((np.array(idx), op.A, half, factor))

    def _check(self, W, t):
        thr = self.cfg.blowup_threshold
        bad = ~np.isfinite(W) | (np.abs(W) > thr)
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise BlowUpError(t, int(i), float(W[i, j]), iterate=W)

    def step(self, state, src_now=None, src_next=None):
        """Advance one step; returns (new state, StepInfo)."""
        k, h, cfg = self.k, self.mesh.h, self.cfg
        U = state.U
        t1 = state.t + k
        with np.errstate(over="ignore", invalid="ignore"):
            F0 = self.system(U)
            if src_now is not None:
                F0 = F0 + src_now
            base = np.empty_like(U)
            for idx, A, half, _ in self._groups:
                Ug = U[idx]
                base[idx] = apply_mass(h, Ug + 0.5 * k * F0[idx]) - half * (Ug @ A)
            V = U
            prev = None
            ratio = np.nan
            for it in range(1, cfg.fp_max_iters + 1):
                F = self.system(V)
                if src_next is not None:
                    F = F + src_next
                rhs = base + apply_mass(h, 0.5 * k * F)
                W = np.empty_like(U)
                for idx, _, _, factor in self._groups:
                    W[idx] = cho_solve(factor, rhs[idx].T, check_finite=False).T
                self._check(W, t1)
                inc = float(np.max(np.abs(W - V)))
                if prev is not None and prev > 0:
                    r = inc / prev
                    ratio = r if math.isnan(ratio) else max(ratio, r)
                prev = inc
                V = W
                if inc <= cfg.fp_tol:
                    return SystemState(t1, V), StepInfo(it, ratio, inc)
        raise FixedPointError(t1, cfg.fp_max_iters, inc, V)


def cn_step(state, ops, system, cfg=None, k=None, src_now=None, src_next=None):
    """One Crank-Nicolson step (factors the matrices on every call)."""
    if k is None:
        raise DomainError("time step k is required")
    new, _ = CrankNicolson(ops, system, k, cfg).step(state, src_now, src_next)
    return new


def solve_forward(u0, ops, system, tgrid, cfg=None, monitors=(), stride=1, p=2.0,
                  forcing=None):
    """Integrate from ``u0`` (shape (m, n)) over ``tgrid``.

    ``forcing`` optionally gives explicit nodal sources at every time node,
    shape (steps + 1, m, n); otherwise ``system.source`` is used when present.
    Blow-up and fixed-point failure end the run early; the partial trajectory
    is returned with ``report.status`` set accordingly.
    """
    cfg = StepperConfig() if cfg is None else cfg
    U = np.array(u0, dtype=float, ndmin=2)
    mesh = ops[0].mesh
    if U.shape != (system.m, mesh.n):
        raise DomainError(f"initial data has shape {U.shape}, expected {(system.m, mesh.n)}")
    if not np.all(np.isfinite(U)):
        raise DomainError("initial data must be finite")
    if stride < 1:
        raise DomainError("stride must be >= 1")
    times = tgrid.times
    if forcing is not None:
        forcing = np.asarray(forcing, dtype=float)
        if forcing.shape != (len(times), system.m, mesh.n):
            raise DomainError(f"forcing has shape {forcing.shape}")
        src = lambda j: forcing[j]
    elif system.source is not None:
        x = mesh.nodes
        src = lambda j: system.source(times[j], x)
    else:
        src = lambda j: None

    stepper = CrankNicolson(ops, system, tgrid.k, cfg)
    builder = ReportBuilder(mesh, system.m, system.mass_vector, p)
    state = SystemState(float(times[0]), U)
    states = [state]
    builder.record(state.t, U)
    for mon in monitors:
        mon(state, None)

    status, blowup, failure_time = "completed", None, None
    try:
        stepper._check(U, state.t)
        s_now = src(0)
        for j in range(1, len(times)):
            s_next = src(j)
            new, info = stepper.step(state, s_now, s_next)
            state = SystemState(float(times[j]), new.U)
            builder.record(state.t, state.U, info.iterations, info.contraction)
            for mon in monitors:
                mon(state, info)
            if j % stride == 0 or j == len(times) - 1:
                states.append(state)
            s_now = s_next
    except BlowUpError as exc:
        status, blowup = "blowup", (exc.t, exc.species, exc.value)
    except FixedPointError as exc:
        status, failure_time = "fp_failure", exc.t
    if states[-1] is not state:
        states.append(state)
    return Trajectory(tuple(states), builder.build(status, blowup, failure_time))


def solve_dual(phi, d, op, tgrid, cfg=None):
    """Backward problem -dZ/dt + d A Z = phi with Z(T) = 0.

    Solved as the forward problem dw/dtau + d A w = phi(T - tau), w(0) = 0, whose
    states are then read in reverse.  ``phi`` holds nodal values at every time
    node, shape (steps + 1, n).  States of the result are Z(t_0), ..., Z(t_N).
    """
    phi = np.asarray(phi, dtype=float)
    times = tgrid.times
    if phi.shape != (len(times), op.mesh.n):
        raise DomainError(f"phi has shape {phi.shape}, expected {(len(times), op.mesh.n)}")
    fwd = solve_forward(np.zeros((1, op.mesh.n)), [op.with_diffusion(d)], zero_system(1),
                        tgrid, cfg, forcing=phi[::-1, None, :])
    n_states = len(fwd.states)
    states = tuple(SystemState(float(times[j]), fwd.states[n_states - 1 - j].U)
                   for j in range(n_states))
    if fwd.report.status != "completed":
        return Trajectory(tuple(reversed(fwd.states)), fwd.report)
    return Trajectory(states, fwd.report.reversed_in_time(times))
