import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import fracrd.operator as operator
from fracrd.analysis import (ContractionMonitor, PositivityMonitor, StudyError,
                             blowup_is_consistent, check_comparison, cn_local_error,
                             convergence_study, duality_ratio, fit_rate, getoor_galerkin_error,
                             getoor_residual, l2_error, long_horizon_norms, mass_increments,
                             mass_is_monotone)
from fracrd.errors import DomainError
from fracrd.operator import FracOperator, Mesh1D
from fracrd.systems import (EXP_PARAMS, ExpParams, getoor_profile, make_preset,
                            manufactured, manufactured_exact, s_exp, zero_system)
from fracrd.timestepper import StepperConfig, TimeGrid, solve_forward
from oracles import expm_apply

tent = lambda x: np.clip(1 - np.abs(x), 0.0, None)


# l2_error

def test_l2_error_zero_for_piecewise_linear():
    m = Mesh1D(-1.0, 1.0, 15)
    assert l2_error(tent(m.nodes), tent, m) <= 1e-14


@given(st.floats(0.01, 3.0), st.integers(3, 60))
def test_l2_error_constant_offset(c, n):
    m = Mesh1D(-1.0, 1.0, n)
    err = l2_error(tent(m.nodes) + c, tent, m)
    assert err >= c * math.sqrt(2.0) * (1 - m.h)


def test_l2_error_uses_true_function():
    m = Mesh1D(-1.0, 1.0, 7)
    f = lambda x: 1 - x * x
    # the interpolant is not exact, so the error must be positive
    assert l2_error(f(m.nodes), f, m) > 1e-3


def test_l2_error_time_argument_and_shape():
    m = Mesh1D(-1.0, 1.0, 9)
    assert l2_error(np.zeros(9), lambda t, x: 0.0 * x + t, m, t=0.0) == 0.0
    with pytest.raises(DomainError):
        l2_error(np.zeros(8), tent, m)


def test_manufactured_error_pinned():
    """Frozen from a reference run; guards against silent changes in the pipeline."""
    s = 0.5
    d1, d2, beta = EXP_PARAMS[s]
    mesh = Mesh1D.uniform(1 / 32)
    op = FracOperator.build(mesh, s)
    u0 = np.stack(manufactured_exact(0.0, mesh.nodes, s))
    traj = solve_forward(u0, [op.with_diffusion(d1), op.with_diffusion(d2)],
                         manufactured(s, 1, d1, d2, beta), TimeGrid(0.5, 1e-3))
    err = l2_error(traj.final.U[0], lambda t, x: manufactured_exact(t, x, s)[0], mesh, t=0.5)
    assert err == pytest.approx(0.00817992988553423, rel=1e-6)


# fit_rate

def test_fit_rate_first_order():
    h = np.array([0.5, 0.25, 0.125, 0.0625])
    fit = fit_rate(h, h)
    assert fit.fitted_slope == pytest.approx(1.0) and fit.r_squared == pytest.approx(1.0)
    assert fit_rate(h, h ** 0.75).fitted_slope == pytest.approx(0.75)


@given(st.floats(0.1, 3.0), st.floats(1e-3, 1e3))
def test_fit_rate_recovers_power(p, c):
    h = 2.0 ** -np.arange(2, 7)
    assert fit_rate(h, c * h ** p).fitted_slope == pytest.approx(p, rel=1e-9)


@pytest.mark.parametrize("h,e", [([0.5, 0.25, 0.1], [1.0, 0.0, 0.1]),
                                 ([0.5, 0.25], [1.0, 0.5]),
                                 ([0.25, 0.5, 0.1], [1.0, 0.5, 0.2])])
def test_fit_rate_rejects(h, e):
    with pytest.raises(DomainError):
        fit_rate(h, e)


# convergence study

def test_convergence_study_small_ladder():
    fit = convergence_study(0.5, [1 / 16, 1 / 32, 1 / 64], T=0.5)
    assert abs(fit.fitted_slope - 1.0) <= 0.2
    assert np.all(np.diff(fit.errors) < 0)


def test_convergence_study_blowup_is_error():
    with pytest.raises(StudyError):
        convergence_study(0.5, [1 / 8, 1 / 16, 1 / 32], T=0.1, k=0.01,
                          cfg=StepperConfig(blowup_threshold=0.5))


def test_convergence_study_needs_three_sizes():
    with pytest.raises(DomainError):
        convergence_study(0.5, [1 / 8, 1 / 16])


# comparison principle

@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_comparison_cases(s):
    mesh = Mesh1D(-1.0, 1.0, 64)
    op = FracOperator.build(mesh, s)
    tg = TimeGrid(0.5, 1e-3)
    rho = getoor_profile(mesh.nodes, s)
    r1 = check_comparison(op, tg, StepperConfig(), rho, 0.0)
    assert r1.passed and r1.sup_w <= r1.w0_norm and r1.decay_monotone
    r2 = check_comparison(op, tg, StepperConfig(), np.zeros(mesh.n), -1.0)
    assert r2.passed and r2.sup_w <= 0.0
    r3 = check_comparison(op, tg, StepperConfig(), np.full(mesh.n, 2.0), 0.0)
    assert r3.passed and r3.max_abs <= 2.0


def test_comparison_detects_growth():
    mesh = Mesh1D(-1.0, 1.0, 31)
    good = FracOperator.build(mesh, 0.5)
    # A - 5 M adds a growth term 5 w, above the first eigenvalue
    bad = FracOperator(0.5, 1.0, mesh, good.A - 5.0 * good.M, good.M)
    rep = check_comparison(bad, TimeGrid(0.5, 1e-2), StepperConfig(),
                           getoor_profile(mesh.nodes, 0.5), 0.0)
    assert not rep.passed and rep.overshoot > 0 and rep.worst_time > 0
    assert rep.worst_node == mesh.n // 2


def test_comparison_rejects_positive_forcing():
    op = FracOperator.build(Mesh1D(-1.0, 1.0, 8), 0.5)
    with pytest.raises(DomainError):
        check_comparison(op, TimeGrid(0.1, 0.05), StepperConfig(), np.zeros(8), 1.0)


# duality ratio

def _two_species(u0, d=(1.0, 1.0), n=31, s=0.5, system=None, T=0.5, k=0.01, p=3.0):
    op = FracOperator.build(Mesh1D(-1.0, 1.0, n), s)
    return solve_forward(u0, [op.with_diffusion(d[0]), op.with_diffusion(d[1])],
                         system or zero_system(2), TimeGrid(T, k), p=p)


def test_duality_identical_species():
    rho = getoor_profile(Mesh1D(-1.0, 1.0, 31).nodes, 0.5)
    traj = _two_species(np.stack([rho, rho]))
    assert 0 < duality_ratio(traj, 3.0) < 1


def test_duality_zero_solution():
    assert duality_ratio(_two_species(np.zeros((2, 31))), 3.0) == 0.0


def test_duality_rejects_p():
    traj = _two_species(np.zeros((2, 31)))
    with pytest.raises(DomainError):
        duality_ratio(traj, 1.0)


def test_duality_from_states_matches_report():
    mesh = Mesh1D(-1.0, 1.0, 31)
    rho = getoor_profile(mesh.nodes, 0.5)
    a = duality_ratio(_two_species(np.stack([rho, 0.5 * rho]), p=2.0), 3.0, mesh=mesh)
    b = duality_ratio(_two_species(np.stack([rho, 0.5 * rho]), p=3.0), 3.0)
    assert a == pytest.approx(b, rel=1e-12)


def test_duality_stable_equal_diffusion():
    ratios = []
    for n in (63, 127, 255):
        rho = getoor_profile(Mesh1D(-1.0, 1.0, n).nodes, 0.75)
        traj = _two_species(np.stack([rho, 0.5 * rho]), d=(1.0, 1.0), n=n, s=0.75,
                            system=s_exp(ExpParams(3.0, (1.0, 1.0))), T=1.0, k=0.01)
        ratios.append(duality_ratio(traj, 3.0))
    assert np.all(np.isfinite(ratios))
    assert max(ratios) / min(ratios) <= 1.1


# mass, blow-up, monitors

def test_mass_helpers():
    pre = make_preset("s_exp")
    rho = getoor_profile(Mesh1D(-1.0, 1.0, 31).nodes, 0.75)
    traj = _two_species(np.stack([rho, 0.5 * rho]), d=pre.d, s=0.75, system=pre.system)
    ok, worst, slack = mass_is_monotone(traj.report, 0.01, 1e-6, pre.system.mass_vector)
    assert ok and worst < 0 and slack == pytest.approx(0.01 * 1e-6 * 2 * 3)
    assert len(mass_increments(traj.report)) == traj.report.steps


def test_mass_increments_need_vector():
    op = FracOperator.build(Mesh1D(-1.0, 1.0, 7), 0.5)
    from fracrd.systems import ReactionSystem
    traj = solve_forward(np.ones(7), [op], ReactionSystem(1, lambda r: 0 * r), TimeGrid(0.1, 0.05))
    with pytest.raises(DomainError):
        mass_increments(traj.report)


def test_blowup_consistency_without_blowup():
    assert blowup_is_consistent(_two_species(np.zeros((2, 31))).report)


def test_monitors():
    pos, con = PositivityMonitor(), ContractionMonitor()
    op = FracOperator.build(Mesh1D(-1.0, 1.0, 31), 0.5)
    u0 = np.zeros((1, 31))
    u0[0, 15] = 1.0  # a spike excites high modes, which CN reflects with a sign flip
    solve_forward(u0, [op], zero_system(1), TimeGrid(0.5, 0.1), monitors=[pos, con])
    assert pos.undershoot > 0 and pos.time > 0
    assert con.flagged == []


# Getoor and CN diagnostics

def test_getoor_diagnostics():
    assert getoor_residual(Mesh1D(-1.0, 1.0, 64), 0.5) <= 0.10
    errs = [getoor_galerkin_error(Mesh1D(-1.0, 1.0, n), 0.5) for n in (32, 64, 128)]
    assert errs[0] > errs[1] > errs[2]
    with pytest.raises(DomainError):
        getoor_residual(Mesh1D(0.0, 1.0, 8), 0.5)


def test_getoor_catches_tail_sign_error(monkeypatch):
    original = operator._exterior_tail
    monkeypatch.setattr(operator, "_exterior_tail", lambda *a, **k: -original(*a, **k))
    assert getoor_residual(Mesh1D(-1.0, 1.0, 64), 0.5) > 0.10


def test_cn_local_error_matches_oracle():
    op = FracOperator.build(Mesh1D(-1.0, 1.0, 20), 0.4)
    u0 = getoor_profile(op.mesh.nodes, 0.4)
    from fracrd.timestepper import SystemState, cn_step
    step = cn_step(SystemState(0.0, u0[None, :]), [op], zero_system(1), StepperConfig(fp_tol=1e-14), k=0.01)
    diff = step.U[0] - expm_apply(op.A, op.M, u0, 0.01)
    assert cn_local_error(op, u0, 0.01) == pytest.approx(math.sqrt(diff @ op.M @ diff), rel=1e-8)


def test_long_horizon_short_run():
    u, v, rep = long_horizon_norms(0.75, 1.0, 2.0, 3.0, 31, T=1.0, k=0.01)
    assert rep.completed and 0 < u < 1 and 0 < v < 1.5
