import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fracrd.errors import ConfigError, DomainError
from fracrd.operator import Mesh1D, apply_oracle, getoor_constant
from fracrd.systems import (EXP_PARAMS, PRESET_NAMES, ChemParams, ExpParams, ReactionSystem,
                            chemistry, check_mass, check_quasi_positivity, check_triangular,
                            eval_reaction, getoor_profile, make_preset, manufactured,
                            manufactured_exact, manufactured_rhs, s_exp, triangular_demo,
                            zero_system)

exponents = st.sampled_from([1.0, 2.0, 3.0, 1.5, 2.5])
states = st.lists(st.floats(0.0, 20.0), min_size=3, max_size=3)


def test_chemistry_example():
    np.testing.assert_array_equal(eval_reaction(chemistry(), [1.0, 2.0, 3.0]), [1.0, 1.0, -1.0])


def test_chemistry_example_squared_product():
    f = eval_reaction(chemistry(ChemParams(alpha=(1, 1, 2))), [2.0, 3.0, 1.0])
    np.testing.assert_array_equal(f, [-5.0, -5.0, 10.0])


@pytest.mark.parametrize("beta", [0.5, 1.0, 3.0])
def test_s_exp_at_zero_v(beta):
    np.testing.assert_array_equal(eval_reaction(s_exp(ExpParams(beta=beta)), [1.0, 0.0]), [-1.0, 1.0])


def test_eval_rejects_nonfinite_and_shape():
    with pytest.raises(DomainError):
        eval_reaction(chemistry(), [1.0, np.nan, 0.0])
    with pytest.raises(DomainError):
        eval_reaction(chemistry(), [1.0, 2.0])


def test_exponential_overflow_saturates():
    f = eval_reaction(s_exp(ExpParams(beta=3.0)), [1.0, 50.0])
    assert np.all(np.isfinite(f)) and f[1] > 1e300


def test_small_negative_undershoot_admitted():
    f = eval_reaction(chemistry(ChemParams(alpha=(1.5, 1, 1))), [-1e-10, 1.0, 1.0])
    assert np.all(np.isfinite(f))


@given(exponents, exponents, exponents, states)
def test_chemistry_mass_identity_exact(a1, a2, a3, r):
    sysm = chemistry(ChemParams(alpha=(a1, a2, a3)))
    f = eval_reaction(sysm, r)
    assert a2 * a3 * f[0] + a1 * a3 * f[1] + 2 * a1 * a2 * f[2] == pytest.approx(0.0, abs=1e-9 * (1 + np.abs(f).max()))
    np.testing.assert_allclose(sysm.mass_vector, [a2 * a3, a1 * a3, 2 * a1 * a2])


@given(st.floats(0.1, 5.0), st.floats(0.0, 10.0), st.floats(0.0, 3.0))
def test_s_exp_conserves(beta, u, v):
    f = eval_reaction(s_exp(ExpParams(beta=beta)), [u, v])
    assert f[0] + f[1] == 0.0


@pytest.mark.parametrize("name", PRESET_NAMES)
def test_presets_quasi_positive(name):
    assert check_quasi_positivity(make_preset(name).system, samples=5000).passed


def test_quasi_positivity_failure_has_witness():
    bad = ReactionSystem(2, lambda r: np.stack([-np.ones_like(r[0]), np.zeros_like(r[1])]))
    rep = check_quasi_positivity(bad, samples=100)
    assert not rep.passed
    assert rep.witness[0] == 0.0


@pytest.mark.parametrize("alpha", [(1, 1, 1), (2, 2, 3), (1, 1, 3), (2, 2, 1)])
def test_chemistry_mass_check(alpha):
    rep = check_mass(chemistry(ChemParams(alpha=alpha)), samples=5000)
    assert rep.passed and rep.extra["strict"]


def test_s_exp_mass_check():
    assert check_mass(s_exp(), samples=5000).passed


def test_mass_check_detects_cubic_feedback():
    bad = ReactionSystem(2, lambda r: np.stack([r[1] ** 3, r[0] ** 2]), mass_vector=[1.0, 1.0])
    rep = check_mass(bad, samples=5000)
    assert not rep.passed and rep.witness is not None


def test_mass_check_needs_vector():
    with pytest.raises(ConfigError):
        check_mass(ReactionSystem(1, lambda r: r), samples=10)


@pytest.mark.parametrize("alpha", [(1, 1, 1), (2, 3, 1)])
def test_chemistry_triangular(alpha):
    assert check_triangular(chemistry(ChemParams(alpha=alpha)), samples=5000).passed


def test_chemistry_without_triangular_data():
    assert chemistry(ChemParams(alpha=(1, 1, 3))).triangular is None


def test_triangular_trivial_and_superlinear():
    assert check_triangular(zero_system(3), samples=100).passed
    sq = ReactionSystem(1, lambda r: r ** 2, triangular=(np.eye(1), np.zeros(1)))
    assert not check_triangular(sq, samples=1000).passed


@pytest.mark.parametrize("m", [2, 3, 6])
def test_triangular_demo_structure(m):
    sysm = triangular_demo(m)
    assert check_triangular(sysm, samples=2000).passed
    assert check_mass(sysm, samples=2000).passed


def test_triangular_validation():
    with pytest.raises(ConfigError):
        ReactionSystem(2, lambda r: r, triangular=(np.ones((2, 2)), np.zeros(2)))
    with pytest.raises(ConfigError):
        ReactionSystem(2, lambda r: r, triangular=(np.diag([1.0, 0.0]), np.zeros(2)))


def test_param_validation():
    with pytest.raises(ConfigError):
        ChemParams(alpha=(0.5, 1, 1))
    with pytest.raises(ConfigError):
        ExpParams(beta=0.0)
    with pytest.raises(ConfigError):
        make_preset("nope")


@given(st.floats(0.05, 0.95))
def test_manufactured_exact_values(s):
    assert manufactured_exact(0.0, 0.0, s) == (1.0, 0.5)
    u, v = manufactured_exact(1.0, 0.0, s)
    assert u == pytest.approx(math.exp(-1)) and v == pytest.approx(math.exp(-1) / 2)
    assert manufactured_exact(0.3, 1.0, s) == (0.0, 0.0)


def test_manufactured_rhs_decays():
    x = np.linspace(-1, 1, 11)
    r1, r2 = manufactured_rhs(50.0, x, 0.75, 1, 1.0, 2.0, 3.0)
    assert max(np.abs(r1).max(), np.abs(r2).max()) <= math.exp(-50) * 10


def test_manufactured_rhs_planar_form():
    s, beta, d1, d2 = 0.5, 3.0, 2.0, 1.0
    x = np.array([[0.1, 0.2], [0.5, -0.3]])
    t = 0.4
    rho = (1 - (x ** 2).sum(axis=1)) ** s
    lam = 4 ** s * math.gamma(s + 1) ** 2
    boost = rho * np.exp(2 ** -beta * math.exp(-beta * t) * rho ** beta)
    r1, r2 = manufactured_rhs(t, x, s, 2, d1, d2, beta)
    np.testing.assert_allclose(r1, (d1 * lam - rho + boost) * math.exp(-t), rtol=1e-14)
    np.testing.assert_allclose(r2, (d2 * lam / 2 - rho / 2 - boost) * math.exp(-t), rtol=1e-14)


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_manufactured_residual_with_oracle(s):
    """Exact pair satisfies the forced system, checked through the pointwise oracle."""
    d1, d2, beta = EXP_PARAMS[s]
    mesh = Mesh1D(-1.0, 1.0, 15)
    x, t = mesh.nodes, 0.3
    frac = apply_oracle(mesh, s, lambda y: getoor_profile(y, s))
    u, v = manufactured_exact(t, x, s)
    r1, r2 = manufactured_rhs(t, x, s, 1, d1, d2, beta)
    f = eval_reaction(manufactured(s, 1, d1, d2, beta), np.stack([u, v]))
    res1 = -u + d1 * math.exp(-t) * frac - (f[0] + r1)
    res2 = -v + d2 * 0.5 * math.exp(-t) * frac - (f[1] + r2)
    assert max(np.abs(res1).max(), np.abs(res2).max()) <= 1e-4
