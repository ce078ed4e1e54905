"""Reaction terms, structural checks, and the shipped presets.

A reaction system maps an array ``r`` of shape ``(m, ...)`` to an array of the
same shape.  Evaluation is vectorised over the trailing axes so the stepper can
pass whole nodal fields and the checkers can pass large random samples.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, DomainError
from .operator import getoor_constant

EXP_CAP = 700.0  # exp(EXP_CAP) is finite; larger exponents saturate here
CHECK_TOL = 1e-12


def _power(r, alpha):
    """r**alpha with negative inputs clamped for non-integer exponents."""
    if float(alpha).is_integer():
        return r ** int(alpha)
    return np.maximum(r, 0.0) ** alpha


def _capped_exp(z):
    return np.exp(np.minimum(z, EXP_CAP))


@dataclass(frozen=True, eq=False)
class ReactionSystem:
    """m-species nonlinearity plus the structural data the theory refers to.

    ``source`` is an optional explicit forcing ``source(t, x) -> (m, len(x))``
    added on top of the reaction; only the manufactured preset uses it.
    """

    m: int
    rate: Callable[[np.ndarray], np.ndarray]
    mass_vector: Optional[np.ndarray] = None
    mass_const: float = 0.0
    triangular: Optional[tuple] = None
    growth: str = "polynomial"
    degree: Optional[float] = None
    source: Optional[Callable[[float, np.ndarray], np.ndarray]] = None
    name: str = "custom"

    def __post_init__(self):
        if self.m < 1:
            raise ConfigError("a reaction system needs at least one species")
        if self.mass_vector is not None:
            a = np.asarray(self.mass_vector, dtype=float)
            if a.shape != (self.m,) or np.any(a <= 0):
                raise ConfigError(f"mass vector must be {self.m} positive numbers, got {a}")
            object.__setattr__(self, "mass_vector", a)
        if self.mass_const < 0:
            raise ConfigError("mass constant must be nonnegative")
        if self.triangular is not None:
            Q, b = (np.asarray(v, dtype=float) for v in self.triangular)
            _validate_triangular(Q, b, self.m)
            object.__setattr__(self, "triangular", (Q, b))
        if self.growth not in ("polynomial", "exponential"):
            raise ConfigError(f"unknown growth tag {self.growth!r}")

    def __call__(self, r):
        return self.rate(r)


def _validate_triangular(Q, b, m):
    if Q.shape != (m, m) or b.shape != (m,):
        raise ConfigError(f"triangular data must be ({m}x{m}, {m}), got {Q.shape}, {b.shape}")
    if np.any(np.triu(Q, 1) != 0):
        raise ConfigError("Q must be lower triangular")
    if np.any(Q < 0) or np.any(np.diag(Q) <= 0):
        raise ConfigError("Q must be nonnegative with a strictly positive diagonal")
    if np.any(b < 0):
        raise ConfigError("b must be nonnegative")


def eval_reaction(system, r):
    """Evaluate f(r); ``r`` has shape (m,) or (m, ...)."""
    r = np.asarray(r, dtype=float)
    if r.shape[:1] != (system.m,):
        raise DomainError(f"expected {system.m} species along axis 0, got shape {r.shape}")
    if not np.all(np.isfinite(r)):
        raise DomainError("reaction evaluated at non-finite state")
    return np.asarray(system.rate(r), dtype=float)


@dataclass(frozen=True)
class CheckReport:
    name: str
    passed: bool
    value: float
    witness: Optional[np.ndarray] = None
    detail: str = ""
    extra: dict = field(default_factory=dict)


def _sample(m, samples, box, rng):
    if samples < 1:
        raise DomainError("need at least one sample")
    if not box > 0:
        raise DomainError("sampling box must be positive")
    rng = np.random.default_rng(rng)
    return rng.uniform(0.0, box, size=(m, samples))


def check_quasi_positivity(system, samples=100_000, box=10.0, rng=0):
    """Sample f_i on the face r_i = 0 of [0, box]^m; PASS iff every minimum >= -1e-12."""
    r = _sample(system.m, samples, box, rng)
    minima = np.empty(system.m)
    witness = None
    worst = np.inf
    for i in range(system.m):
        ri = r.copy()
        ri[i] = 0.0
        fi = eval_reaction(system, ri)[i]
        j = int(np.argmin(fi))
        minima[i] = fi[j]
        if fi[j] < worst:
            worst = fi[j]
            witness = ri[:, j]
    passed = bool(np.all(minima >= -CHECK_TOL))
    return CheckReport("quasi-positivity", passed, float(worst),
                       None if passed else witness,
                       detail=f"minima on faces: {np.array2string(minima, precision=3)}",
                       extra={"minima": minima})


def check_mass(system, samples=100_000, box=10.0, rng=0, mass_vector=None):
    """Sample sum_i a_i f_i(r) - C (1 + sum_i r_i); PASS iff its maximum <= 1e-12."""
    a = system.mass_vector if mass_vector is None else np.asarray(mass_vector, dtype=float)
    if a is None:
        raise ConfigError(f"system {system.name!r} carries no mass vector")
    r = _sample(system.m, samples, box, rng)
    weighted = a @ eval_reaction(system, r)
    excess = weighted - system.mass_const * (1.0 + r.sum(axis=0))
    j = int(np.argmax(excess))
    passed = bool(excess[j] <= CHECK_TOL)
    strict = bool(weighted.max() <= CHECK_TOL)
    return CheckReport("mass control", passed, float(excess[j]),
                       None if passed else r[:, j],
                       detail=f"max excess {excess[j]:.3e}; strict form {'holds' if strict else 'fails'}",
                       extra={"strict": strict})


def check_triangular(system, samples=100_000, box=10.0, rng=0):
    """Sample Q f(r) - (1 + sum r) b componentwise; PASS iff every entry <= 1e-12."""
    if system.triangular is None:
        raise ConfigError(f"system {system.name!r} carries no triangular data")
    Q, b = system.triangular
    r = _sample(system.m, samples, box, rng)
    excess = Q @ eval_reaction(system, r) - np.outer(b, 1.0 + r.sum(axis=0))
    row, j = np.unravel_index(int(np.argmax(excess)), excess.shape)
    worst = float(excess[row, j])
    passed = worst <= CHECK_TOL
    return CheckReport("triangular structure", passed, worst,
                       None if passed else r[:, j],
                       detail=f"max excess {worst:.3e} (row {row})")


# ---------------------------------------------------------------- presets

@dataclass(frozen=True)
class ChemParams:
    alpha: tuple = (1.0, 1.0, 1.0)
    d: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if len(self.alpha) != 3 or len(self.d) != 3:
            raise ConfigError("chemistry needs three exponents and three diffusions")
        if any(a < 1 for a in self.alpha):
            raise ConfigError(f"stoichiometric exponents must be >= 1, got {self.alpha}")
        if any(not d > 0 for d in self.d):
            raise ConfigError(f"diffusions must be positive, got {self.d}")


@dataclass(frozen=True)
class ExpParams:
    beta: float = 3.0
    d: tuple = (1.0, 2.0)

    def __post_init__(self):
        if not self.beta > 0:
            raise ConfigError(f"beta must be positive, got {self.beta}")
        if len(self.d) != 2 or any(not d > 0 for d in self.d):
            raise ConfigError(f"need two positive diffusions, got {self.d}")


def chemistry(params=ChemParams()):
    """Reversible reaction alpha1 U1 + alpha2 U2 <-> alpha3 U3.

    Triangular data only exists when alpha3 = 1: the first row of any lower
    triangular Q must bound alpha1 * g linearly, and g grows like u3^alpha3.
    """
    a1, a2, a3 = (float(v) for v in params.alpha)

    def rate(r):
        g = _power(r[2], a3) - _power(r[0], a1) * _power(r[1], a2)
        return np.stack([a1 * g, a2 * g, -a3 * g])

    tri = None
    if a3 == 1.0:
        Q = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [a3, 0.0, a1]])
        tri = (Q, np.array([a1, a2, 0.0]))
    return ReactionSystem(
        3, rate,
        mass_vector=np.array([a2 * a3, a1 * a3, 2.0 * a1 * a2]),
        triangular=tri,
        degree=max(a3, a1 + a2),
        name="chemistry",
    )


def s_exp(params=ExpParams()):
    """f1 = -u exp(v^beta), f2 = u exp(v^beta)."""
    beta = float(params.beta)

    def rate(r):
        flux = r[0] * _capped_exp(_power(r[1], beta))
        return np.stack([-flux, flux])

    return ReactionSystem(2, rate, mass_vector=np.array([1.0, 1.0]),
                          triangular=(np.array([[1.0, 0.0], [1.0, 1.0]]), np.zeros(2)),
                          growth="exponential", name="s_exp")


def triangular_demo(m=3):
    """Chain r_{i-1} r_i -> r_i r_{i+1}; partial sums of f are <= 0."""
    if m < 2:
        raise ConfigError("triangular_demo needs m >= 2")

    def rate(r):
        flux = r[:-1] * r[1:]  # flux[i] moves mass from species i to i+1
        f = np.zeros_like(r)
        f[:-1] -= flux
        f[1:] += flux
        return f

    Q = np.tril(np.ones((m, m)))
    return ReactionSystem(m, rate, mass_vector=np.ones(m), triangular=(Q, np.zeros(m)),
                          degree=2, name="triangular_demo")


def zero_system(m=1):
    """f = 0; used for the linear problems."""
    return ReactionSystem(m, lambda r: np.zeros_like(r), mass_vector=np.ones(m),
                          triangular=(np.eye(m), np.zeros(m)), degree=0, name="zero")


def rho(x, N=1):
    """(1 - |x|^2)_+^s profile without the exponent; see ``getoor_profile``."""
    x = np.asarray(x, dtype=float)
    r2 = x * x if N == 1 else np.sum(x * x, axis=-1)
    return np.clip(1.0 - r2, 0.0, None)


def getoor_profile(x, s, N=1):
    return rho(x, N) ** s


def manufactured_exact(t, x, s, N=1):
    """Exact pair (u, v) = (1, 1/2) rho(x) e^{-t}."""
    u = getoor_profile(x, s, N) * math.exp(-t)
    return u, 0.5 * u


def manufactured_rhs(t, x, s, N, d1, d2, beta):
    """Forcing terms that make ``manufactured_exact`` solve the S_exp system."""
    lam = getoor_constant(N, s)
    p = getoor_profile(x, s, N)
    boost = p * np.exp(2.0 ** (-beta) * math.exp(-beta * t) * p ** beta)
    decay = math.exp(-t)
    rhs1 = (d1 * lam - p + boost) * decay
    rhs2 = (0.5 * d2 * lam - 0.5 * p - boost) * decay
    return rhs1, rhs2


def manufactured(s=0.75, N=1, d1=1.0, d2=2.0, beta=3.0):
    base = s_exp(ExpParams(beta, (d1, d2)))

    def source(t, x):
        return np.stack(manufactured_rhs(t, x, s, N, d1, d2, beta))

    return ReactionSystem(2, base.rate, mass_vector=base.mass_vector,
                          triangular=base.triangular, growth="exponential",
                          source=source, name="manufactured")


# parameter sets used for each s in the S_exp experiments: (d1, d2, beta)
EXP_PARAMS = {0.25: (1.0, 3.0, 2.0), 0.5: (2.0, 1.0, 3.0),
              0.75: (1.0, 2.0, 3.0), 0.9: (3.0, 4.0, 2.0)}


@dataclass(frozen=True)
class Preset:
    """A named system with its diffusions and default initial scales."""

    name: str
    system: ReactionSystem
    d: tuple
    initial_scale: tuple
    description: str = ""


def make_preset(name, s=0.75, d=None, alpha=None, beta=None, m=None, N=1):
    """Build a preset from loosely-typed parameters (as read from a config file)."""
    if name == "chemistry":
        kw = {}
        if alpha is not None:
            kw["alpha"] = tuple(alpha)
        if d is not None:
            kw["d"] = tuple(d)
        p = ChemParams(**kw)
        return Preset(name, chemistry(p), p.d, (1.0, 1.0, 1.0),
                      f"reversible reaction, alpha={p.alpha}")
    if name == "s_exp":
        p = ExpParams(3.0 if beta is None else beta, (1.0, 2.0) if d is None else tuple(d))
        return Preset(name, s_exp(p), p.d, (1.0, 0.5), f"exponential growth, beta={p.beta}")
    if name == "manufactured":
        d1, d2, b = EXP_PARAMS.get(s, (1.0, 2.0, 3.0))
        if d is not None:
            d1, d2 = d
        if beta is not None:
            b = beta
        return Preset(name, manufactured(s, N, d1, d2, b), (d1, d2), (1.0, 0.5),
                      f"forced S_exp with exact solution, beta={b}")
    if name == "triangular_demo":
        m = 3 if m is None else int(m)
        dd = tuple(d) if d is not None else tuple(1.0 + 0.5 * i for i in range(m))
        if len(dd) != m:
            raise ConfigError(f"triangular_demo with m={m} needs {m} diffusions")
        return Preset(name, triangular_demo(m), dd, (1.0,) * m, f"quadratic chain, m={m}")
    if name == "zero":
        m = 1 if m is None else int(m)
        dd = tuple(d) if d is not None else (1.0,) * m
        return Preset(name, zero_system(m), dd, (1.0,) * m, "no reaction (heat flow)")
    raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}")


PRESET_NAMES = ("chemistry", "s_exp", "manufactured", "triangular_demo", "zero")
