"""Integral fractional Laplacian with homogeneous exterior condition on an interval.

The stiffness matrix represents the bilinear form

    a(u, v) = (C_s / 2) * iint_{R x R} (u(x) - u(y)) (v(x) - v(y)) |x - y|^(-1-2s) dx dy

for continuous piecewise-linear hat functions that vanish outside (a, b).  The
double integral over the domain is split into element pairs; the part where one
point lies outside the domain reduces to a weight that is integrated in closed
form.  On a uniform mesh every element-pair integral depends only on the
element offset, so only ``n + 1`` reference integrals are ever computed.
"""

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate
from scipy.special import gamma, roots_jacobi

from .errors import AssemblyError, DomainError, OracleError

QUAD_ORDER = 8


def _check_order(s):
    if not (isinstance(s, (int, float, np.floating)) and 0.0 < s < 1.0):
        raise DomainError(f"fractional order must lie in (0, 1), got {s!r}")


def _check_dim(N):
    if isinstance(N, bool) or int(N) != N or N < 1:
        raise DomainError(f"dimension must be a positive integer, got {N!r}")


def normalization_constant(N, s):
    """Constant in front of the singular integral defining (-Delta)^s in R^N."""
    _check_dim(N)
    _check_order(s)
    return (2.0 ** (2 * s) * s * gamma(N / 2 + s)
            / (math.pi ** (N / 2) * gamma(1 - s)))


def getoor_constant(N, s):
    """Value of (-Delta)^s (1 - |x|^2)_+^s on the unit ball of R^N."""
    _check_dim(N)
    _check_order(s)
    return 2.0 ** (2 * s) * gamma(1 + s) * gamma(N / 2 + s) / gamma(N / 2)


@dataclass(frozen=True)
class Mesh1D:
    """Uniform partition of [a, b] with ``n`` interior nodes."""

    a: float
    b: float
    n: int

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)) or not self.a < self.b:
            raise DomainError(f"invalid interval ({self.a}, {self.b})")
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 1:
            raise DomainError(f"need at least one interior node, got n={self.n!r}")
        object.__setattr__(self, "n", int(self.n))

    @classmethod
    def uniform(cls, h, a=-1.0, b=1.0):
        """Mesh of spacing ``h``; (b - a) / h must be an integer."""
        cells = (b - a) / h
        n_cells = int(round(cells))
        if n_cells < 2 or abs(cells - n_cells) > 1e-9 * cells:
            raise DomainError(f"spacing {h} does not divide ({a}, {b}) into >= 2 cells")
        return cls(a, b, n_cells - 1)

    @property
    def h(self):
        return (self.b - self.a) / (self.n + 1)

    @property
    def n_elements(self):
        return self.n + 1

    @property
    def nodes(self):
        return self.a + self.h * np.arange(1, self.n + 1)

    @property
    def all_nodes(self):
        """Interior nodes plus the two endpoints."""
        return self.a + self.h * np.arange(self.n + 2)

    def interpolate(self, f):
        return np.asarray(f(self.nodes), dtype=float)


def _gauss_legendre01(q):
    x, w = leggauss(q)
    return 0.5 * (x + 1.0), 0.5 * w


def _gauss_jacobi01(q, beta):
    """Rule for int_0^1 g(r) r^beta dr."""
    x, w = roots_jacobi(q, 0.0, beta)
    return 0.5 * (x + 1.0), w / 2.0 ** (beta + 1.0)


def _identical_pair(s, q):
    """Reference 2x2 matrix for an element paired with itself.

    On one element u(x) - u(y) = u' (x - y), so only the scalar
    iint |x - y|^(1-2s) survives.  The diagonal is removed by z = |x - y|,
    leaving 2 int_0^1 (1 - z) z^(1-2s) dz, evaluated with a Jacobi rule.
    """
    z, w = _gauss_jacobi01(q, 1.0 - 2.0 * s)
    c = 2.0 * np.dot(w, 1.0 - z)
    return c * np.array([[1.0, -1.0], [-1.0, 1.0]])


def _touching_pair(s, q):
    """Reference 3x3 matrix for two elements sharing one node.

    Coordinates X, Y measure the distance to the shared node from either side,
    so |x - y| = X + Y.  Duffy splitting of the unit square along X = Y makes
    each half a product of a radial integral with weight r^(2-2s) and a smooth
    angular integral.
    """
    r, wr = _gauss_jacobi01(q, 2.0 - 2.0 * s)
    t, wt = _gauss_legendre01(q)
    radial = wr.sum()
    kern = (1.0 + t) ** (-1.0 - 2.0 * s)
    out = np.zeros((3, 3))
    for X, Y in ((np.ones_like(t), t), (t, np.ones_like(t))):
        e = np.stack([X, Y - X, -Y])
        out += np.einsum("ai,bi,i->ab", e, e, wt * kern)
    return radial * out


def _separated_pairs(s, n_elements, q):
    """Reference 4x4 matrices for element offsets d = 2 .. n_elements - 1.

    Element K = [0, 1] pairs with K' = [d, d + 1]; the local dofs are the two
    nodes of K followed by the two nodes of K'.
    """
    offsets = np.arange(2, n_elements)
    if offsets.size == 0:
        return offsets, np.zeros((0, 4, 4))
    x, w = _gauss_legendre01(q)
    psi = np.stack([1.0 - x, x])
    ones = np.ones(q)
    # e[a, i, j] evaluated at (x_i, y_j)
    e = np.concatenate([psi[:, :, None] * ones[None, None, :],
                        -ones[None, :, None] * psi[:, None, :]])
    ww = w[:, None] * w[None, :]
    dist = offsets[:, None, None] + x[None, None, :] - x[None, :, None]
    kern = dist ** (-1.0 - 2.0 * s) * ww
    return offsets, np.einsum("aij,bij,dij->dab", e, e, kern)


def _exterior_tail(mesh, s, q=QUAD_ORDER):
    """Per-element 2x2 matrices of int_K psi_a psi_b kappa(x) dx.

    kappa(x) = ((x - a)^(-2s) + (b - x)^(-2s)) / (2s) is the exact integral of
    |x - y|^(-1-2s) over y outside (a, b).  The singular factor on the two
    boundary elements is integrated exactly; everything else is smooth.
    Entries that only touch the boundary node (dropped later) are set to 0.
    """
    ne = mesh.n_elements
    h = mesh.h
    x, w = _gauss_legendre01(q)
    psi = np.stack([1.0 - x, x])
    k = np.arange(ne)[:, None]
    left = (k + x[None, :]) ** (-2.0 * s)
    right = (ne - k - x[None, :]) ** (-2.0 * s)
    # element 0 carries the left singularity, element ne-1 the right one
    left[0] = 0.0
    right[-1] = 0.0
    loc = np.einsum("ai,bi,ki->kab", psi, psi, (left + right) * w)
    sing = 1.0 / (3.0 - 2.0 * s)  # int_0^1 xi^2 xi^(-2s) d xi
    loc[0, 1, 1] += sing
    loc[-1, 0, 0] += sing
    loc[0, 0, :] = loc[0, :, 0] = 0.0
    loc[-1, 1, :] = loc[-1, :, 1] = 0.0
    return loc * h ** (1.0 - 2.0 * s) / (2.0 * s)


def _add_band(G, row, col, count, value):
    """G[row + k, col + k] += value for k in range(count)."""
    N = G.shape[0]
    start = row * N + col
    G.ravel()[start:start + count * (N + 1):N + 1] += value


def assemble_stiffness(mesh, s, order=QUAD_ORDER):
    """Dense symmetric stiffness matrix of (-Delta)^s on the interior nodes."""
    _check_order(s)
    ne = mesh.n_elements
    scale = mesh.h ** (1.0 - 2.0 * s)
    with np.errstate(over="raise", divide="raise", invalid="raise"):
        try:
            L0 = _identical_pair(s, order) * scale
            L1 = _touching_pair(s, order) * scale
            offsets, Ld = _separated_pairs(s, ne, order)
            Ld = Ld * scale
            tail = _exterior_tail(mesh, s, order)
        except FloatingPointError as exc:
            raise AssemblyError(
                f"quadrature weights not representable for s={s}, h={mesh.h}: {exc}"
            ) from exc

    # G accumulates the domain x domain double integral over all nodes 0..n+1
    G = np.zeros((ne + 1, ne + 1))
    for p in range(2):
        for r in range(2):
            _add_band(G, p, r, ne, L0[p, r])
    for p in range(3):
        for r in range(3):
            _add_band(G, p, r, ne - 1, 2.0 * L1[p, r])
    for d, L in zip(offsets, Ld):
        idx = (0, 1, d, d + 1)
        for p in range(4):
            for r in range(4):
                _add_band(G, idx[p], idx[r], ne - d, 2.0 * L[p, r])

    T = np.zeros_like(G)
    for p in range(2):
        for r in range(2):
            _add_band(T, p, r, ne, tail[:, p, r])

    c = normalization_constant(1, s)
    A = c * (0.5 * G[1:-1, 1:-1] + T[1:-1, 1:-1])
    if not np.all(np.isfinite(A)):
        raise AssemblyError(f"non-finite stiffness entries for s={s}, h={mesh.h}")
    return 0.5 * (A + A.T)


def assemble_mass(mesh):
    """P1 mass matrix (dense storage of a tridiagonal matrix)."""
    n, h = mesh.n, mesh.h
    M = np.diag(np.full(n, 2.0 * h / 3.0))
    off = np.full(n - 1, h / 6.0)
    return M + np.diag(off, 1) + np.diag(off, -1)


def apply_mass(h, U):
    """Multiply by the P1 mass matrix along the last axis without forming it."""
    U = np.asarray(U, dtype=float)
    out = 4.0 * U
    out[..., 1:] += U[..., :-1]
    out[..., :-1] += U[..., 1:]
    return out * (h / 6.0)


@dataclass(frozen=True, eq=False)
class FracOperator:
    """Assembled stiffness and mass matrices for d (-Delta)^s on one mesh.

    The arrays are read-only, so a finished operator can be shared freely.
    """

    s: float
    d: float
    mesh: Mesh1D
    A: np.ndarray
    M: np.ndarray

    def __post_init__(self):
        if not self.d > 0:
            raise DomainError(f"diffusion coefficient must be positive, got {self.d}")
        for arr in (self.A, self.M):
            arr.flags.writeable = False

    @classmethod
    def build(cls, mesh, s, d=1.0, order=QUAD_ORDER):
        return cls(s, float(d), mesh, assemble_stiffness(mesh, s, order), assemble_mass(mesh))

    def with_diffusion(self, d):
        """Same matrices, different coefficient (no reassembly)."""
        return replace(self, d=float(d))

    def seminorm(self, v):
        """H^s_0 seminorm of the P1 function with nodal values ``v``."""
        v = np.asarray(v, dtype=float)
        return math.sqrt(2.0 * float(v @ self.A @ v) / normalization_constant(1, self.s))


def apply_oracle(mesh, s, f, points=None, epsabs=1e-10, epsrel=1e-8):
    """Pointwise (-Delta)^s f by direct quadrature of the singular integral.

    ``f`` is a vectorised function on (a, b), taken to vanish outside.  At each
    point x the symmetric part |y - x| < delta is written with the second
    difference 2 f(x) - f(x + r) - f(x - r) (the first-order Taylor term cancels
    in the principal value), the remaining one-sided part of the domain is
    integrated directly, and the exterior contributes f(x) times a closed form.
    """
    _check_order(s)
    a, b = mesh.a, mesh.b
    xs = mesh.nodes if points is None else np.atleast_1d(np.asarray(points, dtype=float))
    f1 = lambda y: float(f(np.asarray(y, dtype=float)))
    c = normalization_constant(1, s)
    out = np.empty(xs.shape)
    for i, x in enumerate(xs):
        if not a < x < b:
            raise DomainError(f"oracle point {x} outside ({a}, {b})")
        fx = f1(x)
        delta = min(x - a, b - x)
        r_min = 1e-4 * delta

        def second_diff(r):
            r = max(r, r_min)  # below r_min the difference is pure cancellation
            return (2.0 * fx - f1(x + r) - f1(x - r)) / (r * r)

        def one_sided(y):
            return (fx - f1(y)) * abs(y - x) ** (-1.0 - 2.0 * s)

        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            try:
                near, _ = integrate.quad(second_diff, 0.0, delta, weight="alg",
                                         wvar=(1.0 - 2.0 * s, 0.0),
                                         epsabs=epsabs, epsrel=epsrel, limit=200)
                if x - a < b - x:
                    lo, hi = x + delta, b
                else:
                    lo, hi = a, x - delta
                far = 0.0
                if hi - lo > 1e-14 * (b - a):
                    far, _ = integrate.quad(one_sided, lo, hi, epsabs=epsabs,
                                            epsrel=epsrel, limit=200)
            except integrate.IntegrationWarning as exc:
                raise OracleError(f"quadrature did not converge at x={x}: {exc}") from exc
        tail = fx * ((x - a) ** (-2.0 * s) + (b - x) ** (-2.0 * s)) / (2.0 * s)
        out[i] = c * (near + far + tail)
    return out
