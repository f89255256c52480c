"""Truth discretization: P1 finite elements for -u'' + mu*u = 1 on ]0,1[.

Homogeneous Dirichlet conditions on a uniform mesh with n_cells cells,
so the discrete space has N = n_cells - 1 interior nodes.  Stiffness,
mass, and load assemble in closed form:

    K = (1/h) tridiag(-1, 2, -1)      M = (h/6) tridiag(1, 4, 1)
    F_j = h                           Gram = K + M   (H1 inner product)

The parametric operator is affine, A(mu) = K + mu*M, which is what the
reduced-basis machinery in :mod:`rbcert.reduced` relies on.

Also provides the analytic reference solution in an overflow-safe form
(rearranged in exp(-sqrt(mu)*x) factors; the textbook cosh/sinh form
overflows for mu around 1e5 and beyond).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Tridiagonal:
    """Symmetric tridiagonal matrix stored as main diagonal + offdiagonal."""

    diag: np.ndarray
    off: np.ndarray  # length len(diag) - 1

    @property
    def n(self) -> int:
        return self.diag.size

    def matvec(self, v: np.ndarray) -> np.ndarray:
        w = self.diag * v
        w[:-1] += self.off * v[1:]
        w[1:] += self.off * v[:-1]
        return w

    def __add__(self, other: "Tridiagonal") -> "Tridiagonal":
        return Tridiagonal(self.diag + other.diag, self.off + other.off)

    def scaled(self, c: float) -> "Tridiagonal":
        return Tridiagonal(c * self.diag, c * self.off)


@dataclass(frozen=True)
class TruthSystem:
    """Assembled truth-level operators for one mesh.

    Vectors of length N = n_cells - 1 hold interior nodal values; the
    boundary values are identically zero and never stored.
    """

    n_cells: int
    h: float
    K: Tridiagonal
    M: Tridiagonal
    Gram: Tridiagonal
    F: np.ndarray

    @property
    def n(self) -> int:
        return self.n_cells - 1

    @property
    def nodes(self) -> np.ndarray:
        """Interior node coordinates x_j = j*h, j = 1..N."""
        return self.h * np.arange(1, self.n_cells)

    def operator(self, mu: float) -> Tridiagonal:
        """The parametric operator A(mu) = K + mu*M."""
        return self.K + self.M.scaled(mu)


def assemble(n_cells: int) -> TruthSystem:
    """Assemble the truth system on a uniform n_cells mesh.

    Every matrix entry is a single rounding away from the closed form
    (2/h, -1/h, 2h/3, h/6, h), which is what the assembly oracles in the
    test suite check against exact rational arithmetic.
    """
    if n_cells < 2:
        raise ValueError("n_cells must be >= 2 (need at least one interior node)")
    n = n_cells - 1
    h = 1.0 / n_cells
    K = Tridiagonal(np.full(n, 2.0 / h), np.full(n - 1, -(1.0 / h)))
    M = Tridiagonal(np.full(n, 2.0 * h / 3.0), np.full(n - 1, h / 6.0))
    Gram = K + M
    F = np.full(n, h)
    return TruthSystem(n_cells, h, K, M, Gram, F)


def solve_tridiagonal(A: Tridiagonal, rhs: np.ndarray) -> np.ndarray:
    """Thomas elimination for a symmetric tridiagonal system."""
    n = A.n
    if rhs.shape != (n,):
        raise ValueError(f"rhs has shape {rhs.shape}, expected ({n},)")
    c = np.empty(n - 1) if n > 1 else np.empty(0)
    d = np.empty(n)
    piv = A.diag[0]
    if piv == 0.0:
        raise np.linalg.LinAlgError("zero pivot in tridiagonal elimination")
    d[0] = rhs[0] / piv
    for i in range(1, n):
        c[i - 1] = A.off[i - 1] / piv
        piv = A.diag[i] - A.off[i - 1] * c[i - 1]
        if piv == 0.0:
            raise np.linalg.LinAlgError("zero pivot in tridiagonal elimination")
        d[i] = (rhs[i] - A.off[i - 1] * d[i - 1]) / piv
    x = d
    for i in range(n - 2, -1, -1):
        x[i] -= c[i] * x[i + 1]
    return x


def solve_truth(sys: TruthSystem, mu: float) -> np.ndarray:
    """Truth solve (K + mu*M) u = F."""
    if mu < 1.0:
        raise ValueError(f"mu = {mu} outside the parameter domain [1, inf)")
    return solve_tridiagonal(sys.operator(mu), sys.F)


def h1_inner(sys: TruthSystem, u: np.ndarray, v: np.ndarray) -> float:
    """H1 inner product u^T * Gram * v."""
    if u.shape != v.shape or u.shape != (sys.n,):
        raise ValueError("vector shape does not match the truth space")
    return float(u @ sys.Gram.matvec(v))


def h1_norm(sys: TruthSystem, u: np.ndarray) -> float:
    return math.sqrt(max(h1_inner(sys, u, u), 0.0))


def riesz_representative(sys: TruthSystem, functional: np.ndarray) -> np.ndarray:
    """Riesz representative w = Gram^{-1} f, so h1_inner(w, v) = f^T v."""
    return solve_tridiagonal(sys.Gram, functional)


# --- analytic reference -------------------------------------------------

def analytic_solution(mu: float, x):
    """Exact solution of -u'' + mu*u = 1, u(0) = u(1) = 0.

    Written with exp(-sqrt(mu)*(1-x)) and exp(-sqrt(mu)*x) factors so it
    stays finite for arbitrarily large mu; algebraically identical to the
    cosh/sinh form.  Boundary values are exactly 0.0 in floating point.
    """
    if mu < 1.0:
        raise ValueError(f"mu = {mu} outside the parameter domain [1, inf)")
    s = math.sqrt(mu)
    x = np.asarray(x, dtype=float)
    num = np.exp(-s * (1.0 - x)) + np.exp(-s * x)
    den = 1.0 + math.exp(-s)
    u = (1.0 - num / den) / mu
    return u if u.ndim else float(u)


def analytic_derivative(mu: float, x):
    """Derivative of :func:`analytic_solution` (same overflow-safe form)."""
    s = math.sqrt(mu)
    x = np.asarray(x, dtype=float)
    num = np.exp(-s * x) - np.exp(-s * (1.0 - x))
    den = 1.0 + math.exp(-s)
    du = s * num / (den * mu)
    return du if du.ndim else float(du)


# 4-point Gauss-Legendre on [-1, 1]: exact through degree 7, which makes
# the per-cell quadrature error negligible next to the O(h) FE error.
_GAUSS_X = np.array(
    [-0.8611363115940526, -0.3399810435848563, 0.3399810435848563, 0.8611363115940526]
)
_GAUSS_W = np.array(
    [0.3478548451374538, 0.6521451548625461, 0.6521451548625461, 0.3478548451374538]
)


def h1_error_vs_analytic(sys: TruthSystem, u: np.ndarray, mu: float) -> float:
    """H1-norm distance between a discrete field and the analytic solution.

    The discrete field is the P1 interpolant of the interior nodal values
    `u` (zero at the boundary); the integral of (e')^2 + e^2 is taken
    cell by cell with 4-point Gauss quadrature.
    """
    h = sys.h
    full = np.zeros(sys.n_cells + 1)
    full[1:-1] = u
    left = full[:-1]
    right = full[1:]
    slope = (right - left) / h
    x_left = h * np.arange(sys.n_cells)
    total = 0.0
    for xi, w in zip(_GAUSS_X, _GAUSS_W):
        t = 0.5 * (xi + 1.0)
        x = x_left + t * h
        uh = left + t * (right - left)
        e = uh - analytic_solution(mu, x)
        de = slope - analytic_derivative(mu, x)
        total += w * float(np.sum(de * de + e * e))
    return math.sqrt(0.5 * h * total)
