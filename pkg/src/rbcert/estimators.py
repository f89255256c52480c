"""Four evaluations of the residual-norm error estimator.

For a reduced solution u_hat = sum_i gamma_i u_i of the affine problem
a0(u,v) + mu*a1(u,v) = b(v), the dual norm of the residual satisfies

    E(mu) = beta^{-1} * || G00 + sum_I x_I G_I ||_H1,
    x_I = alpha_k(mu) * gamma_i(mu),   I = k*N_hat + i,

with G00 the (negated) Riesz lift of b and G_I the Riesz lifts of the
operator terms applied to the basis.  The four evaluators compute the
same number along different routes with very different round-off floors:

* ``estimator_e1`` - assembles the full-size residual representative and
  takes one norm.  Accurate (floor ~ delta*eps) but costs O(N*N_hat).
* ``estimator_e2`` - the compact offline/online form
  delta^2 + 2 s.x + x.S x, cost O(N_hat^2), whose cancellation floor is
  delta*sqrt(eps): the radicand is a difference of O(delta^2) quantities
  while the true value sits at E^2.
* ``estimator_e2_dd`` - the same compact form evaluated in double-double
  arithmetic, which pushes the floor down to ~ delta*eps^2/... in
  practice below E1's own floor.
* ``estimator_e3`` - cancellation-free form: the squared estimator is a
  linear form q.X(mu) in the monomial vector X(mu), so it can be
  interpolated from d reference values V_r = (beta*E1(mu_r))^2 by
  solving T lambda = X(mu).  All summands are non-negative at the
  reference points, hence no cancellation.

Offline data builders (``build_e2_data``, ``build_e3_data``) compute the
Gram-matrix inner products in double-double and store both the dd values
and their correctly-rounded doubles; the working-precision estimator is
only as good as its offline data, and the interesting floors live in the
online evaluation, not in data-assembly noise.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .fem import TruthSystem, h1_inner, solve_truth
from .precision import dd_add, dd_mul, dd_sqrt, dd_sum, two_prod

logger = logging.getLogger(__name__)

COND_WARN_THRESHOLD = 1e14


class EstimatorBuildError(RuntimeError):
    """Raised when interpolation data cannot be built (singular T)."""


# --- E1: full-size reference ---------------------------------------------

def _pairwise_sum(vectors):
    """Balanced pairwise sum of a list of equal-length vectors."""
    n = len(vectors)
    if n == 1:
        return vectors[0]
    half = n // 2
    return _pairwise_sum(vectors[:half]) + _pairwise_sum(vectors[half:])


def estimator_e1(sys: TruthSystem, model, sol) -> float:
    """Residual dual norm via the full-size Riesz representative.

    g = riesz_b + sum_i gamma_i*riesz_a0[i] + mu*sum_i gamma_i*riesz_a1[i],
    accumulated with pairwise summation over the N_hat+2 vector terms
    (the mu-scaled group is itself pairwise-summed before scaling), then
    a single Gram quadratic form.  Cost O(N*N_hat).
    """
    gamma = np.asarray(sol.gamma, dtype=float)
    terms = [model.riesz_b]
    if gamma.size:
        terms += [g * r for g, r in zip(gamma, model.riesz_a0)]
        part1 = _pairwise_sum([g * r for g, r in zip(gamma, model.riesz_a1)])
        terms.append(sol.mu * part1)
    g = _pairwise_sum(terms)
    return math.sqrt(max(h1_inner(sys, g, g), 0.0)) / model.beta


# --- double-double Gram inner product -------------------------------------

def h1_inner_dd(sys: TruthSystem, u: np.ndarray, v: np.ndarray):
    """u^T * Gram * v in double-double; returns the (hi, lo) pair.

    All products are error-free transforms of the double inputs, and the
    final reduction is a pairwise double-double tree, so the result
    carries ~32 significant digits: effectively the exact value of the
    double-data inner product, to be rounded as the caller requires.
    """
    G = sys.Gram
    wh, wl = two_prod(G.diag, v)
    ah, al = two_prod(G.off, v[1:])
    bh, bl = two_prod(G.off, v[:-1])
    wh[:-1], wl[:-1] = dd_add((wh[:-1], wl[:-1]), (ah, al))
    wh[1:], wl[1:] = dd_add((wh[1:], wl[1:]), (bh, bl))
    th, tl = dd_mul((u, np.zeros_like(u)), (wh, wl))
    return dd_sum(th, tl)


# --- E2: compact offline/online form --------------------------------------

@dataclass(frozen=True)
class E2Data:
    """Offline data for the compact estimator.

    Index convention: I = k*N_hat + i with k in {0,1} and i in 0..N_hat-1
    (zero-based), i.e. the first N_hat slots belong to the a0 block and
    the next N_hat to the a1 block; x_I = alpha_k(mu)*gamma_i with
    alpha_0 = 1, alpha_1 = mu.

    The double fields hold the correctly-rounded values of the
    double-double fields (`*_dd` pairs), which are what
    :func:`estimator_e2_dd` consumes.
    """

    delta: float
    s: np.ndarray            # length 2*N_hat
    S: np.ndarray            # 2*N_hat x 2*N_hat, symmetric PSD
    delta2_dd: tuple         # (hi, lo)
    s_dd: tuple              # (hi array, lo array)
    S_dd: tuple              # (hi matrix, lo matrix)
    beta: float = 1.0

    @property
    def n_hat(self) -> int:
        return self.s.size // 2

    @property
    def delta2(self) -> float:
        return self.delta2_dd[0] + self.delta2_dd[1]


def build_e2_data(sys: TruthSystem, model) -> E2Data:
    """Assemble delta, s, S from the stored Riesz vectors.

    Inner products are evaluated with :func:`h1_inner_dd`; S is
    symmetrized after assembly by averaging with its transpose (exact in
    dd: the half-scaling is error-free).  The plain-double fields are the
    rounded dd values, so the working-precision estimator starts from
    correctly-rounded data and its floor is purely an online effect.
    """
    riesz = list(model.riesz_a0) + list(model.riesz_a1)
    m = len(riesz)
    d2 = h1_inner_dd(sys, model.riesz_b, model.riesz_b)
    sh = np.empty(m)
    sl = np.empty(m)
    for i, r in enumerate(riesz):
        sh[i], sl[i] = h1_inner_dd(sys, model.riesz_b, r)
    Sh = np.empty((m, m))
    Sl = np.empty((m, m))
    for i in range(m):
        for j in range(m):
            Sh[i, j], Sl[i, j] = h1_inner_dd(sys, riesz[i], riesz[j])
    # (S + S^T)/2 in dd; division by 2 is exact.
    Sh, Sl = dd_add((Sh, Sl), (Sh.T.copy(), Sl.T.copy()))
    Sh, Sl = 0.5 * Sh, 0.5 * Sl
    dh, dl = dd_sqrt(d2)
    delta = dh + dl
    return E2Data(
        delta=delta,
        s=sh + sl,
        S=Sh + Sl,
        delta2_dd=d2,
        s_dd=(sh, sl),
        S_dd=(Sh, Sl),
        beta=model.beta,
    )


def _small_x(sol) -> np.ndarray:
    """x_I = alpha_k(mu)*gamma_i: gamma for the a0 block, mu*gamma for a1."""
    gamma = np.asarray(sol.gamma, dtype=float)
    return np.concatenate([gamma, sol.mu * gamma])


def _pair_products(x: np.ndarray) -> np.ndarray:
    """fl(x_I * x_J) for I <= J in lexicographic order."""
    if x.size == 0:
        return np.empty(0)
    return np.concatenate([x[i] * x[i:] for i in range(x.size)])


def _upper_coefficients(S: np.ndarray) -> np.ndarray:
    """Quadratic-form coefficients over the I <= J pairs: S_II, 2*S_IJ."""
    rows = []
    for i in range(S.shape[0]):
        row = 2.0 * S[i, i:]
        row[0] = S[i, i]
        rows.append(row)
    return np.concatenate(rows) if rows else np.empty(0)


def x_dimension(n_hat: int) -> int:
    return 1 + 3 * n_hat + 2 * n_hat * n_hat


def x_vector(sol) -> np.ndarray:
    """Monomial vector X(mu) = (1; x_I; x_I*x_J for I <= J, lexicographic)."""
    x = _small_x(sol)
    return np.concatenate([[1.0], x, _pair_products(x)])


def q_coefficients(data: E2Data) -> np.ndarray:
    """Coefficients q with radicand(mu) = q . X(mu).

    q_0 = delta^2; q over the linear slots = 2*s_I; q over the quadratic
    slots = S_II on the diagonal and 2*S_IJ for I < J.
    """
    return np.concatenate([[data.delta2], 2.0 * data.s, _upper_coefficients(data.S)])


def estimator_e2(data: E2Data, sol):
    """Compact-form estimator; returns (value, radicand).

    The radicand delta^2 + 2 s.x + x.S x is evaluated in working
    precision as the linear form q.X(mu): each product is a rounded
    double, and the products are totalled with exact (compensated)
    summation.  The round-off floor therefore comes from the product
    roundings - O(eps) relative to the O(delta^2) summands - which is
    exactly the cancellation effect under study; the signed radicand is
    returned raw because a negative value is data, not an error.
    """
    X = x_vector(sol)
    q = q_coefficients(data)
    radicand = math.fsum(q * X)
    value = math.sqrt(max(radicand, 0.0)) / data.beta
    return value, radicand


def estimator_e2_dd(data: E2Data, sol):
    """Compact form in double-double; returns (value, clamped).

    Same term-by-term structure as :func:`estimator_e2`, but every
    product and sum is a double-double operation on the dd offline data;
    x is promoted exactly (zero trailing part).  The result is rounded
    back to working precision.  A negative dd radicand is clamped to
    zero and flagged.
    """
    x = _small_x(sol)
    zeros = np.zeros_like(x)
    d2h, d2l = data.delta2_dd
    sh, sl = data.s_dd
    Sh, Sl = data.S_dd
    lh, ll = dd_mul((2.0 * sh, 2.0 * sl), (x, zeros))
    qh_parts = [np.array([d2h]), lh]
    ql_parts = [np.array([d2l]), ll]
    for i in range(x.size):
        # exact x_I*x_J, then dd product with the (doubled) coefficient
        ph, pl = two_prod(x[i], x[i:])
        ch = 2.0 * Sh[i, i:]
        cl = 2.0 * Sl[i, i:]
        ch[0], cl[0] = Sh[i, i], Sl[i, i]
        th, tl = dd_mul((ch, cl), (ph, pl))
        qh_parts.append(th)
        ql_parts.append(tl)
    rh, rl = dd_sum(np.concatenate(qh_parts), np.concatenate(ql_parts))
    if rh < 0.0 or (rh == 0.0 and rl < 0.0):
        logger.info("estimator_e2_dd: negative dd radicand %r clamped", (rh, rl))
        return 0.0, True
    vh, vl = dd_sqrt((rh, rl))
    return (vh + vl) / data.beta, False


# --- E3: cancellation-free interpolated form -------------------------------

@dataclass
class E3Data:
    """Interpolation data: T columns are X(mu_r), V_r = (beta*E1(mu_r))^2.

    The columns are recomputable bit-for-bit from interp_params and the
    serialized model, which is what makes exact interpolation-node
    lookup (and bit-exact round-tripping) possible.
    """

    interp_params: np.ndarray     # d' parameter values mu_r
    T: np.ndarray                 # d x d' matrix
    V: np.ndarray                 # length d'
    cond_estimate: float
    beta: float = 1.0
    _lu: tuple = field(default=None, repr=False, compare=False)

    @property
    def d(self) -> int:
        return self.T.shape[0]

    @property
    def oversample(self) -> int:
        return self.T.shape[1] - self.T.shape[0]


def log_uniform_sampler(mu_min: float, mu_max: float):
    """Default interpolation-point sampler: uniform in log(mu), seeded."""
    lo, hi = math.log(mu_min), math.log(mu_max)

    def draw(n: int, seed: int) -> np.ndarray:
        rng = np.random.default_rng(seed)
        return np.exp(rng.uniform(lo, hi, size=n))

    return draw


def _lu_factor(A: np.ndarray):
    """Partial-pivoting LU, in place on a copy; returns (LU, piv)."""
    LU = A.astype(float, copy=True)
    n = LU.shape[0]
    piv = np.arange(n)
    for k in range(n - 1):
        p = k + int(np.argmax(np.abs(LU[k:, k])))
        if LU[p, k] == 0.0:
            raise np.linalg.LinAlgError(f"singular matrix: zero pivot at column {k}")
        if p != k:
            LU[[k, p]] = LU[[p, k]]
            piv[[k, p]] = piv[[p, k]]
        LU[k + 1:, k] /= LU[k, k]
        LU[k + 1:, k + 1:] -= np.outer(LU[k + 1:, k], LU[k, k + 1:])
    if LU[n - 1, n - 1] == 0.0:
        raise np.linalg.LinAlgError(f"singular matrix: zero pivot at column {n - 1}")
    return LU, piv


def _lu_solve(lu, b: np.ndarray) -> np.ndarray:
    LU, piv = lu
    n = LU.shape[0]
    x = b[piv].astype(float, copy=True)
    for k in range(n - 1):
        x[k + 1:] -= LU[k + 1:, k] * x[k]
    for k in range(n - 1, -1, -1):
        x[k] /= LU[k, k]
        x[:k] -= LU[:k, k] * x[k]
    return x


def build_e3_data(
    sys: TruthSystem,
    model,
    sampler,
    seed: int,
    oversample: int = 0,
    max_retries: int = 3,
) -> E3Data:
    """Draw interpolation points, assemble T and V.

    Draws d + oversample parameters via ``sampler(n, seed)``
    (deterministic given the seed), computes X(mu_r) and
    V_r = (beta*E1(mu_r))^2, and estimates cond(T).  The monomial map
    mu -> X(mu) traces a low-dimensional manifold, so T is always
    rank-deficient in exact arithmetic and its condition estimate is
    astronomically large by construction; that is recorded and warned
    about, not treated as failure.  A draw is retried with a fresh seed
    only if T is numerically singular (zero LU pivot / non-finite); if
    every retry fails, the build fails advising oversampling.
    """
    from .reduced import solve_reduced

    d = x_dimension(model.n_hat)
    n_cols = d + oversample
    failure = None
    for attempt in range(max_retries + 1):
        mus = np.asarray(sampler(n_cols, seed + attempt), dtype=float)
        T = np.empty((d, n_cols))
        V = np.empty(n_cols)
        for r, mu_r in enumerate(mus):
            sol = solve_reduced(model, float(mu_r))
            T[:, r] = x_vector(sol)
            e1 = estimator_e1(sys, model, sol)
            V[r] = (model.beta * e1) ** 2
        if not np.all(np.isfinite(T)):
            failure = "non-finite entries in T"
            continue
        cond = float(np.linalg.cond(T))
        if not math.isfinite(cond):
            failure = "numerically singular T (non-finite condition estimate)"
            continue
        lu = None
        if oversample == 0:
            try:
                lu = _lu_factor(T)
            except np.linalg.LinAlgError:
                failure = "numerically singular T (zero LU pivot)"
                continue
        if cond > COND_WARN_THRESHOLD:
            logger.warning(
                "cond(T) estimate %.3e exceeds %.0e (structural rank deficiency "
                "of the monomial map); pivots are nonzero, proceeding",
                cond,
                COND_WARN_THRESHOLD,
            )
        return E3Data(
            interp_params=mus,
            T=T,
            V=V,
            cond_estimate=cond,
            beta=model.beta,
            _lu=lu,
        )
    raise EstimatorBuildError(
        f"could not build interpolation data after {max_retries + 1} draws "
        f"({failure}); try a nonzero oversample for a least-squares fit"
    )


def estimator_e3(data: E3Data, sol):
    """Interpolated estimator; returns (value, clamped).

    At a stored interpolation node (bit-equal mu) the weights are the
    exact unit vector - T's column r is X(mu_r) bit-for-bit - so the node
    value is returned by lookup instead of dragging the unit solution
    through the ill-conditioned trailing pivots.  Elsewhere, square T is
    solved by the precomputed partial-pivoting LU and oversampled T in
    the least-squares sense.
    """
    hits = np.nonzero(data.interp_params == sol.mu)[0]
    if hits.size:
        total = float(data.V[hits[0]])
    else:
        X = x_vector(sol)
        if data.oversample == 0:
            if data._lu is None:
                data._lu = _lu_factor(data.T)
            lam = _lu_solve(data._lu, X)
        else:
            lam = np.linalg.lstsq(data.T, X, rcond=None)[0]
        total = float(lam @ data.V)
    clamped = total < 0.0
    if clamped:
        logger.info("estimator_e3: negative interpolated square %r clamped", total)
    value = math.sqrt(max(total, 0.0)) / data.beta
    return value, clamped


# --- diagnostic ------------------------------------------------------------

def true_error(sys: TruthSystem, model, sol) -> float:
    """H1 distance between the truth solve and the lifted reduced solution."""
    u = solve_truth(sys, sol.mu)
    if model.n_hat:
        u = u - model.basis_matrix @ np.asarray(sol.gamma, dtype=float)
    return math.sqrt(max(h1_inner(sys, u, u), 0.0))
