"""Reduced-basis core: snapshot model, greedy construction, serialization.

A :class:`ReducedModel` holds the snapshot basis plus every projected and
Riesz-lifted quantity the online stage needs:

* ``A0_hat``, ``A1_hat``, ``b_hat`` - Galerkin projections of the affine
  operator blocks a0 = K, a1 = M and the load, so the reduced system
  (A0_hat + mu*A1_hat) gamma = b_hat solves in O(N_hat^3) independently
  of the truth size.
* ``riesz_b``, ``riesz_a0[i]``, ``riesz_a1[i]`` - Riesz representatives
  of the residual pieces.  Sign convention: riesz_b = -Gram^{-1} F, so
  the residual representative is riesz_b + sum_I x_I * riesz-terms with
  no extra minus anywhere downstream.

Snapshots are stored raw by default (the conditioning of the derived
interpolation matrix at larger basis sizes is itself an effect under
study); an optional Gram-Schmidt flag orthonormalizes the basis vectors
as they are added, which is what a run pushed to round-off-floor
convergence needs.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

from .estimators import E2Data, E3Data, estimator_e1
from .fem import TruthSystem, h1_inner, riesz_representative, solve_truth

logger = logging.getLogger(__name__)


class DependentSnapshotError(RuntimeError):
    """New snapshot is (numerically) linearly dependent on the basis."""

    def __init__(self, mu: float, pivot_ratio: float):
        super().__init__(
            f"snapshot at mu={mu!r} rejected: relative Gram pivot "
            f"{pivot_ratio:.3e} signals linear dependence"
        )
        self.mu = mu
        self.pivot_ratio = pivot_ratio


@dataclass(frozen=True)
class ReducedSolution:
    mu: float
    gamma: np.ndarray


class ReducedModel:
    """Snapshot basis plus projected operators and Riesz lifts."""

    def __init__(self, sys: TruthSystem, beta: float = 1.0, orthonormalize: bool = False):
        self.beta = float(beta)
        self.orthonormalize = bool(orthonormalize)
        self.snapshots: list[np.ndarray] = []
        self.snapshot_params: list[float] = []
        self.A0_hat = np.empty((0, 0))
        self.A1_hat = np.empty((0, 0))
        self.b_hat = np.empty(0)
        self.riesz_b = -riesz_representative(sys, sys.F)
        self.riesz_a0: list[np.ndarray] = []
        self.riesz_a1: list[np.ndarray] = []
        self.delta = np.sqrt(max(h1_inner(sys, self.riesz_b, self.riesz_b), 0.0))

    @property
    def n_hat(self) -> int:
        return len(self.snapshots)

    @property
    def basis_matrix(self) -> np.ndarray:
        return np.column_stack(self.snapshots) if self.snapshots else np.empty((0, 0))

    def empty_solution(self, mu: float) -> ReducedSolution:
        return ReducedSolution(float(mu), np.empty(0))


def add_snapshot(
    model: ReducedModel,
    sys: TruthSystem,
    mu_new: float,
    dependence_tol: float = 1e-12,
) -> ReducedModel:
    """Solve the truth problem at mu_new and extend the model in place.

    The new snapshot is rejected (``ValueError``) if mu_new is already a
    snapshot parameter, and rejected with :class:`DependentSnapshotError`
    if its Gram pivot against the current basis falls below
    dependence_tol * ||u_new||^2 - for a raw basis the pivot is the
    Schur complement of the snapshot Gram matrix, for an orthonormalized
    basis it is the squared norm surviving Gram-Schmidt.
    """
    mu_new = float(mu_new)
    if mu_new in model.snapshot_params:
        raise ValueError(f"mu={mu_new!r} is already a snapshot parameter")
    u = solve_truth(sys, mu_new)
    nrm2 = h1_inner(sys, u, u)
    if model.orthonormalize:
        v = u.copy()
        for _ in range(2):  # twice-is-enough re-orthogonalization
            for w in model.snapshots:
                v -= h1_inner(sys, w, v) * w
        pivot = h1_inner(sys, v, v)
        if pivot <= dependence_tol * nrm2:
            raise DependentSnapshotError(mu_new, pivot / nrm2)
        basis_vec = v / np.sqrt(pivot)
    else:
        if model.n_hat:
            g = np.array([h1_inner(sys, w, u) for w in model.snapshots])
            Gb = np.array(
                [[h1_inner(sys, wi, wj) for wj in model.snapshots] for wi in model.snapshots]
            )
            pivot = nrm2 - float(g @ np.linalg.solve(Gb, g))
        else:
            pivot = nrm2
        if pivot <= dependence_tol * nrm2:
            raise DependentSnapshotError(mu_new, pivot / nrm2)
        basis_vec = u
    n = model.n_hat
    A0 = np.empty((n + 1, n + 1))
    A1 = np.empty((n + 1, n + 1))
    A0[:n, :n] = model.A0_hat
    A1[:n, :n] = model.A1_hat
    Kv = sys.K.matvec(basis_vec)
    Mv = sys.M.matvec(basis_vec)
    for i, w in enumerate(model.snapshots):
        A0[i, n] = A0[n, i] = float(w @ Kv)
        A1[i, n] = A1[n, i] = float(w @ Mv)
    A0[n, n] = float(basis_vec @ Kv)
    A1[n, n] = float(basis_vec @ Mv)
    model.A0_hat = A0
    model.A1_hat = A1
    model.b_hat = np.append(model.b_hat, float(sys.F @ basis_vec))
    model.snapshots.append(basis_vec)
    model.snapshot_params.append(mu_new)
    model.riesz_a0.append(riesz_representative(sys, Kv))
    model.riesz_a1.append(riesz_representative(sys, Mv))
    return model


def solve_reduced(model: ReducedModel, mu: float) -> ReducedSolution:
    """Solve (A0_hat + mu*A1_hat) gamma = b_hat; O(N_hat^3), truth-free."""
    if model.n_hat < 1:
        raise ValueError("reduced model is empty")
    if mu < 1.0:
        raise ValueError(f"mu = {mu} outside the parameter domain [1, inf)")
    A = model.A0_hat + mu * model.A1_hat
    try:
        gamma = np.linalg.solve(A, model.b_hat)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            f"singular reduced system at mu={mu!r} (snapshot dependence?): {exc}"
        ) from exc
    return ReducedSolution(float(mu), gamma)


def greedy_build(
    sys: TruthSystem,
    training_set,
    n_max: int,
    tol: float = 1e-14,
    *,
    beta: float = 1.0,
    orthonormalize: bool = False,
    dependence_tol: float = 1e-12,
):
    """Greedy basis construction driven by the full-size estimator.

    Repeatedly selects the training parameter maximizing E1 (the
    accurate evaluation - a compact-form estimator would stagnate at its
    round-off floor and corrupt the selection), adds its snapshot, and
    stops at n_max, when the max estimator drops to tol, or when the
    selected snapshot is numerically dependent.  Ties break to the
    smallest mu: candidates are scanned in ascending order and only a
    strictly larger estimate displaces the incumbent, so the first pick
    (all candidates tie at delta) is the smallest training parameter.

    Returns (model, history) with one (mu_selected, max_estimator) pair
    per accepted snapshot.
    """
    training = sorted(float(mu) for mu in training_set)
    if not training:
        raise ValueError("empty training set")
    if training[0] < 1.0:
        raise ValueError("training parameters must be >= 1")
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    model = ReducedModel(sys, beta=beta, orthonormalize=orthonormalize)
    history: list[tuple[float, float]] = []
    while model.n_hat < n_max:
        selected = set(model.snapshot_params)
        best_mu = None
        best_val = -np.inf
        for mu in training:
            if mu in selected:
                continue
            sol = solve_reduced(model, mu) if model.n_hat else model.empty_solution(mu)
            val = estimator_e1(sys, model, sol)
            if val > best_val:
                best_mu, best_val = mu, val
        if best_mu is None or best_val <= tol:
            break
        try:
            add_snapshot(model, sys, best_mu, dependence_tol=dependence_tol)
        except DependentSnapshotError as exc:
            logger.warning("greedy stopped at N_hat=%d: %s", model.n_hat, exc)
            break
        history.append((best_mu, best_val))
    return model, history


# --- serialization ---------------------------------------------------------
#
# JSON with every float rendered via float.hex(): bit-exact round-trip,
# human-greppable, and deterministic bytes (sorted keys, fixed separators).

FORMAT_NAME = "rbcert-artifact"
FORMAT_VERSION = 1


def _enc_vec(v) -> list:
    return [float(x).hex() for x in np.asarray(v, dtype=float)]

def _dec_vec(v) -> np.ndarray:
    return np.array([float.fromhex(x) for x in v], dtype=float)

def _enc_mat(A) -> list:
    return [_enc_vec(row) for row in np.asarray(A, dtype=float)]

def _dec_mat(rows, width_hint: int = 0) -> np.ndarray:
    if not rows:
        return np.empty((0, width_hint))
    return np.vstack([_dec_vec(r) for r in rows])


def model_to_dict(model: ReducedModel) -> dict:
    return {
        "beta": float(model.beta).hex(),
        "orthonormalize": model.orthonormalize,
        "snapshot_params": _enc_vec(model.snapshot_params),
        "snapshots": [_enc_vec(u) for u in model.snapshots],
        "A0_hat": _enc_mat(model.A0_hat),
        "A1_hat": _enc_mat(model.A1_hat),
        "b_hat": _enc_vec(model.b_hat),
        "riesz_b": _enc_vec(model.riesz_b),
        "riesz_a0": [_enc_vec(u) for u in model.riesz_a0],
        "riesz_a1": [_enc_vec(u) for u in model.riesz_a1],
    }


def model_from_dict(d: dict, sys: TruthSystem) -> ReducedModel:
    model = ReducedModel.__new__(ReducedModel)
    model.beta = float.fromhex(d["beta"])
    model.orthonormalize = bool(d["orthonormalize"])
    model.snapshot_params = [float(x) for x in _dec_vec(d["snapshot_params"])]
    model.snapshots = [_dec_vec(u) for u in d["snapshots"]]
    n = len(model.snapshots)
    model.A0_hat = _dec_mat(d["A0_hat"], n)
    model.A1_hat = _dec_mat(d["A1_hat"], n)
    model.b_hat = _dec_vec(d["b_hat"])
    model.riesz_b = _dec_vec(d["riesz_b"])
    model.riesz_a0 = [_dec_vec(u) for u in d["riesz_a0"]]
    model.riesz_a1 = [_dec_vec(u) for u in d["riesz_a1"]]
    model.delta = np.sqrt(max(h1_inner(sys, model.riesz_b, model.riesz_b), 0.0))
    return model


def e2data_to_dict(data: E2Data) -> dict:
    return {
        "delta": float(data.delta).hex(),
        "s": _enc_vec(data.s),
        "S": _enc_mat(data.S),
        "delta2_dd": [float(data.delta2_dd[0]).hex(), float(data.delta2_dd[1]).hex()],
        "s_dd": [_enc_vec(data.s_dd[0]), _enc_vec(data.s_dd[1])],
        "S_dd": [_enc_mat(data.S_dd[0]), _enc_mat(data.S_dd[1])],
        "beta": float(data.beta).hex(),
    }


def e2data_from_dict(d: dict) -> E2Data:
    m = len(d["s"])
    return E2Data(
        delta=float.fromhex(d["delta"]),
        s=_dec_vec(d["s"]),
        S=_dec_mat(d["S"], m),
        delta2_dd=(float.fromhex(d["delta2_dd"][0]), float.fromhex(d["delta2_dd"][1])),
        s_dd=(_dec_vec(d["s_dd"][0]), _dec_vec(d["s_dd"][1])),
        S_dd=(_dec_mat(d["S_dd"][0], m), _dec_mat(d["S_dd"][1], m)),
        beta=float.fromhex(d["beta"]),
    )


def e3data_to_dict(data: E3Data) -> dict:
    return {
        "interp_params": _enc_vec(data.interp_params),
        "T": _enc_mat(data.T),
        "V": _enc_vec(data.V),
        "cond_estimate": float(data.cond_estimate).hex(),
        "beta": float(data.beta).hex(),
    }


def e3data_from_dict(d: dict) -> E3Data:
    T = _dec_mat(d["T"])
    return E3Data(
        interp_params=_dec_vec(d["interp_params"]),
        T=T,
        V=_dec_vec(d["V"]),
        cond_estimate=float.fromhex(d["cond_estimate"]),
        beta=float.fromhex(d["beta"]),
    )


def dumps_deterministic(payload: dict) -> bytes:
    """Canonical JSON bytes: sorted keys, no whitespace drift."""
    return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("ascii")
