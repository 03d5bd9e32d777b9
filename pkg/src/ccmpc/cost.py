"""Expected quadratic cost of a disturbance-feedback policy, in closed form.

For [xbar; ubar] = c + L wbar with wbar ~ N(0, Sigma_bar) and a PSD weight
matrix M, the expectation of the stage-cost quadratic form is

    E[z' M z] = c' M c + tr(L' M L Sigma_bar),

which is itself a convex quadratic in the free policy coordinates. The
module exposes the scalar value, its exact gradient, the full quadratic
form used by the solver, and the unconstrained Riccati baseline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .horizon import HorizonMatrices, SystemModel
from .linalg import check_symmetric
from .policy import PolicyParams, free_dim, gbar_free_indices, response_maps

__all__ = [
    "QuadraticCost",
    "stage_cost",
    "expected_cost",
    "expected_cost_gradient",
    "CostQuadraticForm",
    "quadratic_form",
    "lqg_riccati",
]


@dataclass(frozen=True)
class QuadraticCost:
    """Symmetric PSD weight over the stacked vector [xbar; ubar]."""

    M: np.ndarray

    def __post_init__(self):
        M = check_symmetric(self.M, "cost matrix M")
        eigs = np.linalg.eigvalsh(M)
        if eigs[0] < -1e-10 * max(1.0, eigs[-1]):
            raise ValueError(f"cost matrix M must be PSD, min eigenvalue {eigs[0]:.3e}")
        object.__setattr__(self, "M", M)


def stage_cost(Q: np.ndarray, R: np.ndarray, N: int) -> QuadraticCost:
    """Block-diagonal weight diag(Q, ..., Q, R, ..., R): Q at stages 0..N
    (terminal included), R at stages 0..N-1."""
    Q = check_symmetric(Q, "Q")
    R = check_symmetric(R, "R")
    n, m = Q.shape[0], R.shape[0]
    M = np.zeros(((N + 1) * n + N * m,) * 2)
    for t in range(N + 1):
        M[t * n:(t + 1) * n, t * n:(t + 1) * n] = Q
    off = (N + 1) * n
    for t in range(N):
        M[off + t * m:off + (t + 1) * m, off + t * m:off + (t + 1) * m] = R
    return QuadraticCost(M)


def _stacked_input_map(mats: HorizonMatrices) -> np.ndarray:
    """E = [Bbar; I]: how ubar enters the stacked vector [xbar; ubar]."""
    return np.vstack([mats.Bbar, np.eye(mats.N * mats.m)])


def expected_cost(theta: PolicyParams, cost: QuadraticCost, model: SystemModel,
                  mats: HorizonMatrices) -> float:
    """Closed-form E[z' M z] for the closed loop under the given policy."""
    rm = response_maps(theta, model, mats)
    mean_term = rm.c @ cost.M @ rm.c
    trace_term = np.sum((cost.M @ rm.L) * (rm.L @ model.Sigma_bar))
    return float(mean_term + trace_term)


def expected_cost_gradient(theta: PolicyParams, cost: QuadraticCost,
                           model: SystemModel, mats: HorizonMatrices) -> np.ndarray:
    """Exact gradient of `expected_cost` with respect to the free coordinates
    (dbar first, then the free Gbar entries in flat order)."""
    rm = response_maps(theta, model, mats)
    E = _stacked_input_map(mats)
    grad_d = 2.0 * E.T @ (cost.M @ rm.c)
    grad_G = 2.0 * E.T @ cost.M @ rm.L @ model.Sigma_bar
    rows, cols = gbar_free_indices(model.n, model.m, model.N)
    return np.concatenate([grad_d, grad_G[rows, cols]])


@dataclass(frozen=True)
class CostQuadraticForm:
    """Expected cost as an explicit quadratic: value = 0.5 x'Hx + g0'x + c0."""

    H: np.ndarray
    g0: np.ndarray
    c0: float

    def value(self, x: np.ndarray) -> float:
        return float(0.5 * x @ self.H @ x + self.g0 @ x + self.c0)

    def grad(self, x: np.ndarray) -> np.ndarray:
        return self.H @ x + self.g0

    def hess(self, x: np.ndarray) -> np.ndarray:
        return self.H


def quadratic_form(cost: QuadraticCost, model: SystemModel,
                   mats: HorizonMatrices) -> CostQuadraticForm:
    """Assemble the expected cost as a quadratic in the free coordinates.

    The Hessian is constant: 2 E'ME on the dbar block and the Kronecker
    selection 2 (E'ME)[k,k'] Sigma_bar[j,j'] on the free Gbar entries
    (cross block zero, since the mean term depends only on dbar and the
    trace term only on Gbar).
    """
    n, m, N = model.n, model.m, model.N
    dim = free_dim(n, m, N)
    E = _stacked_input_map(mats)
    K = E.T @ cost.M @ E
    c_base = np.concatenate([mats.Abar @ model.x0, np.zeros(N * m)])
    L0 = np.vstack([mats.Dbar, np.zeros((N * m, N * n))])

    rows, cols = gbar_free_indices(n, m, N)
    H = np.zeros((dim, dim))
    H[:N * m, :N * m] = 2.0 * K
    H[N * m:, N * m:] = 2.0 * K[np.ix_(rows, rows)] * model.Sigma_bar[np.ix_(cols, cols)]

    g0 = np.zeros(dim)
    g0[:N * m] = 2.0 * E.T @ (cost.M @ c_base)
    gG = 2.0 * E.T @ cost.M @ L0 @ model.Sigma_bar
    g0[N * m:] = gG[rows, cols]

    c0 = float(c_base @ cost.M @ c_base
               + np.sum((cost.M @ L0) * (L0 @ model.Sigma_bar)))
    return CostQuadraticForm(H=H, g0=g0, c0=c0)


def lqg_riccati(A: np.ndarray, B: np.ndarray, Q: np.ndarray, R: np.ndarray,
                N: int) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Finite-horizon LQR gains by the backward dynamic programming recursion.

    Returns (K, P) with K[t] the feedback gain (u = -K[t] x) for t = 0..N-1
    and P[t] the cost-to-go matrices for t = 0..N, P[N] = Q.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    Q = check_symmetric(Q, "Q")
    R = check_symmetric(R, "R")
    if np.linalg.eigvalsh(R)[0] <= 0:
        raise ValueError("R must be positive definite")
    P = [None] * (N + 1)
    K = [None] * N
    P[N] = Q
    for t in range(N - 1, -1, -1):
        S = B.T @ P[t + 1] @ B + R
        K[t] = np.linalg.solve(S, B.T @ P[t + 1] @ A)
        Pt = Q + A.T @ P[t + 1] @ A - A.T @ P[t + 1] @ B @ K[t]
        P[t] = 0.5 * (Pt + Pt.T)
    return K, P
