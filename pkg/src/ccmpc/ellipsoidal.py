"""Chance constraints for ellipsoidal constraint functions.

The hard constraint keeps the stacked vector z = [xbar; ubar] inside an
ellipsoid (z - delta)' Xi (z - delta) <= 1. Writing z - delta = h' + P' wbar
and whitening, the chance constraint at level 1 - alpha is conservatively
implied by

    sup_{||v|| <= 1} || xi + S v ||^2 <= 1,

with xi = Xi^(1/2) h' and S = beta * Xi^(1/2) P' Sigma_bar^(1/2), where beta
is the chi-square quantile multiplier of the disturbance confidence
ellipsoid. That sup condition is equivalent (S-procedure + Schur
complement) to the linear matrix inequality

    [[1 - lambda, 0,        xi'],
     [0,          lambda I, S' ],
     [xi,         S,        I  ]]  >= 0   for some lambda >= 0,

which is affine in the policy parameters and lambda, and is optimized here
through a -log det barrier with closed-form derivatives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chance import beta_ellipsoid
from .horizon import HorizonMatrices, SystemModel
from .linalg import check_symmetric, min_eigenvalue, psd_sqrt
from .policy import free_dim, gbar_free_indices

__all__ = [
    "EllipsoidalConstraint",
    "LmiConstraintData",
    "build_lmi_data",
    "build_lmi",
    "sup_norm_on_ball",
    "lmi_feasible",
    "lmi_barrier",
    "LogDetLmiConstraint",
]


@dataclass(frozen=True)
class EllipsoidalConstraint:
    """Hard constraint (z - delta)' Xi (z - delta) - 1 <= 0 on z = [xbar; ubar]."""

    Xi: np.ndarray
    delta: np.ndarray

    def __post_init__(self):
        Xi = check_symmetric(self.Xi, "Xi")
        delta = np.atleast_1d(np.asarray(self.delta, dtype=float))
        if delta.shape != (Xi.shape[0],):
            raise ValueError("delta must match the dimension of Xi")
        if np.linalg.eigvalsh(Xi)[0] < -1e-10 * max(1.0, np.abs(Xi).max()):
            raise ValueError("Xi must be positive semidefinite")
        object.__setattr__(self, "Xi", Xi)
        object.__setattr__(self, "delta", delta)

    def eta(self, z: np.ndarray) -> np.ndarray:
        """Evaluate the hard constraint function; z may be batched (..., dim)."""
        d = z - self.delta
        return np.einsum("...i,ij,...j->...", d, self.Xi, d) - 1.0


@dataclass(frozen=True)
class LmiConstraintData:
    """Affine maps of the LMI blocks over the free policy coordinates.

    xi(x) = xi0 + U @ dbar and S(x) = S0 + beta * U @ Gbar(x) @ sigma_half,
    with U = Xi^(1/2) [Bbar; I].
    """

    xi0: np.ndarray          # D
    U: np.ndarray            # D x Nm
    S0: np.ndarray           # D x Nn
    sigma_half: np.ndarray   # Nn x Nn
    beta: float
    n: int
    m: int
    N: int

    @property
    def D(self) -> int:
        return self.xi0.size

    @property
    def noise_dim(self) -> int:
        return self.N * self.n

    @property
    def theta_dim(self) -> int:
        return free_dim(self.n, self.m, self.N)

    def _split(self, flat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        nm = self.N * self.m
        G = np.zeros((nm, self.N * self.n))
        rows, cols = gbar_free_indices(self.n, self.m, self.N)
        G[rows, cols] = flat[nm:]
        return flat[:nm], G

    def xi(self, flat: np.ndarray) -> np.ndarray:
        dbar, _ = self._split(np.asarray(flat, dtype=float))
        return self.xi0 + self.U @ dbar

    def S(self, flat: np.ndarray) -> np.ndarray:
        _, G = self._split(np.asarray(flat, dtype=float))
        return self.S0 + self.beta * self.U @ G @ self.sigma_half


def build_lmi_data(ell: EllipsoidalConstraint, model: SystemModel,
                   mats: HorizonMatrices, alpha,
                   dof_override: int | None = None) -> LmiConstraintData:
    """Assemble the LMI data for one ellipsoidal chance constraint.

    The quantile multiplier covers the disturbance confidence ellipsoid, so
    its degrees of freedom are min(constraint dimension, N*n) by the same
    rule as the polytopic ellipsoid method.
    """
    n, m, N = model.n, model.m, model.N
    D = (N + 1) * n + N * m
    if ell.Xi.shape[0] != D:
        raise ValueError(f"Xi must be {D}x{D} for this model, got {ell.Xi.shape}")
    beta = beta_ellipsoid(alpha, D, N * n, dof_override=dof_override)
    xih = psd_sqrt(ell.Xi)
    sigma_half = psd_sqrt(model.Sigma_bar)
    E = np.vstack([mats.Bbar, np.eye(N * m)])
    c_base = np.concatenate([mats.Abar @ model.x0, np.zeros(N * m)])
    L0 = np.vstack([mats.Dbar, np.zeros((N * m, N * n))])
    return LmiConstraintData(
        xi0=xih @ (c_base - ell.delta),
        U=xih @ E,
        S0=beta * xih @ L0 @ sigma_half,
        sigma_half=sigma_half,
        beta=beta,
        n=n, m=m, N=N,
    )


def build_lmi(data: LmiConstraintData, theta_flat, lam: float) -> np.ndarray:
    """The symmetric LMI matrix at a given policy and lambda."""
    xi = data.xi(theta_flat)
    S = data.S(theta_flat)
    k, D = data.noise_dim, data.D
    size = 1 + k + D
    M = np.zeros((size, size))
    M[0, 0] = 1.0 - lam
    M[1:1 + k, 1:1 + k] = lam * np.eye(k)
    M[0, 1 + k:] = xi
    M[1 + k:, 0] = xi
    M[1:1 + k, 1 + k:] = S.T
    M[1 + k:, 1:1 + k] = S
    M[1 + k:, 1 + k:] += np.eye(D)
    return M


def sup_norm_on_ball(xi: np.ndarray, S: np.ndarray) -> float:
    """Exact maximum of ||xi + S v|| over the unit ball ||v|| <= 1.

    The maximizer solves (S'S - nu I) v = -S' xi with nu >= lambda_max(S'S)
    and ||v|| = 1; the 1-D secular equation in nu is solved by bisection on
    the eigendecomposition of S'S, with the usual hard-case branch when the
    leading eigenspace is orthogonal to S' xi.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    S = np.atleast_2d(np.asarray(S, dtype=float))
    if S.shape[0] != xi.size:
        raise ValueError("xi and S must agree on the output dimension")
    if S.size == 0 or np.abs(S).max() == 0.0:
        return float(np.linalg.norm(xi))
    lam, Q = np.linalg.eigh(S.T @ S)
    lam_max = lam[-1]
    bt = Q.T @ (S.T @ xi)
    bnorm = float(np.linalg.norm(bt))
    base = float(xi @ xi)

    def weight_sq(nu):
        return float(np.sum((bt / (nu - lam)) ** 2))

    scale = max(lam_max, 1.0)
    near_top = lam >= lam_max - 1e-12 * scale
    top_mass = float(np.sum(bt[near_top] ** 2))
    if top_mass <= (1e-14 * max(bnorm, 1e-300)) ** 2:
        # Hard case: no coupling into the leading eigenspace.
        rest = ~near_top
        phi0 = float(np.sum((bt[rest] / (lam_max - lam[rest])) ** 2)) if rest.any() else 0.0
        if phi0 <= 1.0:
            v = np.zeros_like(bt)
            v[rest] = bt[rest] / (lam_max - lam[rest])
            tau_sq = 1.0 - phi0
            val_sq = base + float(lam[rest] @ (v[rest] ** 2)) + 2.0 * float(bt[rest] @ v[rest]) \
                + lam_max * tau_sq
            return math.sqrt(max(val_sq, 0.0))
    # Regular case: bisection on (lam_max, lam_max + ||b||].
    lo, hi = lam_max, lam_max + max(bnorm, 1e-300)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lam_max or weight_sq(mid) > 1.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * max(hi, 1.0):
            break
    nu = hi
    v = bt / (nu - lam)
    val_sq = base + float(lam @ (v * v)) + 2.0 * float(bt @ v)
    return math.sqrt(max(val_sq, 0.0))


def lmi_feasible(data: LmiConstraintData, theta_flat,
                 tol: float = 0.0) -> tuple[bool, float | None]:
    """Whether some lambda >= 0 makes the LMI hold at this policy.

    Decided through the equivalent scalar condition sup <= 1; when feasible,
    a witness lambda is located by maximizing the smallest eigenvalue of the
    LMI matrix (concave in lambda) over [0, 1] with a ternary search.
    """
    flat = np.asarray(theta_flat, dtype=float)
    sup = sup_norm_on_ball(data.xi(flat), data.S(flat))
    if sup > 1.0 + tol:
        return False, None

    def smallest(lam):
        return min_eigenvalue(build_lmi(data, flat, lam))

    lo, hi = 0.0, 1.0
    for _ in range(80):
        third = (hi - lo) / 3.0
        l1, l2 = lo + third, hi - third
        if smallest(l1) < smallest(l2):
            lo = l1
        else:
            hi = l2
    return True, float(0.5 * (lo + hi))


class _LmiWorkspace:
    """Blocks of W = M^-1 and the derived inner products used by the barrier."""

    def __init__(self, data: LmiConstraintData, W: np.ndarray):
        k = data.noise_dim
        self.W = W
        self.a = W[0, 0]
        self.b = W[1:1 + k, 0]
        self.c = W[1 + k:, 0]
        self.Bm = W[1:1 + k, 1:1 + k]
        self.C = W[1 + k:, 1:1 + k]
        self.Dm = W[1 + k:, 1 + k:]
        U, Sh = data.U, data.sigma_half
        self.cu = U.T @ self.c                  # Nm
        self.bs = Sh @ self.b                   # Nn
        self.UDU = U.T @ self.Dm @ U            # Nm x Nm
        self.SBS = Sh @ self.Bm @ Sh            # Nn x Nn
        self.UCS = U.T @ self.C @ Sh            # Nm x Nn

    def trace_lambda(self) -> float:
        return float(-self.a + np.trace(self.Bm))


def _logdet_inverse(M: np.ndarray) -> tuple[float, np.ndarray] | None:
    try:
        chol = np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        return None
    logdet = 2.0 * float(np.log(np.diag(chol)).sum())
    inv = np.linalg.inv(M)
    return -logdet, 0.5 * (inv + inv.T)


def _barrier_gradient(data: LmiConstraintData, ws: _LmiWorkspace) -> np.ndarray:
    """Gradient of -log det M over (free policy coordinates, lambda)."""
    rows, cols = gbar_free_indices(data.n, data.m, data.N)
    grad = np.empty(data.theta_dim + 1)
    nm = data.N * data.m
    grad[:nm] = -2.0 * ws.cu
    grad[nm:-1] = -2.0 * data.beta * ws.UCS[rows, cols]
    grad[-1] = -ws.trace_lambda()
    return grad


def lmi_barrier(data: LmiConstraintData, theta_flat, lam: float) -> tuple[float, np.ndarray]:
    """Value and exact gradient of -log det of the LMI matrix.

    The gradient is over the concatenated vector (free policy coordinates,
    lambda). Raises ValueError when the matrix is not positive definite;
    line searches must backtrack on that signal.
    """
    flat = np.asarray(theta_flat, dtype=float)
    res = _logdet_inverse(build_lmi(data, flat, lam))
    if res is None:
        raise ValueError("LMI matrix is not positive definite at this point")
    value, W = res
    return value, _barrier_gradient(data, _LmiWorkspace(data, W))


class LogDetLmiConstraint:
    """Solver-facing LMI constraint over x = [policy coordinates, lambda].

    With `slack=True` the variable vector carries a trailing s and the
    barrier acts on M + s I (used by phase 1). The Hessian is assembled from
    the rank-two structure of the per-coordinate directional derivatives,
    which keeps the cost at a few small matrix products per Newton step.
    """

    def __init__(self, data: LmiConstraintData, slack: bool = False):
        self.data = data
        self.slack = slack
        self._rows, self._cols = gbar_free_indices(data.n, data.m, data.N)

    def _unpack(self, x: np.ndarray):
        t = self.data.theta_dim
        if self.slack:
            return x[:t], float(x[t]), float(x[t + 1])
        return x[:t], float(x[t]), 0.0

    def _matrix(self, x: np.ndarray) -> np.ndarray:
        flat, lam, s = self._unpack(x)
        M = build_lmi(self.data, flat, lam)
        if s:
            M[np.diag_indices_from(M)] += s
        return M

    def violation(self, x: np.ndarray) -> float:
        flat, lam, s = self._unpack(x)
        return -min_eigenvalue(build_lmi(self.data, flat, lam)) - s

    def barrier_value(self, x: np.ndarray) -> float:
        res = _logdet_inverse(self._matrix(x))
        return math.inf if res is None else res[0]

    def _workspace(self, x: np.ndarray) -> _LmiWorkspace:
        res = _logdet_inverse(self._matrix(x))
        if res is None:
            raise ValueError("LMI barrier evaluated outside its domain")
        return _LmiWorkspace(self.data, res[1])

    def barrier_grad(self, x: np.ndarray) -> np.ndarray:
        ws = self._workspace(x)
        core = _barrier_gradient(self.data, ws)
        if not self.slack:
            return core
        return np.append(core, -float(np.trace(ws.W)))

    def barrier_hess(self, x: np.ndarray) -> np.ndarray:
        data = self.data
        ws = self._workspace(x)
        beta = data.beta
        rows, cols = self._rows, self._cols
        nm = data.N * data.m
        t = data.theta_dim
        dim = t + 1 + (1 if self.slack else 0)
        H = np.zeros((dim, dim))

        # policy-policy block via the rank-two directional structure
        H[:nm, :nm] = 2.0 * (ws.a * ws.UDU + np.outer(ws.cu, ws.cu))
        dg = 2.0 * beta * (ws.UDU[:, rows] * ws.bs[cols]
                           + ws.UCS[:, cols] * ws.cu[rows])
        H[:nm, nm:t] = dg
        H[nm:t, :nm] = dg.T
        A = ws.UCS.T[np.ix_(cols, rows)]
        Bq = ws.UCS[np.ix_(rows, cols)]
        H[nm:t, nm:t] = 2.0 * beta * beta * (
            ws.SBS[np.ix_(cols, cols)] * ws.UDU[np.ix_(rows, rows)] + A * Bq)

        # lambda row/column: W D W with D = diag(-1, I, 0)
        W = ws.W
        k = data.noise_dim
        w0 = W[:, 0]
        Wmid = W[:, 1:1 + k]
        P = Wmid @ Wmid.T - np.outer(w0, w0)
        H[t, t] = -P[0, 0] + np.trace(P[1:1 + k, 1:1 + k])
        p_dcol = 2.0 * data.U.T @ P[1 + k:, 0]
        H[:nm, t] = p_dcol
        H[t, :nm] = p_dcol
        P12 = P[1:1 + k, 1 + k:]
        gcol = 2.0 * beta * (data.sigma_half @ P12 @ data.U)[cols, rows]
        H[nm:t, t] = gcol
        H[t, nm:t] = gcol

        if self.slack:
            # slack direction has dM/ds = I, so products use W^2
            W2 = W @ W
            H[t + 1, t + 1] = float(np.trace(W2))
            s_d = 2.0 * data.U.T @ W2[1 + k:, 0]
            H[:nm, t + 1] = s_d
            H[t + 1, :nm] = s_d
            sg = 2.0 * beta * (data.sigma_half @ W2[1:1 + k, 1 + k:] @ data.U)[cols, rows]
            H[nm:t, t + 1] = sg
            H[t + 1, nm:t] = sg
            cross = -W2[0, 0] + float(np.trace(W2[1:1 + k, 1:1 + k]))
            H[t, t + 1] = cross
            H[t + 1, t] = cross
        return H

    def shifted(self) -> "LogDetLmiConstraint":
        return LogDetLmiConstraint(self.data, slack=True)
