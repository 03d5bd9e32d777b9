"""Finite-horizon stacking of linear dynamics and sampled-data discretization.

The plant is x(t+1) = A x(t) + B u(t) + w(t). Over a horizon of N steps the
stacked trajectory obeys

    xbar = Abar x0 + Bbar ubar + Dbar wbar,

with xbar collecting x(0..N), ubar the N inputs and wbar the N disturbances.
Abar stacks the powers of A; Bbar and Dbar are lower block triangular with
blocks A^(t-1-s) B and A^(t-1-s) respectively.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .linalg import check_symmetric, cholesky_jitter

__all__ = [
    "SystemModel",
    "HorizonMatrices",
    "stack_dynamics",
    "expm",
    "discretize",
    "iid_noise_cov",
]


@dataclass(frozen=True)
class SystemModel:
    """Discrete-time linear plant with stacked Gaussian noise covariance.

    Sigma_bar is the covariance of the stacked disturbance wbar (dimension
    N*n); use `iid_noise_cov` for the common i.i.d. per-step case.
    """

    A: np.ndarray
    B: np.ndarray
    Sigma_bar: np.ndarray
    x0: np.ndarray
    N: int

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.atleast_2d(np.asarray(self.B, dtype=float))
        x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError(f"A must be square, got {A.shape}")
        if B.shape[0] != n:
            raise ValueError(f"B must have {n} rows, got {B.shape}")
        if x0.shape != (n,):
            raise ValueError(f"x0 must have length {n}, got {x0.shape}")
        if self.N < 1:
            raise ValueError("horizon length N must be >= 1")
        Sigma = check_symmetric(self.Sigma_bar, "Sigma_bar")
        if Sigma.shape != (self.N * n, self.N * n):
            raise ValueError(
                f"Sigma_bar must be {self.N * n}x{self.N * n}, got {Sigma.shape}")
        cholesky_jitter(Sigma)  # PSD check
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "Sigma_bar", Sigma)
        object.__setattr__(self, "x0", x0)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]


@dataclass(frozen=True)
class HorizonMatrices:
    """Stacked horizon matrices: Abar (N+1)n x n, Bbar (N+1)n x Nm, Dbar (N+1)n x Nn."""

    Abar: np.ndarray
    Bbar: np.ndarray
    Dbar: np.ndarray
    n: int = field(repr=False, default=0)
    m: int = field(repr=False, default=0)
    N: int = field(repr=False, default=0)


def iid_noise_cov(sigma2: float, n: int, N: int) -> np.ndarray:
    """Stacked covariance for w(t) ~ N(0, sigma2*I) i.i.d. over the horizon."""
    if sigma2 < 0:
        raise ValueError("sigma2 must be nonnegative")
    return sigma2 * np.eye(N * n)


def stack_dynamics(model: SystemModel) -> HorizonMatrices:
    """Build the stacked matrices of the compact horizon dynamics."""
    A, B, N = model.A, model.B, model.N
    n, m = model.n, model.m

    powers = [np.eye(n)]
    for _ in range(N):
        powers.append(A @ powers[-1])

    Abar = np.vstack(powers)
    Bbar = np.zeros(((N + 1) * n, N * m))
    Dbar = np.zeros(((N + 1) * n, N * n))
    for t in range(1, N + 1):
        for s in range(t):
            Ap = powers[t - 1 - s]
            Dbar[t * n:(t + 1) * n, s * n:(s + 1) * n] = Ap
            Bbar[t * n:(t + 1) * n, s * m:(s + 1) * m] = Ap @ B
    return HorizonMatrices(Abar=Abar, Bbar=Bbar, Dbar=Dbar, n=n, m=m, N=N)


# Pade-13 numerator coefficients and the Higham scaling threshold.
_PADE13_B = (
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0, 670442572800.0,
    33522128640.0, 1323241920.0, 40840800.0, 960960.0, 16380.0, 182.0, 1.0,
)
_PADE13_THETA = 5.371920351148152


def expm(M: np.ndarray) -> np.ndarray:
    """Matrix exponential by scaling and squaring with a Pade-13 approximant."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[0] != M.shape[1]:
        raise ValueError(f"expm requires a square matrix, got {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("expm requires finite entries")
    dim = M.shape[0]
    norm1 = np.abs(M).sum(axis=0).max() if dim else 0.0
    squarings = max(0, int(math.ceil(math.log2(norm1 / _PADE13_THETA)))) if norm1 > _PADE13_THETA else 0
    A = M / (2.0 ** squarings)

    b = _PADE13_B
    ident = np.eye(dim)
    A2 = A @ A
    A4 = A2 @ A2
    A6 = A2 @ A4
    U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2)
             + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * ident)
    V = (A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2)
         + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * ident)
    F = np.linalg.solve(V - U, V + U)
    for _ in range(squarings):
        F = F @ F
    return F


def discretize(Ac: np.ndarray, Bc: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Zero-order-hold discretization of dx/dt = Ac x + Bc u with step h.

    Uses the augmented exponential exp([[Ac, Bc], [0, 0]] h), which equals
    [[A, B], [0, I]]; this avoids inverting Ac and handles singular Ac.
    """
    Ac = np.atleast_2d(np.asarray(Ac, dtype=float))
    Bc = np.atleast_2d(np.asarray(Bc, dtype=float))
    if h <= 0:
        raise ValueError("sampling interval h must be positive")
    n = Ac.shape[0]
    if Ac.shape != (n, n) or Bc.shape[0] != n:
        raise ValueError("inconsistent Ac/Bc dimensions")
    m = Bc.shape[1]
    aug = np.zeros((n + m, n + m))
    aug[:n, :n] = Ac
    aug[:n, n:] = Bc
    E = expm(aug * h)
    return E[:n, :n], E[:n, n:]
