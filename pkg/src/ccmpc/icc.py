"""Integrated chance constraints for scalar polytopic constraint functions.

The expected shortfall of a Gaussian scalar z ~ N(mu, sigma^2) above zero,
E[max(z, 0)], has the closed form sigma * g(mu / sigma) with

    g(x) = (x/2) erfc(-x / sqrt(2)) + exp(-x^2 / 2) / sqrt(2 pi),

a positive, convex, nondecreasing function. Bounding that expectation by a
budget gives a smooth convex constraint on the policy, with documented
gradient and Hessian used directly by the interior-point solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constraints import SmoothConstraint
from .cost import CostQuadraticForm, QuadraticCost, quadratic_form
from .chance import PolytopicConstraint, build_affine_data
from .horizon import HorizonMatrices, SystemModel
from .policy import selection_maps
from .specfun import erfc

__all__ = [
    "ramp_moment",
    "icc_value",
    "IccConstraint",
    "IccProblem",
    "build_standard_form",
]

_SQRT_2PI = math.sqrt(2.0 * math.pi)
_SIGMA_FLOOR = 1e-10


def _phi(x):
    return np.exp(-0.5 * x * x) / _SQRT_2PI


def _Phi(x):
    return 0.5 * erfc(-x / math.sqrt(2.0))


def ramp_moment(x):
    """g(x) = E[max(z, 0)] for z ~ N(x, 1).

    Positive everywhere, convex, nondecreasing; g(x) -> 0 as x -> -inf and
    g(x) - x -> 0 as x -> +inf. Elementwise on arrays.
    """
    arr = np.asarray(x, dtype=float)
    out = np.maximum(arr * _Phi(arr) + _phi(arr), 0.0)
    return float(out) if np.isscalar(x) or arr.ndim == 0 else out


def icc_value(mu: float, sigma: float) -> float:
    """E[max(z, 0)] for z ~ N(mu, sigma^2), including the sigma = 0 limit."""
    if sigma < 0.0:
        raise ValueError("sigma must be nonnegative")
    if sigma < _SIGMA_FLOOR:
        return max(float(mu), 0.0)
    return float(sigma) * ramp_moment(float(mu) / float(sigma))


@dataclass
class IccConstraint(SmoothConstraint):
    """Expected-shortfall budget on a scalar constraint row.

    The row value is Gaussian with mean e + f.x and standard deviation
    ||v + L x|| (whitened maps), and the constraint is

        ||v + L x|| * g((e + f.x) / ||v + L x||) - budget <= 0.

    Below the sigma floor the exact degenerate limit max(mean, 0) - budget
    is used for the value; derivative queries there raise, since the limit
    is not differentiable and a barrier solver must not sit on it.
    """

    e: float
    f: np.ndarray
    v: np.ndarray
    L: np.ndarray
    budget: float

    def __post_init__(self):
        if self.budget <= 0.0:
            raise ValueError("the shortfall budget must be positive")

    def _parts(self, x: np.ndarray):
        s = self.v + self.L @ x
        return float(self.e + self.f @ x), s, float(np.linalg.norm(s))

    def mean_and_sigma(self, x: np.ndarray) -> tuple[float, float]:
        mu, _, sigma = self._parts(x)
        return mu, sigma

    def value(self, x: np.ndarray) -> float:
        mu, _, sigma = self._parts(x)
        return icc_value(mu, sigma) - self.budget

    def _checked_parts(self, x: np.ndarray):
        mu, s, sigma = self._parts(x)
        if sigma < _SIGMA_FLOOR:
            raise ValueError(
                f"noise direction nearly singular (sigma = {sigma:.2e} < {_SIGMA_FLOOR});"
                " derivatives of the shortfall are not defined at the kink")
        return mu, s, sigma

    def grad(self, x: np.ndarray) -> np.ndarray:
        mu, s, sigma = self._checked_parts(x)
        z = mu / sigma
        return _phi(z) * (self.L.T @ s) / sigma + _Phi(z) * self.f

    def hess(self, x: np.ndarray) -> np.ndarray:
        mu, s, sigma = self._checked_parts(x)
        z = mu / sigma
        Ls = self.L.T @ s
        J1 = (self.L.T @ self.L + np.outer(self.f, self.f)) / sigma
        J2 = ((mu * mu - sigma * sigma) / sigma ** 5) * np.outer(Ls, Ls)
        J3 = (mu / sigma ** 3) * (np.outer(Ls, self.f) + np.outer(self.f, Ls))
        return _phi(z) * (J1 + J2 - J3)


@dataclass(frozen=True)
class IccProblem:
    """Shortfall-constrained synthesis in standard smooth form.

    `objective` is the expected quadratic cost over the free coordinates;
    for scaled-identity noise it decomposes exactly as the affine-term piece
    plus one piece per noise coordinate, exposed by `g0_value` / `gi_value`
    (built on the selection maps H0, Hs from the free parametrization).
    """

    constraint: IccConstraint
    objective: CostQuadraticForm
    M: np.ndarray
    E: np.ndarray
    c_base: np.ndarray
    Dbar: np.ndarray
    H0: np.ndarray
    Hs: list
    noise_scale: float | None

    def _require_decomposition(self):
        if self.noise_scale is None:
            raise ValueError(
                "the per-coordinate objective decomposition requires noise "
                "covariance proportional to the identity")

    def g0_value(self, x: np.ndarray) -> float:
        """Objective piece carried by the affine input term."""
        z = self.c_base + self.E @ (self.H0 @ x)
        return float(z @ self.M @ z)

    def gi_value(self, i: int, x: np.ndarray) -> float:
        """Objective piece carried by feedback from noise coordinate i."""
        self._require_decomposition()
        zero_pad = np.zeros(self.E.shape[1])
        col = np.concatenate([self.Dbar[:, i], zero_pad])
        z = col + self.E @ (self.Hs[i] @ x)
        return self.noise_scale * float(z @ self.M @ z)

    def objective_decomposed(self, x: np.ndarray) -> float:
        return self.g0_value(x) + sum(
            self.gi_value(i, x) for i in range(len(self.Hs)))


def build_standard_form(row: PolytopicConstraint, cost: QuadraticCost,
                        model: SystemModel, mats: HorizonMatrices,
                        budget: float) -> IccProblem:
    """Standard-form shortfall problem for a single polytopic row.

    The row maps are whitened with the model's noise covariance, so the
    constraint is exact for any PSD covariance; the closed-form objective
    decomposition additionally assumes covariance sigma2 * I.
    """
    if row.r != 1:
        raise ValueError("the standard form takes a single scalar constraint row")
    data = build_affine_data(row, model, mats)
    e, f, v, L = data.row_maps()[0]
    constraint = IccConstraint(e=e, f=f, v=v, L=L, budget=float(budget))

    n, m, N = model.n, model.m, model.N
    scale = None
    diag = np.diagonal(model.Sigma_bar)
    if np.allclose(model.Sigma_bar, diag[0] * np.eye(N * n), atol=1e-12) and diag[0] > 0:
        scale = float(diag[0])
    H0, Hs = selection_maps(n, m, N)
    return IccProblem(
        constraint=constraint,
        objective=quadratic_form(cost, model, mats),
        M=cost.M,
        E=np.vstack([mats.Bbar, np.eye(N * m)]),
        c_base=np.concatenate([mats.Abar @ model.x0, np.zeros(N * m)]),
        Dbar=mats.Dbar,
        H0=H0,
        Hs=Hs,
        noise_scale=scale,
    )
