"""Convex conservative reformulations of polytopic chance constraints.

A polytopic requirement Tx xbar + Tu ubar - y <= 0 on the Gaussian closed
loop becomes, per row, a scalar Gaussian inequality with mean h_i and
standard deviation sigma_i, both affine in the policy. Three reformulations
are provided, all conservative for the joint constraint at level 1 - alpha:

* constraint separation: per-row normal quantiles at levels alpha_i summing
  to alpha (second-order cone rows with beta_i = sqrt(2) erfinv(1-2 alpha_i));
* confidence ellipsoid: a single chi-square quantile shared by all rows;
* exponential moment bound: sum_i exp(t_i h_i + t_i^2 sigma_i^2 / 2) <= alpha,
  handled in log-sum-exp form as a smooth convex constraint.

The module also produces the quantile-growth comparison table between the
first two methods as a function of the horizon length.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .constraints import LinearConstraint, SmoothConstraint, SocConstraint
from .horizon import HorizonMatrices, SystemModel
from .linalg import psd_sqrt
from .policy import free_dim, gbar_free_indices
from .specfun import Probability, chi2_inv, erf_inv

__all__ = [
    "PolytopicConstraint",
    "AffineConstraintData",
    "build_affine_data",
    "beta_separation",
    "beta_ellipsoid",
    "uniform_allocation",
    "separation_constraints",
    "ellipsoid_constraints",
    "exp_bound_value",
    "ExpBoundConstraint",
    "exp_bound_constraint",
    "heuristic_exp_bound_t",
    "beta_curves",
    "write_beta_curves_csv",
]


@dataclass(frozen=True)
class PolytopicConstraint:
    """Rows of the hard constraint Tx xbar + Tu ubar - y <= 0."""

    Tx: np.ndarray
    Tu: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        Tx = np.atleast_2d(np.asarray(self.Tx, dtype=float))
        Tu = np.atleast_2d(np.asarray(self.Tu, dtype=float))
        y = np.atleast_1d(np.asarray(self.y, dtype=float))
        if Tx.shape[0] != Tu.shape[0] or Tx.shape[0] != y.size:
            raise ValueError("Tx, Tu and y must agree on the number of rows")
        if y.size < 1:
            raise ValueError("need at least one constraint row")
        object.__setattr__(self, "Tx", Tx)
        object.__setattr__(self, "Tu", Tu)
        object.__setattr__(self, "y", y)

    @property
    def r(self) -> int:
        return self.y.size

    def eta(self, xbar: np.ndarray, ubar: np.ndarray) -> np.ndarray:
        """Evaluate the hard constraint function on stacked trajectories."""
        return xbar @ self.Tx.T + ubar @ self.Tu.T - self.y


@dataclass(frozen=True)
class AffineConstraintData:
    """The constraint rows as affine functions of the free policy coordinates.

    Row i of Tx xbar + Tu ubar - y equals h_i + P_i . wbar with
    h_i = h0_i + Hd_i . dbar and P_i = P0_i + (Hd_i . Gbar). The whitened
    per-row noise maps sigma_half @ P_i are what every reformulation needs.
    """

    h0: np.ndarray         # r
    Hd: np.ndarray         # r x Nm
    P0: np.ndarray         # r x Nn
    sigma_half: np.ndarray  # Nn x Nn, PSD square root of Sigma_bar
    n: int
    m: int
    N: int
    _row_maps: list | None = field(default=None, repr=False, compare=False)

    @property
    def r(self) -> int:
        return self.h0.size

    @property
    def dim(self) -> int:
        return free_dim(self.n, self.m, self.N)

    def _gbar(self, flat: np.ndarray) -> np.ndarray:
        G = np.zeros((self.N * self.m, self.N * self.n))
        rows, cols = gbar_free_indices(self.n, self.m, self.N)
        G[rows, cols] = flat[self.N * self.m:]
        return G

    def h(self, flat: np.ndarray) -> np.ndarray:
        """Row means h_theta."""
        return self.h0 + self.Hd @ flat[:self.N * self.m]

    def P(self, flat: np.ndarray) -> np.ndarray:
        """Row noise maps P_theta (unwhitened), r x Nn."""
        return self.P0 + self.Hd @ self._gbar(flat)

    def sigma(self, flat: np.ndarray) -> np.ndarray:
        """Row standard deviations ||sigma_half @ P_i||."""
        return np.linalg.norm(self.P(flat) @ self.sigma_half, axis=1)

    def row_maps(self) -> list[tuple[float, np.ndarray, np.ndarray, np.ndarray]]:
        """Per-row (e, f, v, L): scalar map e + f.x and whitened vector map
        v + L x over the free coordinates."""
        if self._row_maps is not None:
            return self._row_maps
        n, m, N, dim = self.n, self.m, self.N, self.dim
        nm = N * m
        rows_idx, cols_idx = gbar_free_indices(n, m, N)
        maps = []
        for i in range(self.r):
            f = np.zeros(dim)
            f[:nm] = self.Hd[i]
            v = self.sigma_half @ self.P0[i]
            L = np.zeros((N * n, dim))
            # column p = (row k, col j) of Gbar contributes Hd[i,k] * sigma_half[:, j]
            L[:, nm:] = self.sigma_half[:, cols_idx] * self.Hd[i, rows_idx]
            maps.append((float(self.h0[i]), f, v, L))
        object.__setattr__(self, "_row_maps", maps)
        return maps


def build_affine_data(c: PolytopicConstraint, model: SystemModel,
                      mats: HorizonMatrices) -> AffineConstraintData:
    """Reduce a polytopic constraint on the closed loop to affine row data."""
    n, m, N = model.n, model.m, model.N
    if c.Tx.shape[1] != (N + 1) * n or c.Tu.shape[1] != N * m:
        raise ValueError(
            f"constraint expects Tx with {(N + 1) * n} and Tu with {N * m} columns, "
            f"got {c.Tx.shape[1]} and {c.Tu.shape[1]}")
    Hd = c.Tx @ mats.Bbar + c.Tu
    return AffineConstraintData(
        h0=c.Tx @ (mats.Abar @ model.x0) - c.y,
        Hd=Hd,
        P0=c.Tx @ mats.Dbar,
        sigma_half=psd_sqrt(model.Sigma_bar),
        n=n, m=m, N=N,
    )


def beta_separation(alpha_i) -> float:
    """Normal-quantile multiplier sqrt(2) * erfinv(1 - 2 alpha_i).

    Zero at alpha_i = 1/2 (mean feasibility) and negative beyond it.
    """
    a = float(Probability(float(alpha_i)).value)
    return math.sqrt(2.0) * erf_inv(1.0 - 2.0 * a)


def beta_ellipsoid(alpha, r: int, noise_dim: int, dof_override: int | None = None) -> float:
    """Chi-square quantile multiplier sqrt(F^-1(1 - alpha; k)).

    The degrees of freedom are k = min(r, noise_dim): with more rows than
    independent noise coordinates, the constraint vector lives on a
    noise_dim-dimensional subspace. `dof_override` forces a specific k.
    """
    a = float(Probability(float(alpha)).value)
    if r < 1 or noise_dim < 1:
        raise ValueError("r and noise_dim must be positive")
    k = int(dof_override) if dof_override is not None else min(int(r), int(noise_dim))
    return math.sqrt(chi2_inv(1.0 - a, k))


def uniform_allocation(alpha, r: int) -> list[float]:
    """The default per-row levels alpha_i = alpha / r."""
    a = float(Probability(float(alpha)).value)
    return [a / r] * r


def _soc_or_linear(e, f, v, L, beta):
    if beta == 0.0 or (np.abs(v).max(initial=0.0) == 0.0 and np.abs(L).max(initial=0.0) == 0.0):
        return LinearConstraint(a=f, b=e)
    return SocConstraint(e=e, f=f, v=v, L=L, beta=beta)


def separation_constraints(data: AffineConstraintData, alphas) -> list:
    """One cone row per constraint row at per-row levels alpha_i.

    Any policy satisfying all rows satisfies the joint constraint with
    probability at least 1 - sum(alpha_i). Levels above 1/2 are rejected:
    they would make the row constraint nonconvex.
    """
    alphas = [float(Probability(float(a)).value) for a in alphas]
    if len(alphas) != data.r:
        raise ValueError(f"need {data.r} levels, got {len(alphas)}")
    out = []
    for (e, f, v, L), a in zip(data.row_maps(), alphas):
        beta = beta_separation(a)
        if beta < 0.0:
            raise ValueError(
                f"per-row level {a} > 0.5 gives a negative quantile multiplier; "
                "the row constraint would be nonconvex")
        out.append(_soc_or_linear(e, f, v, L, beta))
    return out


def ellipsoid_constraints(data: AffineConstraintData, alpha,
                          dof_override: int | None = None) -> list:
    """Cone rows sharing the chi-square multiplier of the confidence
    ellipsoid of the constraint vector."""
    noise_dim = data.N * data.n
    beta = beta_ellipsoid(alpha, data.r, noise_dim, dof_override=dof_override)
    return [_soc_or_linear(e, f, v, L, beta) for (e, f, v, L) in data.row_maps()]


# ---------------------------------------------------------------------------
# Exponential moment bound
# ---------------------------------------------------------------------------


def _exponents(data: AffineConstraintData, t: np.ndarray, flat: np.ndarray) -> np.ndarray:
    h = data.h(flat)
    sig = data.sigma(flat)
    return t * h + 0.5 * t * t * sig * sig


def exp_bound_value(data: AffineConstraintData, t, theta_flat) -> float:
    """The moment-bound sum_i exp(t_i h_i + t_i^2 sigma_i^2 / 2).

    Equals E[sum_i exp(t_i eta_i)] for the Gaussian constraint vector; the
    chance constraint is conservatively enforced by value <= alpha. Evaluated
    through log-sum-exp, so huge exponents saturate to inf instead of raising.
    """
    t = np.asarray(t, dtype=float) * np.ones(data.r)
    if np.any(t <= 0.0):
        raise ValueError("exponential-bound parameters t must be positive")
    a = _exponents(data, t, np.asarray(theta_flat, dtype=float))
    peak = a.max()
    lse = peak + math.log(np.exp(a - peak).sum())
    return math.exp(lse) if lse < 709.0 else math.inf


class ExpBoundConstraint(SmoothConstraint):
    """log sum_i exp(a_i(x)) <= log(alpha), convex and smooth in x."""

    def __init__(self, data: AffineConstraintData, alpha, t):
        self.data = data
        self.alpha = float(Probability(float(alpha)).value)
        self.t = np.asarray(t, dtype=float) * np.ones(data.r)
        if np.any(self.t <= 0.0):
            raise ValueError("exponential-bound parameters t must be positive")
        self._rows = data.row_maps()

    def _terms(self, x):
        a = np.empty(self.data.r)
        grads = []
        for i, (e, f, v, L) in enumerate(self._rows):
            ti = self.t[i]
            s = v + L @ x
            a[i] = ti * (e + f @ x) + 0.5 * ti * ti * float(s @ s)
            grads.append(ti * f + ti * ti * (L.T @ s))
        return a, grads

    def value(self, x: np.ndarray) -> float:
        a, _ = self._terms(x)
        peak = a.max()
        return float(peak + math.log(np.exp(a - peak).sum()) - math.log(self.alpha))

    def grad(self, x: np.ndarray) -> np.ndarray:
        a, grads = self._terms(x)
        w = np.exp(a - a.max())
        w /= w.sum()
        return sum(wi * gi for wi, gi in zip(w, grads))

    def hess(self, x: np.ndarray) -> np.ndarray:
        a, grads = self._terms(x)
        w = np.exp(a - a.max())
        w /= w.sum()
        dim = x.size
        H = np.zeros((dim, dim))
        mean_grad = np.zeros(dim)
        for i, (wi, gi) in enumerate(zip(w, grads)):
            ti = self.t[i]
            L = self._rows[i][3]
            H += wi * (ti * ti * (L.T @ L) + np.outer(gi, gi))
            mean_grad += wi * gi
        return H - np.outer(mean_grad, mean_grad)


def heuristic_exp_bound_t(data: AffineConstraintData, theta_flat) -> np.ndarray:
    """Per-row t_i minimizing each exponent at a feasible reference policy:
    t_i = -h_i / sigma_i^2 (rows with sigma_i = 0 fall back to t_i = 1)."""
    flat = np.asarray(theta_flat, dtype=float)
    h = data.h(flat)
    sig = data.sigma(flat)
    t = np.ones(data.r)
    ok = (sig > 0.0) & (h < 0.0)
    t[ok] = -h[ok] / (sig[ok] ** 2)
    return t


def exp_bound_constraint(data: AffineConstraintData, alpha, t=None,
                         theta0=None) -> ExpBoundConstraint:
    """Build the moment-bound constraint; with t omitted, uses t_i = 1, or the
    pre-solve heuristic at theta0 when a reference policy is supplied."""
    if t is None:
        t = heuristic_exp_bound_t(data, theta0) if theta0 is not None else np.ones(data.r)
    return ExpBoundConstraint(data, alpha, t)


# ---------------------------------------------------------------------------
# Quantile growth comparison table
# ---------------------------------------------------------------------------


def beta_curves(n: int, m: int, rbar_list, N_max: int, alpha) -> list[tuple]:
    """Rows (N, rbar, beta_sep, beta_ellip) for r = N * rbar * (n + m)
    constraint rows and N*n noise coordinates, N = 1..N_max.

    Separation uses the uniform per-row level alpha/r; the ellipsoid
    multiplier depends on r only through min(r, N*n), hence is flat in rbar
    whenever rbar * (n + m) >= n.
    """
    if n < 1 or m < 0 or N_max < 1:
        raise ValueError("n, m and N_max must be positive")
    a = float(Probability(float(alpha)).value)
    out = []
    for N in range(1, N_max + 1):
        for rbar in rbar_list:
            r = N * int(rbar) * (n + m)
            out.append((N, int(rbar),
                        beta_separation(a / r),
                        beta_ellipsoid(a, r, N * n)))
    return out


def write_beta_curves_csv(path, rows) -> None:
    """Emit the comparison table with shortest round-trip float formatting."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("N,rbar,beta_sep,beta_ellip\n")
        for N, rbar, bs, be in rows:
            fh.write(f"{N},{rbar},{bs!r},{be!r}\n")
