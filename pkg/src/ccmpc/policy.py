"""Affine disturbance-feedback policies and their induced response maps.

A policy is u(t) = sum_{i<t} G[t,i] w(i) + d(t), collected as ubar =
Gbar wbar + dbar with Gbar strictly lower block triangular in m x n blocks
(causality: the input at time t sees only disturbances before t).

The free parametrization stacks dbar first, then the free (below-diagonal)
entries of Gbar column by column. This ordering is part of the serialized
policy format, so it must not change.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .horizon import HorizonMatrices, SystemModel

__all__ = [
    "PolicyParams",
    "ResponseMaps",
    "apply_policy",
    "response_maps",
    "free_dim",
    "gbar_free_indices",
    "flatten",
    "unflatten",
    "selection_maps",
]


@dataclass(frozen=True)
class PolicyParams:
    """Disturbance-feedback gains Gbar (Nm x Nn) and affine term dbar (Nm)."""

    Gbar: np.ndarray
    dbar: np.ndarray
    n: int
    m: int

    def __post_init__(self):
        G = np.atleast_2d(np.asarray(self.Gbar, dtype=float))
        d = np.atleast_1d(np.asarray(self.dbar, dtype=float))
        n, m = self.n, self.m
        if d.size % m != 0:
            raise ValueError("dbar length must be a multiple of m")
        N = d.size // m
        if G.shape != (N * m, N * n):
            raise ValueError(f"Gbar must be {N * m}x{N * n}, got {G.shape}")
        for t in range(N):
            blocked = G[t * m:(t + 1) * m, t * n:]
            if blocked.size and np.abs(blocked).max() > 0.0:
                raise ValueError(
                    f"causality violated: input block {t} depends on disturbances at times >= {t}")
        object.__setattr__(self, "Gbar", G)
        object.__setattr__(self, "dbar", d)

    @property
    def N(self) -> int:
        return self.dbar.size // self.m

    @staticmethod
    def zero(n: int, m: int, N: int) -> "PolicyParams":
        return PolicyParams(np.zeros((N * m, N * n)), np.zeros(N * m), n, m)


@dataclass(frozen=True)
class ResponseMaps:
    """Affine map [xbar; ubar] = c + L @ wbar induced by a policy."""

    c: np.ndarray
    L: np.ndarray


def apply_policy(theta: PolicyParams, wbar: np.ndarray) -> np.ndarray:
    """Input sequence ubar = Gbar wbar + dbar for one disturbance realization."""
    wbar = np.asarray(wbar, dtype=float)
    if wbar.shape[-1] != theta.Gbar.shape[1]:
        raise ValueError(
            f"wbar must have length {theta.Gbar.shape[1]}, got {wbar.shape[-1]}")
    return wbar @ theta.Gbar.T + theta.dbar


def response_maps(theta: PolicyParams, model: SystemModel,
                  mats: HorizonMatrices) -> ResponseMaps:
    """Stacked affine response [xbar; ubar] = c + L wbar of the closed loop."""
    if (theta.n, theta.m, theta.N) != (model.n, model.m, model.N):
        raise ValueError("policy dimensions do not match the model")
    c = np.concatenate([mats.Abar @ model.x0 + mats.Bbar @ theta.dbar, theta.dbar])
    L = np.vstack([mats.Bbar @ theta.Gbar + mats.Dbar, theta.Gbar])
    return ResponseMaps(c=c, L=L)


def free_dim(n: int, m: int, N: int) -> int:
    """Number of free policy coordinates: Nm for dbar plus the strict
    lower-block-triangle of Gbar."""
    return N * m + m * n * (N * (N - 1)) // 2


def gbar_free_indices(n: int, m: int, N: int) -> tuple[np.ndarray, np.ndarray]:
    """(row, col) indices of the free Gbar entries, in flat coordinate order.

    Order is column-major over the Nn columns of Gbar; within column j
    (disturbance block s = j // n) the free rows are (s+1)m .. Nm-1.
    """
    rows, cols = [], []
    for j in range(N * n):
        s = j // n
        r = np.arange((s + 1) * m, N * m)
        rows.append(r)
        cols.append(np.full(r.size, j))
    return np.concatenate(rows), np.concatenate(cols)


def flatten(theta: PolicyParams) -> np.ndarray:
    """Free-coordinate vector [dbar; free entries of Gbar]."""
    rows, cols = gbar_free_indices(theta.n, theta.m, theta.N)
    return np.concatenate([theta.dbar, theta.Gbar[rows, cols]])


def unflatten(flat: np.ndarray, n: int, m: int, N: int) -> PolicyParams:
    """Inverse of `flatten`; rejects vectors of the wrong length."""
    flat = np.asarray(flat, dtype=float)
    dim = free_dim(n, m, N)
    if flat.shape != (dim,):
        raise ValueError(f"expected flat vector of length {dim}, got {flat.shape}")
    dbar = flat[:N * m].copy()
    Gbar = np.zeros((N * m, N * n))
    rows, cols = gbar_free_indices(n, m, N)
    Gbar[rows, cols] = flat[N * m:]
    return PolicyParams(Gbar=Gbar, dbar=dbar, n=n, m=m)


def selection_maps(n: int, m: int, N: int) -> tuple[np.ndarray, list[np.ndarray]]:
    """Selection matrices (H0, [H_1..H_Nn]) from free coordinates.

    H0 @ flat = dbar, and H_j @ flat = column j of Gbar (zeros filled in for
    the causally fixed entries).
    """
    dim = free_dim(n, m, N)
    H0 = np.zeros((N * m, dim))
    H0[:, :N * m] = np.eye(N * m)
    rows, cols = gbar_free_indices(n, m, N)
    selectors = []
    for j in range(N * n):
        Hj = np.zeros((N * m, dim))
        mask = cols == j
        Hj[rows[mask], N * m + np.nonzero(mask)[0]] = 1.0
        selectors.append(Hj)
    return H0, selectors
