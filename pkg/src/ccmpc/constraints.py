"""Constraint objects consumed by the log-barrier solver.

Every constraint class implements the same informal protocol over a flat
variable vector x:

    violation(x)     -> float, feasible iff <= 0
    barrier_value(x) -> float or +inf outside the barrier domain
    barrier_grad(x)  -> gradient of the barrier term
    barrier_hess(x)  -> Hessian of the barrier term
    shifted()        -> the same constraint relaxed by a trailing slack
                        variable s (f(x) - s <= 0), used by phase 1

Barrier domains are the strict interiors; `barrier_value` returning +inf is
how infeasible line-search trial points are rejected.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["LinearConstraint", "SocConstraint", "SmoothConstraint"]

_INF = float("inf")


@dataclass(frozen=True)
class LinearConstraint:
    """Affine inequality b + a.x <= 0 with log barrier -log(-(b + a.x))."""

    a: np.ndarray
    b: float

    def violation(self, x: np.ndarray) -> float:
        return float(self.b + self.a @ x)

    def barrier_value(self, x: np.ndarray) -> float:
        g = -self.violation(x)
        return -np.log(g) if g > 0.0 else _INF

    def barrier_grad(self, x: np.ndarray) -> np.ndarray:
        return self.a / (-self.violation(x))

    def barrier_hess(self, x: np.ndarray) -> np.ndarray:
        g = -self.violation(x)
        return np.outer(self.a, self.a) / (g * g)

    def shifted(self) -> "LinearConstraint":
        return LinearConstraint(np.append(self.a, -1.0), self.b)


@dataclass(frozen=True)
class SocConstraint:
    """Second-order cone row (e + f.x) + beta * ||v + L x|| <= 0.

    Uses the standard cone barrier -log(u^2 - beta^2 ||s||^2) on the region
    u = -(e + f.x) > beta ||s||, which is smooth even where s vanishes.
    """

    e: float
    f: np.ndarray
    v: np.ndarray
    L: np.ndarray
    beta: float
    _LtL: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.beta < 0.0:
            raise ValueError(
                "SocConstraint requires beta >= 0 (the sublevel set is "
                "nonconvex for negative beta)")

    def _parts(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        return float(self.e + self.f @ x), self.v + self.L @ x

    def violation(self, x: np.ndarray) -> float:
        h, s = self._parts(x)
        return h + self.beta * float(np.linalg.norm(s))

    def _residual(self, x: np.ndarray) -> tuple[float, float, np.ndarray]:
        h, s = self._parts(x)
        u = -h
        r = u * u - self.beta ** 2 * float(s @ s)
        return r, u, s

    def barrier_value(self, x: np.ndarray) -> float:
        r, u, _ = self._residual(x)
        return -np.log(r) if (u > 0.0 and r > 0.0) else _INF

    def _grad_r(self, u: float, s: np.ndarray) -> np.ndarray:
        return -2.0 * u * self.f - 2.0 * self.beta ** 2 * (self.L.T @ s)

    def barrier_grad(self, x: np.ndarray) -> np.ndarray:
        r, u, s = self._residual(x)
        return -self._grad_r(u, s) / r

    def _ltl(self) -> np.ndarray:
        if self._LtL is None:
            object.__setattr__(self, "_LtL", self.L.T @ self.L)
        return self._LtL

    def barrier_hess(self, x: np.ndarray) -> np.ndarray:
        r, u, s = self._residual(x)
        gr = self._grad_r(u, s)
        hess_r = 2.0 * np.outer(self.f, self.f) - 2.0 * self.beta ** 2 * self._ltl()
        return np.outer(gr, gr) / (r * r) - hess_r / r

    def shifted(self) -> "SocConstraint":
        return SocConstraint(
            e=self.e,
            f=np.append(self.f, -1.0),
            v=self.v,
            L=np.hstack([self.L, np.zeros((self.L.shape[0], 1))]),
            beta=self.beta,
        )


class SmoothConstraint:
    """Base for smooth convex scalar constraints g(x) <= 0.

    Subclasses provide value/grad/hess of g; the standard -log(-g) barrier
    calculus is shared here. `shifted` wraps the constraint with a trailing
    slack coordinate.
    """

    def value(self, x: np.ndarray) -> float:
        raise NotImplementedError

    def grad(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def hess(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def violation(self, x: np.ndarray) -> float:
        return self.value(x)

    def barrier_value(self, x: np.ndarray) -> float:
        g = -self.value(x)
        return -np.log(g) if g > 0.0 else _INF

    def barrier_grad(self, x: np.ndarray) -> np.ndarray:
        g = -self.value(x)
        return self.grad(x) / g

    def barrier_hess(self, x: np.ndarray) -> np.ndarray:
        g = -self.value(x)
        dg = self.grad(x)
        return np.outer(dg, dg) / (g * g) + self.hess(x) / g

    def shifted(self) -> "_SlackShifted":
        return _SlackShifted(self)


class _SlackShifted(SmoothConstraint):
    """g(x) - s <= 0 over the extended vector [x, s]."""

    def __init__(self, inner: SmoothConstraint):
        self.inner = inner

    def value(self, x: np.ndarray) -> float:
        return self.inner.value(x[:-1]) - float(x[-1])

    def grad(self, x: np.ndarray) -> np.ndarray:
        return np.append(self.inner.grad(x[:-1]), -1.0)

    def hess(self, x: np.ndarray) -> np.ndarray:
        h = self.inner.hess(x[:-1])
        out = np.zeros((h.shape[0] + 1, h.shape[1] + 1))
        out[:-1, :-1] = h
        return out
