"""Primal log-barrier interior-point solver for the assembled programs.

Minimizes a smooth convex objective subject to a list of constraint objects
(linear, second-order cone, smooth scalar, log-det LMI) over a flat
variable vector. Feasibility is decided by a phase-1 pass that minimizes
the maximum constraint violation through a slack variable; the main phase
follows the central path t -> t * scale with damped Newton centering.

All computations are deterministic; a solve never mutates its inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = ["SolverOptions", "ConvexProgram", "SolveReport", "phase1", "solve",
           "PaddedObjective", "LinearObjective"]


@dataclass(frozen=True)
class SolverOptions:
    t_init: float = 1.0
    t_scale: float = 10.0
    duality_gap: float = 1e-9       # outer loop stops when m / t < this
    newton_tol: float = 1e-11       # on half the squared Newton decrement
    max_newton: int = 60
    max_outer: int = 40
    armijo: float = 0.3
    backtrack: float = 0.5
    max_linesearch: int = 80
    kkt_tol: float = 1e-8
    phase1_margin: float = 1e-9     # strict interior means slack < -this
    phase1_stop: float = 1e-6       # early exit once slack is this negative
    jitter: float = 1e-12


@dataclass(frozen=True)
class LinearObjective:
    """c . x, used by phase 1 (c is the slack selector)."""

    c: np.ndarray

    def value(self, x):
        return float(self.c @ x)

    def grad(self, x):
        return self.c

    def hess(self, x):
        return np.zeros((self.c.size, self.c.size))


@dataclass(frozen=True)
class PaddedObjective:
    """An objective over the leading coordinates, extended by inert ones
    (e.g. the LMI multiplier); value and derivatives ignore the tail."""

    inner: object
    dim: int
    active: int

    def value(self, x):
        return self.inner.value(x[:self.active])

    def grad(self, x):
        g = np.zeros(self.dim)
        g[:self.active] = self.inner.grad(x[:self.active])
        return g

    def hess(self, x):
        H = np.zeros((self.dim, self.dim))
        H[:self.active, :self.active] = self.inner.hess(x[:self.active])
        return H


@dataclass
class ConvexProgram:
    """Objective + constraints over a flat vector of `dim` variables.

    `policy_dim` marks how many leading coordinates form the policy vector;
    any remaining ones are auxiliary (LMI multipliers). The objective must
    expose value/grad/hess, each constraint the protocol documented in
    `ccmpc.constraints`.
    """

    objective: object
    constraints: list
    dim: int
    policy_dim: int | None = None

    def __post_init__(self):
        if self.policy_dim is None:
            self.policy_dim = self.dim

    def max_violation(self, x: np.ndarray) -> float:
        if not self.constraints:
            return -math.inf
        return max(c.violation(x) for c in self.constraints)

    def strictly_feasible(self, x: np.ndarray) -> bool:
        return all(c.violation(x) < 0.0 and math.isfinite(c.barrier_value(x))
                   for c in self.constraints)


@dataclass
class SolveReport:
    status: str
    x: np.ndarray | None
    objective_value: float
    kkt_residual: float
    phase1_slack: float
    barrier_path: list = field(default_factory=list)
    newton_iters: int = 0
    message: str = ""

    @property
    def theta(self) -> np.ndarray | None:
        return None if (self.x is None or self._policy_dim is None) else self.x[:self._policy_dim]

    _policy_dim: int | None = None


def _solve_newton_system(H: np.ndarray, g: np.ndarray, jitter0: float) -> np.ndarray:
    scale = max(np.abs(np.diagonal(H)).max(), 1.0)
    jitter = 0.0
    for _ in range(12):
        try:
            chol = np.linalg.cholesky(H + jitter * np.eye(H.shape[0]))
            return np.linalg.solve(chol.T, np.linalg.solve(chol, -g))
        except np.linalg.LinAlgError:
            jitter = jitter0 * scale if jitter == 0.0 else 10.0 * jitter
    raise np.linalg.LinAlgError("Newton system not positive definite even with jitter")


def _centering(objective, constraints, t, x, opts: SolverOptions,
               stop_below: float | None = None):
    """Damped Newton on t * f0 + sum of barriers from a strictly feasible x.

    Returns (x, converged, iters, decrement_half, line_search_failed), where
    decrement_half is half the squared Newton decrement at exit (the
    centering-quality certificate). `stop_below` aborts early once the
    objective value drops below the given threshold (used by phase 1, whose
    objective may be unbounded below on feasible problems).
    """

    def total_value(pt):
        val = t * objective.value(pt)
        for c in constraints:
            b = c.barrier_value(pt)
            if not math.isfinite(b):
                return math.inf
            val += b
        return val

    iters = 0
    decrement_half = math.inf
    for _ in range(opts.max_newton):
        if stop_below is not None and objective.value(x) < stop_below:
            return x, True, iters, 0.0, False
        g = t * objective.grad(x)
        H = t * objective.hess(x)
        for c in constraints:
            g = g + c.barrier_grad(x)
            H = H + c.barrier_hess(x)
        step = _solve_newton_system(H, g, opts.jitter)
        decrement_half = float(-g @ step) / 2.0
        if decrement_half <= opts.newton_tol:
            return x, True, iters, max(decrement_half, 0.0), False
        base = total_value(x)
        slope = float(g @ step)
        s = 1.0
        for _ in range(opts.max_linesearch):
            trial = x + s * step
            if total_value(trial) <= base + opts.armijo * s * slope:
                x = trial
                break
            s *= opts.backtrack
        else:
            return x, False, iters, decrement_half, True
        iters += 1
    return x, False, iters, decrement_half, False


def phase1(program: ConvexProgram, opts: SolverOptions | None = None,
           x0: np.ndarray | None = None):
    """Minimize the maximum constraint violation via a slack variable.

    Returns (feasible, x_strict, slack): `feasible` is True when a strictly
    interior point was found (slack < -phase1_margin), in which case
    x_strict is such a point. The slack is the best maximum violation seen;
    for infeasible programs it converges to the positive optimum, which is
    reported rather than any solver-internal failure.
    """
    opts = opts or SolverOptions()
    if not program.constraints:
        x = np.zeros(program.dim) if x0 is None else np.asarray(x0, dtype=float)
        return True, x, -math.inf
    x = np.zeros(program.dim) if x0 is None else np.asarray(x0, dtype=float).copy()
    shifted = [c.shifted() for c in program.constraints]
    s0 = program.max_violation(x) + 1.0
    z = np.append(x, s0)
    objective = LinearObjective(np.append(np.zeros(program.dim), 1.0))
    m = len(shifted)
    t = opts.t_init
    slack = s0
    total_newton = 0
    for _ in range(opts.max_outer):
        z, _converged, iters, _ls_fail = _centering(
            objective, shifted, t, z, opts, stop_below=-opts.phase1_stop)
        total_newton += iters
        slack = float(z[-1])
        if slack <= -opts.phase1_stop:
            return True, z[:-1], slack
        if m / t < min(opts.duality_gap, 1e-10):
            break
        t *= opts.t_scale
    # The slack variable sits above the true max violation on the central
    # path; report the violation at the final point, which is exact.
    achieved = program.max_violation(z[:-1])
    slack = min(slack, achieved) if math.isfinite(achieved) else slack
    feasible = achieved < -opts.phase1_margin
    return feasible, z[:-1], achieved


def solve(program: ConvexProgram, opts: SolverOptions | None = None,
          x0: np.ndarray | None = None) -> SolveReport:
    """Solve the program; statuses are "optimal", "infeasible" or "max_iter".

    A supplied strictly feasible x0 skips phase 1. Deterministic given
    identical inputs and options.
    """
    opts = opts or SolverOptions()
    m = len(program.constraints)

    if x0 is not None and program.strictly_feasible(np.asarray(x0, dtype=float)):
        x = np.asarray(x0, dtype=float).copy()
        slack = program.max_violation(x)
    else:
        feasible, x, slack = phase1(program, opts, x0=x0)
        if not feasible:
            report = SolveReport(status="infeasible", x=None,
                                 objective_value=math.nan,
                                 kkt_residual=math.nan, phase1_slack=slack,
                                 message="phase 1 found no strict interior")
            report._policy_dim = program.policy_dim
            return report

    path = []
    total_newton = 0
    status = "optimal"
    if m == 0:
        x, converged, iters, ls_fail = _centering(program.objective, [], 1.0, x, opts)
        total_newton += iters
        if not converged:
            status = "line_search_failure" if ls_fail else "max_iter"
        t = 1.0
    else:
        t = opts.t_init
        outer = 0
        while True:
            x, converged, iters, ls_fail = _centering(
                program.objective, program.constraints, t, x, opts)
            total_newton += iters
            path.append({"t": t, "objective": program.objective.value(x),
                         "newton_iters": iters, "converged": converged})
            outer += 1
            if m / t < opts.duality_gap:
                break
            if outer >= opts.max_outer:
                status = "max_iter"
                break
            t *= opts.t_scale

    # Dual residual with the barrier-implied multipliers: grad f0 plus the
    # per-constraint barrier gradients scaled by 1/t. Scaling each term
    # before summing avoids catastrophic cancellation at large t.
    grad0 = program.objective.grad(x)
    resid = grad0.copy()
    for c in program.constraints:
        resid += c.barrier_grad(x) / t
    kkt_grad = np.abs(resid).max() / (1.0 + np.abs(grad0).max())
    kkt_gap = m / t if m else 0.0
    kkt_violation = max(0.0, program.max_violation(x)) if m else 0.0
    kkt = max(kkt_grad, kkt_gap, kkt_violation)
    if status == "optimal" and kkt > opts.kkt_tol:
        status = "max_iter"

    report = SolveReport(status=status, x=x,
                         objective_value=program.objective.value(x),
                         kkt_residual=float(kkt), phase1_slack=float(slack),
                         barrier_path=path, newton_iters=total_newton)
    report._policy_dim = program.policy_dim
    return report
