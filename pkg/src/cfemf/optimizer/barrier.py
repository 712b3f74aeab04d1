"""Log-barrier interior-point solver for small quadratically constrained programs.

Every inequality is a (convex) quadratic ``z^T P_i z + q_i^T z + r_i <= 0``.
The objective is any twice-differentiable callable returning value, gradient
and Hessian; centering uses damped Newton with backtracking, and a Levenberg
shift whenever the barrier Hessian is not positive definite.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

__all__ = [
    "QuadraticConstraints",
    "ConvexSubproblem",
    "SolverFailure",
    "linear_objective",
    "barrier_solve",
]


class SolverFailure(RuntimeError):
    """Newton centering did not converge; ``last_iterate`` holds the last point."""

    def __init__(self, message, last_iterate):
        super().__init__(message)
        self.last_iterate = last_iterate


@dataclass
class QuadraticConstraints:
    P: np.ndarray  # (m, n, n) symmetric PSD
    q: np.ndarray  # (m, n)
    r: np.ndarray  # (m,)
    kinds: list = field(default_factory=list)

    @property
    def count(self):
        return self.r.shape[0]

    def values(self, z):
        return np.einsum("i,mij,j->m", z, self.P, z) + self.q @ z + self.r

    def evaluate(self, z):
        Pz = self.P @ z  # (m, n)
        vals = Pz @ z + self.q @ z + self.r
        return vals, 2.0 * Pz + self.q

    @classmethod
    def stack(cls, blocks):
        blocks = [b for b in blocks if b.count]
        return cls(
            P=np.concatenate([b.P for b in blocks]),
            q=np.concatenate([b.q for b in blocks]),
            r=np.concatenate([b.r for b in blocks]),
            kinds=sum((list(b.kinds) for b in blocks), []),
        )


@dataclass
class ConvexSubproblem:
    objective: Callable  # z -> (value, grad, hess), minimized
    constraints: QuadraticConstraints

    @property
    def dim(self):
        return self.constraints.q.shape[1]


def linear_objective(c):
    c = np.asarray(c, dtype=float)
    zero = np.zeros((c.size, c.size))

    def objective(z):
        return float(c @ z), c, zero

    return objective


def _newton_direction(hess, grad):
    n = grad.size
    shift = 0.0
    scale = max(1e-12, np.max(np.abs(np.diag(hess))))
    for _ in range(60):
        try:
            factor = cho_factor(hess + shift * np.eye(n), check_finite=False)
            return -cho_solve(factor, grad, check_finite=False)
        except LinAlgError:
            shift = max(2.0 * shift, 1e-10 * scale)
    raise LinAlgError("could not regularize barrier Hessian")


def barrier_solve(prob: ConvexSubproblem, start, cfg):
    """Minimize ``prob.objective`` subject to ``prob.constraints`` from a strictly feasible start.

    Parameters
    ----------
    prob : ConvexSubproblem
    start : ndarray
        Strictly feasible point (every constraint value < 0).
    cfg : SolverConfig
        Uses ``barrier_t0``, ``barrier_mu``, ``barrier_gap``, ``newton_tol``
        and ``max_newton_iters``.

    Returns
    -------
    z : ndarray
        Approximate minimizer, ``m/t`` suboptimal at most.
    value : float
        Objective value at ``z``.
    info : dict
        Newton and outer iteration counts.

    Raises
    ------
    ValueError
        If ``start`` is not strictly feasible.
    SolverFailure
        If a centering step exceeds ``max_newton_iters``.
    """
    cons = prob.constraints
    z = np.array(start, dtype=float)
    vals = cons.values(z)
    if np.any(vals >= 0):
        raise ValueError("barrier start is not strictly feasible")
    m = cons.count
    t = cfg.barrier_t0
    newton_total = 0
    outer = 0

    def phi(point, t):
        v = cons.values(point)
        if np.any(v >= 0):
            return np.inf
        return t * prob.objective(point)[0] - np.sum(np.log(-v))

    while True:
        outer += 1
        for it in range(cfg.max_newton_iters):
            f0, g0, H0 = prob.objective(z)
            vals, jac = cons.evaluate(z)
            inv = 1.0 / (-vals)
            grad = t * g0 + jac.T @ inv
            hess = (t * H0 + (jac * inv[:, None] ** 2).T @ jac
                    + 2.0 * np.tensordot(inv, cons.P, axes=1))
            step = _newton_direction(hess, grad)
            decrement = -float(grad @ step)
            current = t * f0 - np.sum(np.log(-vals))
            # relative test: at large t the barrier value is huge and rounding
            # keeps the absolute decrement above any fixed threshold
            if decrement / 2.0 <= cfg.newton_tol * max(1.0, abs(current)):
                break
            # largest step keeping strict feasibility, then Armijo backtracking
            s = 1.0
            while True:
                trial = z + s * step
                value = phi(trial, t)
                if np.isfinite(value) and value <= current - 0.25 * s * decrement:
                    break
                s *= 0.5
                if s < 1e-14:
                    break
            if s < 1e-14 or current - value <= 1e-13 * max(1.0, abs(current)):
                # no progress possible at this precision; treat as centered
                if s >= 1e-14:
                    z = trial
                break
            z = trial
            newton_total += 1
        else:
            raise SolverFailure(f"Newton centering exceeded {cfg.max_newton_iters} iterations", z)
        if m / t < cfg.barrier_gap:
            break
        t *= cfg.barrier_mu

    value = prob.objective(z)[0]
    return z, value, {"newton_iterations": newton_total, "outer_iterations": outer}
