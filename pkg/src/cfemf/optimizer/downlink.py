"""Downlink max-min power control.

Two model-based solvers share one problem description:

* :func:`dl_maximin_bisection` -- bisection on the common rate with an inner
  successive convex approximation whose subproblems are slack-relaxed
  feasibility programs;
* :func:`dl_lse_sco` -- successive maximization of a log-sum-exp lower bound of
  the minimum SINR, with no bisection.

Internally the decision vector ``x`` holds the amplitudes of the associated
links only (UE-major, ascending AP index), scaled by ``1/sqrt(P_ref)``; the
effective channels are scaled by ``sqrt(P_ref)/sigma_k`` so every SINR is a
ratio of dimensionless quadratic forms ``x^T R_k x / (x^T F_k x + 1)``.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, softmax

from ..heuristics import fpc_dl
from ..metrics import EffectiveGains, PowerAllocationDL
from ..scenario import SystemConfig
from .barrier import ConvexSubproblem, QuadraticConstraints, barrier_solve, linear_objective
from .common import AllocationResult, SolverConfig, rate_from_sinr, sinr_target_from_rate

__all__ = [
    "DownlinkProblem",
    "AffineBound",
    "taylor_lower_bound",
    "FeasibilityStep",
    "dl_feasibility_step",
    "dl_maximin_bisection",
    "lse_objective",
    "lse_value",
    "dl_lse_sco",
    "initial_point",
]

log = logging.getLogger(__name__)


def _real_outer(w):
    """Real quadratic form of ``|w^T x|^2`` for real ``x``: Re w Re w^T + Im w Im w^T."""
    re, im = w.real, w.imag
    return re[..., :, None] * re[..., None, :] + im[..., :, None] * im[..., None, :]


class DownlinkProblem:
    """Quadratic-form view of the DL constraints and SINRs for one snapshot."""

    def __init__(self, gains: EffectiveGains, cfg: SystemConfig):
        if not (np.all(np.isfinite(gains.dl)) and np.all(np.isfinite(gains.noise_var_ue))):
            raise ValueError("non-finite channel gains")
        a = gains.association
        K, M = a.shape
        self.cfg = cfg
        self.gains = gains
        self.shape = (K, M)
        self.ks, self.ms = np.nonzero(a)
        n = self.ks.size
        self.n = n
        self.p_ref = float(cfg.ap_power_budget)
        sigma = np.sqrt(gains.noise_var_ue)

        W = np.zeros((K, K, n), dtype=complex)
        idx = np.arange(n)
        W[:, self.ks, idx] = gains.dl[:, self.ks, self.ms]
        W *= (np.sqrt(self.p_ref) / sigma)[:, None, None]
        self.W = W
        Q = _real_outer(W)  # (K, K, n, n)
        self.R = Q[np.arange(K), np.arange(K)]
        self.T = Q.sum(axis=1)
        self.F = self.T - self.R
        self.direct = W[np.arange(K), np.arange(K)]  # normalized c_k, zero outside UE block

        self.ap_masks = (self.ms[None, :] == np.arange(M)[:, None]).astype(float)  # (M, n)
        self.served = self.ap_masks.sum(axis=1) > 0
        self.budget = np.full(M, cfg.ap_power_budget / self.p_ref)
        # IPD limit in normalized units: lambda^2 I / (4 pi sigma_k^2)
        self.ipd_cap = cfg.wavelength ** 2 * cfg.ipd_limit / (4 * np.pi * gains.noise_var_ue)
        self.ue_masks = (self.ks[None, :] == np.arange(K)[:, None])

    # conversions ---------------------------------------------------------
    def to_vector(self, alloc: PowerAllocationDL):
        return np.sqrt(np.maximum(alloc.p[self.ks, self.ms], 0.0) / self.p_ref)

    def to_allocation(self, x) -> PowerAllocationDL:
        p = np.zeros(self.shape)
        p[self.ks, self.ms] = self.p_ref * np.asarray(x) ** 2
        return PowerAllocationDL(p=p)

    # quantities ----------------------------------------------------------
    def signal(self, x):
        return np.einsum("i,kij,j->k", x, self.R, x)

    def interference(self, x):
        return np.einsum("i,kij,j->k", x, self.F, x) + 1.0

    def sinr(self, x):
        return self.signal(x) / self.interference(x)

    def min_rate(self, x):
        return float(np.min(rate_from_sinr(self.sinr(x), self.cfg.dl_prelog, self.cfg.bandwidth)))

    def ipd_ratio(self, x):
        return np.einsum("i,kij,j->k", x, self.T, x) / self.ipd_cap

    def budget_ratio(self, x):
        return (self.ap_masks @ (x ** 2))[self.served] / self.budget[self.served]

    def sinr_upper_bound(self):
        """``min_k |c_k|^2 * sum of budgets of UE k's APs``: no UE can beat it."""
        per_ue_budget = self.ue_masks.astype(float) @ self.budget[self.ms]
        return float(np.min(np.sum(np.abs(self.direct) ** 2, axis=1) * per_ue_budget))

    def max_residual(self, x):
        """Largest relative violation of C1-C3 (<= 0 means feasible)."""
        parts = [np.max(self.budget_ratio(x)) - 1.0, -np.min(x)]
        finite = np.isfinite(self.ipd_cap)
        if finite.any():
            parts.append(np.max(self.ipd_ratio(x)[finite]) - 1.0)
        return float(max(parts))

    # constraint blocks in z = (x[, s]) -------------------------------------
    def base_constraints(self, slack):
        """C1, C2 and C3 as hard constraints.

        With ``slack`` the variable is ``z = (x, s)``; ``s`` does not enter these
        blocks, only the SINR block.
        """
        n = self.n
        dim = n + 1 if slack else n
        blocks = []

        P = np.zeros((n, dim, dim))
        q = np.zeros((n, dim))
        q[np.arange(n), np.arange(n)] = -1.0
        blocks.append(QuadraticConstraints(P, q, np.zeros(n), ["nonneg"] * n))

        served = np.flatnonzero(self.served)
        P = np.zeros((served.size, dim, dim))
        for row, m in enumerate(served):
            P[row, :n, :n] = np.diag(self.ap_masks[m]) / self.budget[m]
        q = np.zeros((served.size, dim))
        blocks.append(QuadraticConstraints(P, q, -np.ones(served.size), ["power"] * served.size))

        finite = np.flatnonzero(np.isfinite(self.ipd_cap))
        P = np.zeros((finite.size, dim, dim))
        P[:, :n, :n] = self.T[finite] / self.ipd_cap[finite, None, None]
        q = np.zeros((finite.size, dim))
        blocks.append(QuadraticConstraints(P, q, -np.ones(finite.size), ["ipd"] * finite.size))
        return QuadraticConstraints.stack(blocks)

    def sinr_constraints(self, gamma, x_prev):
        """Linearized C4, ``(gamma f_k - g~_k) / (gamma f_k + g_k)|_prev - s <= 0``.

        Each row is divided by its positive value scale at ``x_prev`` so that
        residuals are O(1); this leaves the sign of the optimal slack unchanged.
        """
        K, n = self.R.shape[0], self.n
        Rx = self.R @ x_prev  # (K, n)
        g_prev = Rx @ x_prev
        f_prev = np.einsum("i,kij,j->k", x_prev, self.F, x_prev) + 1.0
        scale = 1.0 / (gamma * f_prev + g_prev)
        P = np.zeros((K, n + 1, n + 1))
        P[:, :n, :n] = (gamma * scale)[:, None, None] * self.F
        q = np.zeros((K, n + 1))
        q[:, :n] = -2.0 * scale[:, None] * Rx
        q[:, n] = -1.0
        r = scale * (gamma + g_prev)
        return QuadraticConstraints(P, q, r, ["sinr"] * K)


@dataclass
class AffineBound:
    """``g~(d) = value + slope . (d - anchor)``."""

    anchor: np.ndarray
    value: float
    slope: np.ndarray

    def __call__(self, d):
        return self.value + self.slope @ (np.asarray(d) - self.anchor)


def taylor_lower_bound(d_prev, c):
    """First-order expansion of ``g(d) = |c^T d|^2`` at ``d_prev``.

    ``g`` is convex in real ``d``, so the tangent is a global lower bound.
    The gradient is ``2 Re{c c^H} d``.
    """
    d_prev = np.asarray(d_prev, dtype=float)
    R = _real_outer(np.asarray(c))
    return AffineBound(anchor=d_prev, value=float(d_prev @ R @ d_prev), slope=2.0 * R @ d_prev)


@dataclass
class FeasibilityStep:
    feasible: bool
    x: np.ndarray
    slack: float
    newton_iterations: int


def _interior(x, floor=1e-9):
    scale = max(float(np.max(x)), 1.0)
    return np.maximum(x, floor * scale)


def dl_feasibility_step(gamma, x_prev, problem: DownlinkProblem, cfg: SolverConfig,
                        base=None) -> FeasibilityStep:
    """Solve the slack-relaxed convex feasibility subproblem at ``x_prev``.

    Minimizes ``s`` such that every linearized-C4 residual is at most ``s``
    while C1-C3 hold. The target is met (feasible) iff ``s* <= 0``.
    """
    if base is None:
        base = problem.base_constraints(slack=True)
    cons = QuadraticConstraints.stack([base, problem.sinr_constraints(gamma, x_prev)])
    n = problem.n
    # strictly inside C1-C3 so the barrier is defined at the start
    x0 = 0.999 * _interior(x_prev)
    z = np.append(x0, 0.0)
    vals = cons.values(z)
    own_slack = cons.q[:, n] != 0
    s0 = float(np.max(vals[own_slack])) + 1.0
    z[n] = s0
    obj = np.zeros(n + 1)
    obj[n] = 1.0
    zs, value, info = barrier_solve(ConvexSubproblem(linear_objective(obj), cons), z, cfg)
    return FeasibilityStep(feasible=bool(zs[n] <= 0.0), x=zs[:n], slack=float(zs[n]),
                           newton_iterations=info["newton_iterations"])


def initial_point(problem: DownlinkProblem, alpha, cfg: SolverConfig):
    """FPC amplitudes, scaled down just enough to satisfy every IPD limit."""
    alloc = fpc_dl(alpha, problem.gains.association, problem.cfg, kappa=cfg.init_kappa)
    x = problem.to_vector(alloc)
    finite = np.isfinite(problem.ipd_cap)
    if finite.any():
        ratio = np.max(problem.ipd_ratio(x)[finite])
        if ratio > 1.0:
            x = x / np.sqrt(ratio)
    return x


def _relative_change(x, x_prev):
    denom = float(x @ x)
    return float((x - x_prev) @ (x - x_prev)) / denom if denom > 0 else np.inf


def _sco_feasibility(gamma, x_start, problem, cfg, base, counters):
    x = x_start
    step = None
    for _ in range(cfg.max_sco_iters):
        step = dl_feasibility_step(gamma, x, problem, cfg, base=base)
        counters["sco"] += 1
        counters["newton"] += step.newton_iterations
        change = _relative_change(step.x, x)
        x = step.x
        if change <= cfg.sco_tol:
            break
    return step


def dl_maximin_bisection(gains: EffectiveGains, cfg: SystemConfig, alpha=None,
                         solver: SolverConfig | None = None, init=None) -> AllocationResult:
    """Max-min DL rate via bisection over the common rate with an SCO inner loop.

    Parameters
    ----------
    gains : EffectiveGains
        Gains the network optimizes with (typically built on estimates).
    cfg : SystemConfig
    alpha : ndarray, optional
        Large-scale gains for the FPC starting point. Required if ``init`` is None.
    solver : SolverConfig, optional
    init : PowerAllocationDL, optional
        Starting point satisfying C1-C3.
    """
    solver = solver or SolverConfig()
    started = time.perf_counter()
    problem = DownlinkProblem(gains, cfg)
    if init is None:
        if alpha is None:
            raise ValueError("either alpha or init is required")
        x_feas = initial_point(problem, alpha, solver)
    else:
        x_feas = problem.to_vector(init)
    if problem.max_residual(x_feas) > 1e-9:
        raise ValueError("initial point violates C1-C3")

    prelog, bw = cfg.dl_prelog, cfg.bandwidth
    lo = problem.min_rate(x_feas)
    hi = float(rate_from_sinr(problem.sinr_upper_bound(), prelog, bw))
    eps = solver.bisect_rtol * hi
    base = problem.base_constraints(slack=True)
    counters = {"bisection": 0, "sco": 0, "newton": 0}
    probes, trace = [], [x_feas.copy()]
    while hi - lo > eps and counters["bisection"] < solver.max_bisect_iters:
        delta = 0.5 * (lo + hi)
        gamma = float(sinr_target_from_rate(delta, prelog, bw))
        step = _sco_feasibility(gamma, x_feas, problem, solver, base, counters)
        counters["bisection"] += 1
        probes.append((delta, step.feasible))
        if step.feasible:
            lo = delta
            x_feas = step.x
            trace.append(x_feas.copy())
        else:
            hi = delta

    alloc = problem.to_allocation(x_feas)
    return AllocationResult(
        allocation=alloc,
        min_rate=problem.min_rate(x_feas),
        feasible=problem.max_residual(x_feas) <= 1e-6,
        iterate_trace=trace,
        timing=time.perf_counter() - started,
        iterations=counters,
        probes=probes,
        residuals={"max_relative": problem.max_residual(x_feas), "window": hi - lo,
                   "ceiling": hi},
    )


# log-sum-exp surrogate -------------------------------------------------------

def lse_value(x, problem: DownlinkProblem, upsilon=1.0):
    """Smooth lower bound ``-1/u ln sum_k exp(-u sinr_k)`` of the minimum SINR."""
    return float(-logsumexp(-upsilon * problem.sinr(x)) / upsilon)


def lse_objective(x, x_prev, problem: DownlinkProblem, upsilon=1.0, hessian=False):
    """Surrogate ``-1/u ln sum_k exp(-u g~_k(x; x_prev)/f_k(x))`` and derivatives.

    Returns ``(value, gradient)`` or ``(value, gradient, hessian)``; derivatives
    are with respect to ``x`` and computed in max-shifted form.
    """
    x = np.asarray(x, dtype=float)
    Rx0 = problem.R @ x_prev  # (K, n)
    a = 2.0 * Rx0  # gradient of the affine numerator
    u = a @ x - Rx0 @ x_prev
    Fx = problem.F @ x
    f = Fx @ x + 1.0
    gf = 2.0 * Fx
    phi = u / f
    value = float(-logsumexp(-upsilon * phi) / upsilon)
    w = softmax(-upsilon * phi)
    dphi = a / f[:, None] - (u / f ** 2)[:, None] * gf
    grad = w @ dphi
    if not hessian:
        return value, grad
    cross = a[:, :, None] * gf[:, None, :]
    d2phi = (-(cross + np.swapaxes(cross, 1, 2)) / (f ** 2)[:, None, None]
             + (2.0 * u / f ** 3)[:, None, None] * gf[:, :, None] * gf[:, None, :]
             - (2.0 * u / f ** 2)[:, None, None] * problem.F)
    hess = (np.tensordot(w, d2phi, axes=1)
            - upsilon * ((dphi * w[:, None]).T @ dphi - np.outer(grad, grad)))
    return value, grad, hess


def _negated_surrogate(x_prev, problem, upsilon):
    def objective(x):
        value, grad, hess = lse_objective(x, x_prev, problem, upsilon, hessian=True)
        return -value, -grad, -hess

    return objective


def dl_lse_sco(gains: EffectiveGains, cfg: SystemConfig, alpha=None,
               solver: SolverConfig | None = None, init=None) -> AllocationResult:
    """Successive maximization of the log-sum-exp surrogate subject to C1-C3.

    Every accepted iterate is appended to ``iterate_trace`` (the starting point
    is excluded); ``surrogate_trace`` holds ``(lse(x_prev), surrogate(x_new; x_prev))``
    per step.
    """
    solver = solver or SolverConfig()
    started = time.perf_counter()
    problem = DownlinkProblem(gains, cfg)
    if init is None:
        if alpha is None:
            raise ValueError("either alpha or init is required")
        x = initial_point(problem, alpha, solver)
    else:
        x = problem.to_vector(init)
    if problem.max_residual(x) > 1e-9:
        raise ValueError("initial point violates C1-C3")

    ups = solver.upsilon
    base = problem.base_constraints(slack=False)
    trace, surrogate = [], []
    counters = {"sco": 0, "newton": 0}
    for _ in range(solver.max_sco_iters):
        start = 0.999 * _interior(x)
        prob = ConvexSubproblem(_negated_surrogate(x, problem, ups), base)
        x_new, _, info = barrier_solve(prob, start, solver)
        counters["sco"] += 1
        counters["newton"] += info["newton_iterations"]
        before = lse_value(x, problem, ups)
        after = lse_objective(x_new, x, problem, ups)[0]
        if after < before:
            # barrier path ended below the anchor; keep the anchor (ascent safeguard)
            log.debug("LSE step rejected: %.6g < %.6g", after, before)
            break
        surrogate.append((before, after))
        change = _relative_change(x_new, x)
        x = x_new
        trace.append(x.copy())
        if change <= solver.lse_tol:
            break

    return AllocationResult(
        allocation=problem.to_allocation(x),
        min_rate=problem.min_rate(x),
        feasible=problem.max_residual(x) <= 1e-6,
        iterate_trace=trace,
        timing=time.perf_counter() - started,
        iterations=counters,
        surrogate_trace=surrogate,
        residuals={"max_relative": problem.max_residual(x)},
    )
