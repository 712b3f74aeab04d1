"""Uplink max-min power control with per-UE power and SAR caps.

For a fixed SINR target the constraints are linear in ``q``, so feasibility
reduces to the standard-interference fixed point ``q <- min(cap, gamma I(q)/g)``
started from zero. Its limit is the least solution of ``q = gamma (Psi q + nu)/g``
whenever that solution is below the caps; ``method="direct"`` computes that limit
with one linear solve, ``method="fixed-point"`` iterates it.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from ..metrics import EffectiveGains, PowerAllocationUL
from ..scenario import SystemConfig
from .common import AllocationResult, SolverConfig, rate_from_sinr, sinr_target_from_rate

__all__ = ["UplinkTarget", "ul_caps", "ul_target_feasible", "fixed_point_iterates",
           "ul_maximin_bisection"]


@dataclass
class UplinkTarget:
    feasible: bool
    q: np.ndarray
    iterations: int


def ul_caps(cfg: SystemConfig, num_ues=None):
    return np.full(num_ues or cfg.num_ues, cfg.ue_power_cap)


def _coupling(gains):
    mag = np.abs(gains.ul) ** 2
    g = np.diag(mag).copy()
    psi = mag.copy()
    np.fill_diagonal(psi, 0.0)
    return g, psi, gains.ul_noise


def _meets(q, gamma, g, psi, nu, rtol=1e-7):
    sinr = q * g / (psi @ q + nu)
    return bool(np.all(sinr >= gamma * (1.0 - rtol)))


def fixed_point_iterates(gamma, gains: EffectiveGains, caps, max_iters=1000):
    """Yield the capped standard-interference iterates from ``q = 0``."""
    g, psi, nu = _coupling(gains)
    q = np.zeros_like(caps, dtype=float)
    yield q
    with np.errstate(divide="ignore"):
        for _ in range(max_iters):
            q = np.minimum(caps, gamma * (psi @ q + nu) / g)
            yield q


def ul_target_feasible(gamma, gains: EffectiveGains, caps, solver: SolverConfig | None = None,
                       method=None) -> UplinkTarget:
    """Decide whether every UE can reach SINR ``gamma`` within its cap.

    A UE with zero effective gain makes any positive target infeasible (this
    is reported, never raised).
    """
    solver = solver or SolverConfig()
    method = method or solver.ul_method
    caps = np.asarray(caps, dtype=float)
    g, psi, nu = _coupling(gains)
    if gamma <= 0:
        return UplinkTarget(True, np.zeros_like(caps), 0)
    if np.any(g <= 0):
        return UplinkTarget(False, np.zeros_like(caps), 0)

    if method == "direct":
        # least solution of (I - gamma diag(1/g) Psi) q = gamma nu / g
        A = np.eye(caps.size) - gamma * psi / g[:, None]
        b = gamma * nu / g
        try:
            q = np.linalg.solve(A, b)
        except np.linalg.LinAlgError:
            return UplinkTarget(False, caps.copy(), 1)
        # a nonnegative solution exists only if the spectral radius is below 1
        if np.any(q < 0) or not np.all(np.isfinite(q)) or \
                np.max(np.abs(np.linalg.eigvals(gamma * psi / g[:, None]))) >= 1.0:
            return UplinkTarget(False, caps.copy(), 1)
        if np.any(q > caps):
            return UplinkTarget(False, np.minimum(q, caps), 1)
        return UplinkTarget(_meets(q, gamma, g, psi, nu), q, 1)

    q = np.zeros_like(caps)
    tol = solver.ul_fixed_point_tol * caps
    for it in range(1, solver.ul_max_fixed_point_iters + 1):
        q_new = np.minimum(caps, gamma * (psi @ q + nu) / g)
        done = np.all(np.abs(q_new - q) <= tol)
        q = q_new
        if done:
            break
    return UplinkTarget(_meets(q, gamma, g, psi, nu), q, it)


def ul_maximin_bisection(gains: EffectiveGains, cfg: SystemConfig,
                         solver: SolverConfig | None = None, caps=None) -> AllocationResult:
    """Max-min UL rate by bisection on the common rate target."""
    solver = solver or SolverConfig()
    started = time.perf_counter()
    K = gains.num_ues
    caps = ul_caps(cfg, K) if caps is None else np.asarray(caps, dtype=float)
    g, _, nu = _coupling(gains)
    prelog, bw = cfg.ul_prelog, cfg.bandwidth
    lo = 0.0
    hi = float(rate_from_sinr(np.min(caps * g / nu), prelog, bw))
    eps = solver.bisect_rtol * hi
    q_best = np.zeros(K)
    probes = []
    iters = 0
    inner = 0
    while hi - lo > eps and iters < solver.max_bisect_iters:
        delta = 0.5 * (lo + hi)
        gamma = float(sinr_target_from_rate(delta, prelog, bw))
        res = ul_target_feasible(gamma, gains, caps, solver)
        iters += 1
        inner += res.iterations
        probes.append((delta, res.feasible))
        if res.feasible:
            lo, q_best = delta, res.q
        else:
            hi = delta

    alloc = PowerAllocationUL(q=q_best)
    coupling = np.abs(gains.ul) ** 2 * q_best[None, :]
    signal = np.diag(coupling)
    sinr = signal / (coupling.sum(axis=1) - signal + nu)
    min_rate = float(np.min(rate_from_sinr(sinr, prelog, bw)))
    residual = float(np.max(q_best / caps - 1.0))
    return AllocationResult(
        allocation=alloc,
        min_rate=min_rate,
        feasible=bool(residual <= 1e-6 and np.all(q_best >= 0)),
        timing=time.perf_counter() - started,
        iterations={"bisection": iters, "inner": inner},
        probes=probes,
        residuals={"max_relative": residual, "window": hi - lo, "ceiling": hi},
    )
