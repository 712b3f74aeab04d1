from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np

__all__ = ["SolverConfig", "AllocationResult", "sinr_target_from_rate", "rate_from_sinr"]


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances and iteration limits of the model-based power control.

    ``bisect_rtol`` sets the bisection window relative to the initial upper
    bound (``eps1 = bisect_rtol * delta_max``); ``sco_tol`` and ``lse_tol``
    are thresholds on the squared relative iterate change.
    """

    bisect_rtol: float = 1e-3
    sco_tol: float = 1e-4
    lse_tol: float = 1e-4
    upsilon: float = 1.0
    max_sco_iters: int = 30
    max_bisect_iters: int = 40
    max_newton_iters: int = 50
    barrier_t0: float = 1.0
    barrier_mu: float = 20.0
    barrier_gap: float = 1e-7
    newton_tol: float = 1e-10
    init_kappa: float = 0.5
    ul_method: str = "direct"
    ul_fixed_point_tol: float = 1e-10
    ul_max_fixed_point_iters: int = 200_000

    def __post_init__(self):
        for name in ("bisect_rtol", "sco_tol", "lse_tol", "upsilon", "barrier_t0",
                     "barrier_gap", "newton_tol", "ul_fixed_point_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.barrier_mu <= 1:
            raise ValueError("barrier_mu must exceed 1")
        if self.ul_method not in ("direct", "fixed-point"):
            raise ValueError("ul_method must be 'direct' or 'fixed-point'")

    def to_dict(self):
        return asdict(self)

    def digest(self):
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


@dataclass
class AllocationResult:
    allocation: object  # PowerAllocationDL or PowerAllocationUL
    min_rate: float
    feasible: bool
    iterate_trace: list = field(default_factory=list)
    timing: float = 0.0
    iterations: dict = field(default_factory=dict)
    probes: list = field(default_factory=list)  # (rate target, feasible)
    surrogate_trace: list = field(default_factory=list)
    residuals: dict = field(default_factory=dict)

    def diagnostics(self):
        """JSON-serializable solver record."""
        return {
            "min_rate": float(self.min_rate),
            "feasible": bool(self.feasible),
            "wall_time_s": float(self.timing),
            "iterations": {k: int(v) for k, v in self.iterations.items()},
            "probes": [[float(d), bool(ok)] for d, ok in self.probes],
            "residuals": {k: float(v) for k, v in self.residuals.items()},
        }


def sinr_target_from_rate(rate, prelog, bandwidth):
    """Linear SINR needed for ``rate`` bit/s: ``2^(rate/(prelog B)) - 1``."""
    return np.expm1(np.asarray(rate, dtype=float) / (prelog * bandwidth) * np.log(2.0))


def rate_from_sinr(sinr, prelog, bandwidth):
    return prelog * bandwidth * np.log2(1.0 + np.asarray(sinr, dtype=float))
