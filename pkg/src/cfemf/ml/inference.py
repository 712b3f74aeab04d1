"""Turning network outputs into power allocations that respect every limit."""

from __future__ import annotations

import numpy as np

from ..metrics import EffectiveGains, PowerAllocationDL, PowerAllocationUL, ipd
from ..scenario import SystemConfig
from .dataset import scatter_links

__all__ = ["project_dl", "project_ul", "predict_allocation"]


def project_dl(p, cfg: SystemConfig, gains: EffectiveGains | None = None) -> PowerAllocationDL:
    """Scale each over-budget AP down to its budget, then all powers down for IPD.

    The IPD step needs ``gains``; without them only the per-AP budgets are
    enforced.
    """
    p = np.maximum(np.asarray(p, dtype=float), 0.0)
    totals = p.sum(axis=0)
    over = totals > cfg.ap_power_budget
    scale = np.ones_like(totals)
    scale[over] = cfg.ap_power_budget / totals[over]
    alloc = PowerAllocationDL(p=p * scale[None, :])
    if gains is not None and np.isfinite(cfg.ipd_limit):
        worst = float(np.max(ipd(alloc, gains, cfg))) / cfg.ipd_limit
        if worst > 1.0:
            # IPD is quadratic in amplitude, hence linear in power
            alloc = PowerAllocationDL(p=alloc.p / worst)
    return alloc


def project_ul(q, cfg: SystemConfig) -> PowerAllocationUL:
    """Clamp every UE power to ``[0, min(Q, E/b)]``."""
    return PowerAllocationUL(q=np.clip(np.asarray(q, dtype=float), 0.0, cfg.ue_power_cap))


def predict_allocation(model, features, cfg: SystemConfig, direction, ranking=None,
                       gains: EffectiveGains | None = None):
    """Run ``model`` on one feature vector and project onto the feasible set.

    Parameters
    ----------
    model : fitted regressor with ``predict``
    features : ndarray
        ``(N*K,)`` DL or ``(K,)`` UL feature vector.
    direction : {"dl", "ul"}
    ranking : ndarray, optional
        ``(K, N)`` serving APs per UE (DL only), as used to build the features.
    gains : EffectiveGains, optional
        Used for the IPD projection in the DL.
    """
    out = np.asarray(model.predict(np.asarray(features, dtype=float)[None, :]))[0]
    if direction == "dl":
        if ranking is None:
            raise ValueError("DL prediction needs the link ranking")
        return project_dl(scatter_links(out, ranking, cfg.num_aps), cfg, gains)
    if direction == "ul":
        return project_ul(out, cfg)
    raise ValueError(f"unknown direction {direction!r}")
