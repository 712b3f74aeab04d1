"""Uniform and fractional power control baselines."""

from __future__ import annotations

import numpy as np

from .metrics import PowerAllocationDL, PowerAllocationUL
from .scenario import SystemConfig

__all__ = ["fpc_dl", "fpc_ul", "fpc_ul_raw", "emf_scale_ul", "POLICY_EXPONENTS"]

# CLI policy name -> FPC exponent (same for DL kappa and UL varkappa)
POLICY_EXPONENTS = {"upc": 0.0, "fpc-fair": -0.5, "fpc-opp": 0.5}


def fpc_dl(alpha, association, cfg: SystemConfig, kappa=0.5) -> PowerAllocationDL:
    """``p_km = P_m alpha_km^kappa / sum_j a_jm alpha_jm^kappa``.

    APs serving no UE keep zero power.
    """
    a = np.asarray(association, dtype=bool)
    weights = np.where(a, np.asarray(alpha, dtype=float) ** kappa, 0.0)
    totals = weights.sum(axis=0)
    share = np.divide(weights, totals[None, :], out=np.zeros_like(weights),
                      where=totals[None, :] > 0)
    return PowerAllocationDL(p=cfg.ap_power_budget * share)


def fpc_ul_raw(alpha, association, cfg: SystemConfig, kappa=-0.5):
    """FPC UL powers before any EMF scaling."""
    gain = np.sum(np.where(association, alpha, 0.0), axis=1)
    weights = gain ** kappa
    return cfg.ue_power_budget * weights / np.max(weights)


def emf_scale_ul(alloc: PowerAllocationUL, cfg: SystemConfig) -> PowerAllocationUL:
    """Clip each UE power to the tightest SAR-compliant level."""
    cap = min(e / b for b, e in cfg.sar_limits)
    return PowerAllocationUL(q=np.minimum(np.asarray(alloc.q, dtype=float), cap))


def fpc_ul(alpha, association, cfg: SystemConfig, kappa=-0.5) -> PowerAllocationUL:
    return emf_scale_ul(PowerAllocationUL(q=fpc_ul_raw(alpha, association, cfg, kappa)), cfg)
