"""Policies, per-trial evaluation and training-sample generation.

A policy maps a :class:`~cfemf.pipeline.Snapshot` to a power allocation using
only what the network knows (large-scale gains and channel estimates).
Evaluation then computes rates in the chosen mode and exposure on the true
channels.
"""

from __future__ import annotations

import re
import time
from dataclasses import dataclass, field

import numpy as np

from .heuristics import POLICY_EXPONENTS, fpc_dl, fpc_ul
from .metrics import dl_sinr, dl_violations, ipd, rates, sar, ul_sinr, ul_violations
from .ml.dataset import dl_features, gather_links, ul_features
from .ml.inference import predict_allocation
from .optimizer import (SolverConfig, SolverFailure, dl_lse_sco, dl_maximin_bisection,
                        ul_maximin_bisection)
from .pipeline import Snapshot, build_snapshot

__all__ = [
    "POLICIES",
    "PolicyOutcome",
    "parse_policy",
    "run_policy",
    "evaluate",
    "Sample",
    "make_sample",
]

POLICIES = ("upc", "fpc-fair", "fpc-opp", "opc-maximin", "opc-lse", "e2e-dnn", "u-dnn")
_UNFOLDED = re.compile(r"^u-dnn(?:\((\d+)\))?$")


def parse_policy(name):
    """Return ``(family, stages)``; ``stages`` is only set for ``u-dnn(n)``."""
    name = name.strip()
    match = _UNFOLDED.match(name)
    if match:
        return "u-dnn", int(match.group(1)) if match.group(1) else None
    if name in POLICIES:
        return name, None
    raise ValueError(f"unknown policy {name!r}")


@dataclass
class PolicyOutcome:
    policy: str
    allocation: object = None
    wall_time: float = 0.0
    failed: bool = False
    message: str = ""
    diagnostics: dict = field(default_factory=dict)


def _dnn_allocation(model, snap, direction, stages):
    cfg = snap.cfg
    alpha = snap.large_scale.alpha
    if direction == "dl":
        feats, ranking = dl_features(alpha, snap.association, cfg)
    else:
        feats, ranking = ul_features(alpha, snap.association, cfg), None
    if stages is not None:
        model = _StagePrefix(model, stages)
    return predict_allocation(model, feats, cfg, direction, ranking=ranking,
                              gains=snap.gains_true)


class _StagePrefix:
    """The first ``n`` stages of an unfolded cascade."""

    def __init__(self, model, n):
        if n > len(model.stages_):
            raise ValueError(f"model has {len(model.stages_)} stages, {n} requested")
        self.model, self.n = model, n

    def predict(self, X):
        return self.model.predict(X, n_stages=self.n)


def run_policy(name, snap: Snapshot, direction, solver: SolverConfig | None = None,
               models=None) -> PolicyOutcome:
    """Allocate powers for one snapshot; solver failures are reported, not raised.

    ``models`` maps ``"e2e-dnn"`` / ``"u-dnn"`` to fitted regressors.
    """
    family, stages = parse_policy(name)
    solver = solver or SolverConfig()
    cfg = snap.cfg
    alpha = snap.large_scale.alpha
    gains = snap.gains_est
    outcome = PolicyOutcome(policy=name)
    started = time.perf_counter()
    try:
        if family in POLICY_EXPONENTS:
            kappa = POLICY_EXPONENTS[family]
            if direction == "dl":
                outcome.allocation = fpc_dl(alpha, snap.association, cfg, kappa)
            else:
                outcome.allocation = fpc_ul(alpha, snap.association, cfg, kappa)
        elif family == "opc-maximin":
            if direction == "dl":
                res = dl_maximin_bisection(gains, cfg, alpha=alpha, solver=solver)
            else:
                res = ul_maximin_bisection(gains, cfg, solver=solver)
            outcome.allocation, outcome.diagnostics = res.allocation, res.diagnostics()
        elif family == "opc-lse":
            if direction != "dl":
                raise ValueError("opc-lse is a downlink policy")
            res = dl_lse_sco(gains, cfg, alpha=alpha, solver=solver)
            outcome.allocation, outcome.diagnostics = res.allocation, res.diagnostics()
        else:
            model = (models or {}).get(family)
            if model is None:
                raise ValueError(f"policy {name} needs a trained model")
            if family == "u-dnn" and stages is None:
                stages = len(model.stages_)
            outcome.allocation = _dnn_allocation(model, snap, direction, stages)
    except SolverFailure as exc:
        outcome.failed, outcome.message = True, str(exc)
    outcome.wall_time = time.perf_counter() - started
    return outcome


def evaluate(snap: Snapshot, allocation, direction, mode="estimated"):
    """Per-UE rate, IPD and SAR plus violation counts.

    Returns a dict with ``rate``, ``ipd`` and ``sar`` arrays of length K
    (``nan`` where a quantity does not apply) and ``violations``.
    """
    cfg = snap.cfg
    K = cfg.num_ues
    gains = snap.gains(mode)
    if direction == "dl":
        rate = rates(dl_sinr(allocation, gains), cfg, "dl")
        exposure = ipd(allocation, snap.gains_true, cfg)
        return {"rate": rate, "ipd": exposure, "sar": np.full(K, np.nan),
                "violations": dl_violations(allocation, snap.gains_true, cfg)}
    rate = rates(ul_sinr(allocation, gains), cfg, "ul")
    return {"rate": rate, "ipd": np.full(K, np.nan), "sar": sar(allocation, cfg).max(axis=1),
            "violations": ul_violations(allocation, cfg)}


@dataclass
class Sample:
    features: np.ndarray
    label: np.ndarray
    trace: list = field(default_factory=list)  # LSE iterates on the serving links (DL)


def make_sample(cfg, seed, direction, beamformer="cb", solver=None, unfold=False):
    """Draw one scenario and solve the max-min problem for its label.

    Returns ``None`` when the solver fails so the caller can move on.
    """
    solver = solver or SolverConfig()
    snap = build_snapshot(cfg, seed, beamformer=beamformer)
    alpha = snap.large_scale.alpha
    try:
        if direction == "dl":
            feats, ranking = dl_features(alpha, snap.association, cfg)
            res = dl_maximin_bisection(snap.gains_est, cfg, alpha=alpha, solver=solver)
            label = gather_links(res.allocation.p, ranking)
            trace = []
            if unfold:
                lse = dl_lse_sco(snap.gains_est, cfg, alpha=alpha, solver=solver)
                ks, ms = np.nonzero(snap.association)
                for x in lse.iterate_trace:
                    p = np.zeros(snap.association.shape)
                    p[ks, ms] = cfg.ap_power_budget * x ** 2
                    trace.append(gather_links(p, ranking))
            return Sample(feats, label, trace)
        res = ul_maximin_bisection(snap.gains_est, cfg, solver=solver)
        return Sample(ul_features(alpha, snap.association, cfg), np.asarray(res.allocation.q))
    except SolverFailure:
        return None
