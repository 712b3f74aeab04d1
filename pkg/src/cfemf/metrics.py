"""SINR, rate and EMF exposure (IPD, SAR) for a given power allocation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import SystemConfig

__all__ = [
    "PowerAllocationDL",
    "PowerAllocationUL",
    "EffectiveGains",
    "RateReport",
    "build_gains",
    "dl_stream_amplitudes",
    "dl_sinr",
    "ul_sinr",
    "ipd",
    "sar",
    "rates",
    "rate_report",
    "dl_violations",
    "ul_violations",
]


@dataclass
class PowerAllocationDL:
    p: np.ndarray  # (K, M) W, zero off-association

    @property
    def amplitude(self):
        return np.sqrt(np.maximum(self.p, 0.0))

    @classmethod
    def from_amplitude(cls, d):
        return cls(p=np.asarray(d, dtype=float) ** 2)


@dataclass
class PowerAllocationUL:
    q: np.ndarray  # (K,) W


@dataclass
class EffectiveGains:
    """Per-link scalars that fully determine DL and UL SINRs.

    ``dl[k, j, m] = a_jm h_km^H b_jm`` is what UE k receives from stream j
    through AP m; ``ul[k, j] = sum_m a_km f_km^H h_jm``; ``ul_noise[k] =
    sum_m a_km eta^2 |f_km|^2``.
    """

    dl: np.ndarray
    ul: np.ndarray
    ul_noise: np.ndarray
    association: np.ndarray
    noise_var_ue: np.ndarray

    @property
    def direct(self):
        """``c_k`` vectors stacked as (K, M): ``a_km h_km^H b_km``."""
        K = self.dl.shape[0]
        return self.dl[np.arange(K), np.arange(K), :]

    @property
    def num_ues(self):
        return self.dl.shape[0]


@dataclass
class RateReport:
    sinr: np.ndarray
    rate: np.ndarray
    min_rate: float


def build_gains(h, beams, association, cfg: SystemConfig) -> EffectiveGains:
    """Assemble :class:`EffectiveGains` from channels ``h`` (true or estimated)."""
    a = np.asarray(association, dtype=bool)
    K = h.shape[0]
    # h_km^H b_jm for all k, j, m
    dl = np.einsum("kml,jml->kjm", h.conj(), beams.b) * a[None, :, :]
    ul = np.einsum("kml,jml->kj", (beams.f * a[..., None]).conj(), h)
    ul_noise = cfg.noise_var_ap * np.sum(a * np.sum(np.abs(beams.f) ** 2, axis=-1), axis=1)
    return EffectiveGains(dl=dl, ul=ul, ul_noise=ul_noise, association=a,
                          noise_var_ue=np.full(K, cfg.noise_var_ue))


def dl_stream_amplitudes(d, gains: EffectiveGains):
    """``S[k, j] = sum_m a_jm d_jm h_km^H b_jm`` for amplitudes ``d`` (K, M)."""
    d = np.where(gains.association, d, 0.0)
    return np.einsum("kjm,jm->kj", gains.dl, d)


def dl_sinr(alloc: PowerAllocationDL, gains: EffectiveGains):
    power = np.abs(dl_stream_amplitudes(alloc.amplitude, gains)) ** 2
    signal = np.diag(power).copy()
    interference = power.sum(axis=1) - signal
    return signal / (interference + gains.noise_var_ue)


def ul_sinr(alloc: PowerAllocationUL, gains: EffectiveGains):
    q = np.asarray(alloc.q, dtype=float)
    coupling = np.abs(gains.ul) ** 2 * q[None, :]
    signal = np.diag(coupling).copy()
    interference = coupling.sum(axis=1) - signal
    return signal / (interference + gains.ul_noise)


def ipd(alloc: PowerAllocationDL, gains: EffectiveGains, cfg: SystemConfig):
    """Incident power density per UE in W/m^2. Pass gains built on true channels."""
    power = np.abs(dl_stream_amplitudes(alloc.amplitude, gains)) ** 2
    return 4.0 * np.pi / cfg.wavelength ** 2 * power.sum(axis=1)


def sar(alloc: PowerAllocationUL, cfg: SystemConfig):
    """SAR per UE and body part, shape (K, n_body)."""
    coeffs = np.array([b for b, _ in cfg.sar_limits])
    return np.asarray(alloc.q, dtype=float)[:, None] * coeffs[None, :]


def rates(sinr, cfg: SystemConfig, direction):
    prelog = cfg.dl_prelog if direction == "dl" else cfg.ul_prelog
    return prelog * cfg.bandwidth * np.log2(1.0 + np.asarray(sinr, dtype=float))


def rate_report(sinr, cfg, direction) -> RateReport:
    r = rates(sinr, cfg, direction)
    return RateReport(sinr=np.asarray(sinr), rate=r, min_rate=float(np.min(r)))


def _excess(value, limit, rtol):
    return value > limit * (1.0 + rtol)


def dl_violations(alloc: PowerAllocationDL, true_gains: EffectiveGains, cfg, rtol=1e-6):
    """Count per-AP budget and IPD violations beyond relative residual ``rtol``."""
    p = np.where(true_gains.association, alloc.p, 0.0)
    budget = int(np.sum(_excess(p.sum(axis=0), cfg.ap_power_budget, rtol)))
    exposure = int(np.sum(_excess(ipd(alloc, true_gains, cfg), cfg.ipd_limit, rtol)))
    negative = int(np.sum(alloc.p < 0))
    return {"power": budget, "ipd": exposure, "negative": negative}


def ul_violations(alloc: PowerAllocationUL, cfg, rtol=1e-6):
    q = np.asarray(alloc.q, dtype=float)
    limits = np.array([e for _, e in cfg.sar_limits])
    return {
        "power": int(np.sum(_excess(q, cfg.ue_power_budget, rtol))),
        "sar": int(np.sum(_excess(sar(alloc, cfg), limits[None, :], rtol))),
        "negative": int(np.sum(q < 0)),
    }
