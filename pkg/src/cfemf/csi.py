"""Uplink pilots and LMMSE channel estimation under pilot contamination."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import ChannelRealization, LargeScaleState, SystemConfig, steering_vector

__all__ = [
    "PilotBook",
    "ChannelEstimateSet",
    "assign_pilots",
    "spatial_covariance",
    "covariance_matrices",
    "estimate_channels",
    "analytic_mse",
]


@dataclass
class PilotBook:
    pilot_len: int
    sequences: np.ndarray  # (K, tau_p) unit-norm rows, one per UE
    assignment: np.ndarray  # (K,) pilot index per UE

    @property
    def overlap(self):
        """``|t_j^H t_k|^2`` for every UE pair, shape (K, K)."""
        return np.abs(self.sequences.conj() @ self.sequences.T) ** 2


@dataclass
class ChannelEstimateSet:
    h_hat: np.ndarray  # (K, M, L)
    C: np.ndarray  # (K, M, L, L)
    D: np.ndarray  # (K, M, L, L)


def assign_pilots(num_ues, pilot_len) -> PilotBook:
    """Round-robin assignment of the rows of a unitary DFT matrix."""
    if pilot_len < 1:
        raise ValueError("pilot_len must be >= 1")
    n = np.arange(pilot_len)
    dft = np.exp(-2j * np.pi * np.outer(n, n) / pilot_len) / np.sqrt(pilot_len)
    assignment = np.arange(num_ues) % pilot_len
    return PilotBook(pilot_len=pilot_len, sequences=dft[assignment], assignment=assignment)


def spatial_covariance(ls: LargeScaleState, k, m, num_antennas):
    """Covariance of ``h[k, m]``: ``alpha/(1+beta) (beta v v^H + I)``."""
    return covariance_matrices(ls, num_antennas)[k, m]


def covariance_matrices(ls: LargeScaleState, num_antennas):
    """All link covariances at once, shape (K, M, L, L)."""
    v = steering_vector(ls.aoa, num_antennas)
    beta = ls.rician[..., None, None]
    outer = v[..., :, None] * v[..., None, :].conj()
    eye = np.eye(num_antennas)
    return (ls.alpha / (1.0 + ls.rician))[..., None, None] * (beta * outer + eye)


def _pilot_powers(cfg, K):
    return np.full(K, cfg.pilot_power, dtype=float)


def observation_covariances(C, book: PilotBook, pilot_powers, noise_var):
    """``D[k, m] = sum_j tau_p mu_j C[j, m] |t_j^H t_k|^2 + eta^2 I``."""
    L = C.shape[-1]
    weights = book.pilot_len * pilot_powers[None, :] * book.overlap  # [k, j]
    D = np.einsum("kj,jmab->kmab", weights, C)
    return D + noise_var * np.eye(L)


def estimate_channels(channels: ChannelRealization, book: PilotBook, ls: LargeScaleState,
                      cfg: SystemConfig, seed, pilot_powers=None,
                      noise_var=None) -> ChannelEstimateSet:
    """LMMSE estimates ``h_hat = sqrt(tau_p mu_k) C D^{-1} u``.

    The received pilot block at AP m is ``Y_m = sum_j sqrt(tau_p mu_j) h_jm t_j^T + N_m``
    and is despread with ``conj(t_k)``, so UEs on the same pilot see the same
    projected noise.

    Raises
    ------
    numpy.linalg.LinAlgError
        If an observation covariance is numerically singular (needs eta^2 = 0).
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    h = channels.h
    K, M, L = h.shape
    mu = _pilot_powers(cfg, K) if pilot_powers is None else np.asarray(pilot_powers, float)
    eta2 = cfg.noise_var_ap if noise_var is None else noise_var
    tau = book.pilot_len
    t = book.sequences  # (K, tau)

    amp = np.sqrt(tau * mu)
    Y = np.einsum("k,kml,kt->mlt", amp, h, t)
    noise = (rng.standard_normal((M, L, tau)) + 1j * rng.standard_normal((M, L, tau)))
    Y = Y + np.sqrt(eta2 / 2.0) * noise
    u = np.einsum("mlt,kt->kml", Y, t.conj())

    C = covariance_matrices(ls, L)
    D = observation_covariances(C, book, mu, eta2)
    Dinv_u = np.linalg.solve(D, u[..., None])[..., 0]
    h_hat = amp[:, None, None] * np.einsum("kmab,kmb->kma", C, Dinv_u)
    return ChannelEstimateSet(h_hat=h_hat, C=C, D=D)


def analytic_mse(est: ChannelEstimateSet, book: PilotBook, pilot_powers):
    """``tr(C - tau_p mu_k C D^{-1} C)`` per link, shape (K, M)."""
    mu = np.asarray(pilot_powers, float)
    CDC = est.C @ np.linalg.solve(est.D, est.C)
    err = est.C - (book.pilot_len * mu)[:, None, None, None] * CDC
    return np.real(np.trace(err, axis1=-2, axis2=-1))
