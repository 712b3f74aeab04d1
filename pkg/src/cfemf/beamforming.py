"""Conjugate and regularized zero-forcing precoders/combiners."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["BeamformerSet", "conjugate_beamformers", "rzf_combiners", "make_beamformers"]


@dataclass
class BeamformerSet:
    b: np.ndarray  # (K, M, L) unit-norm DL precoders, zero off-association
    f: np.ndarray  # (K, M, L) UL combiners, zero off-association
    kind: str


def _unit(vectors, association):
    norms = np.linalg.norm(vectors, axis=-1)
    if np.any(norms[association] == 0):
        raise ValueError("zero-norm vector on an associated link")
    safe = np.where(association, norms, 1.0)
    return np.where(association[..., None], vectors / safe[..., None], 0.0)


def conjugate_beamformers(h_hat, association) -> BeamformerSet:
    """``b = h_hat/|h_hat|`` and ``f = h_hat`` on associated links."""
    association = np.asarray(association, dtype=bool)
    b = _unit(h_hat, association)
    f = np.where(association[..., None], h_hat, 0.0)
    return BeamformerSet(b=b, f=f, kind="cb")


def rzf_combiners(h_hat, association, pilot_powers, noise_var) -> BeamformerSet:
    """RZF filters ``f_km = mu_k (sum_j mu_j h_jm h_jm^H + noise I)^{-1} h_km``.

    The Gram matrix at each AP includes all K UEs. The DL precoder is the
    normalized combiner.
    """
    association = np.asarray(association, dtype=bool)
    K, M, L = h_hat.shape
    mu = np.broadcast_to(np.asarray(pilot_powers, dtype=float), (K,))
    gram = np.einsum("k,kma,kmb->mab", mu, h_hat, h_hat.conj()) + noise_var * np.eye(L)
    # solve per AP for all UEs at once: (M, L, L) x (M, L, K)
    sol = np.linalg.solve(gram, np.transpose(h_hat, (1, 2, 0)))
    f = mu[:, None, None] * np.transpose(sol, (2, 0, 1))
    f = np.where(association[..., None], f, 0.0)
    return BeamformerSet(b=_unit(f, association), f=f, kind="rzf")


def make_beamformers(kind, h_hat, association, pilot_powers, noise_var) -> BeamformerSet:
    if kind == "cb":
        return conjugate_beamformers(h_hat, association)
    if kind == "rzf":
        return rzf_combiners(h_hat, association, pilot_powers, noise_var)
    raise ValueError(f"unknown beamformer {kind!r}")
