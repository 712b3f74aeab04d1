"""One Monte Carlo snapshot: deployment -> channels -> estimates -> beams -> gains."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .beamforming import BeamformerSet, make_beamformers
from .csi import ChannelEstimateSet, PilotBook, assign_pilots, estimate_channels
from .metrics import EffectiveGains, build_gains
from .scenario import (ChannelRealization, Deployment, LargeScaleState, SystemConfig,
                       draw_channels, generate_deployment, sequence_seeds)

__all__ = ["Snapshot", "build_snapshot", "trial_seed", "SMALL_PRESET", "system_preset"]

# desk-scale configuration used by the acceptance suite
SMALL_PRESET = dict(num_ues=4, num_aps=8, antennas_per_ap=2, cluster_size=3)


def system_preset(name) -> SystemConfig:
    if name == "paper":
        return SystemConfig()
    if name == "small":
        return SystemConfig(**SMALL_PRESET)
    raise ValueError(f"unknown preset {name!r}")


def trial_seed(master_seed, trial):
    """Seed of trial ``trial``, independent of worker scheduling."""
    return int(np.random.SeedSequence([int(master_seed), int(trial)]).generate_state(1)[0])


@dataclass
class Snapshot:
    cfg: SystemConfig
    deployment: Deployment
    large_scale: LargeScaleState
    channels: ChannelRealization
    pilots: PilotBook
    estimates: ChannelEstimateSet
    beams: BeamformerSet
    gains_est: EffectiveGains
    gains_true: EffectiveGains

    @property
    def association(self):
        return self.deployment.association

    def gains(self, mode):
        if mode == "estimated":
            return self.gains_est
        if mode == "true":
            return self.gains_true
        raise ValueError(f"unknown evaluation mode {mode!r}")


def build_snapshot(cfg: SystemConfig, seed, beamformer="cb", perfect_csi=False) -> Snapshot:
    """Draw a full snapshot from ``seed``.

    With ``perfect_csi`` the estimates equal the true channels.
    """
    rngs = sequence_seeds(seed, ["deployment", "channels", "pilots"])
    deployment, ls = generate_deployment(cfg, rngs["deployment"])
    channels = draw_channels(ls, cfg, rngs["channels"])
    book = assign_pilots(cfg.num_ues, cfg.pilot_len)
    est = estimate_channels(channels, book, ls, cfg, rngs["pilots"])
    if perfect_csi:
        est = ChannelEstimateSet(h_hat=channels.h.copy(), C=est.C, D=est.D)
    beams = make_beamformers(beamformer, est.h_hat, deployment.association,
                             np.full(cfg.num_ues, cfg.pilot_power), cfg.noise_var_ap)
    return Snapshot(
        cfg=cfg,
        deployment=deployment,
        large_scale=ls,
        channels=channels,
        pilots=book,
        estimates=est,
        beams=beams,
        gains_est=build_gains(est.h_hat, beams, deployment.association, cfg),
        gains_true=build_gains(channels.h, beams, deployment.association, cfg),
    )
