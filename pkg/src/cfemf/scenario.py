"""Random deployments, large-scale fading and Rician small-scale channels.

Geometry lives on a square area wrapped around its edges (a torus), so every
UE sees the same statistical neighbourhood regardless of where it is dropped.
All draws are pure functions of ``(config, seed)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Sequence

import numpy as np

__all__ = [
    "SystemConfig",
    "Deployment",
    "LargeScaleState",
    "ChannelRealization",
    "dbm_to_watt",
    "watt_to_dbm",
    "plos",
    "pathloss_db",
    "steering_vector",
    "wrapped_offsets",
    "associate",
    "generate_deployment",
    "draw_channels",
    "export_deployment_csv",
]

SPEED_OF_LIGHT = 299_792_458.0


def dbm_to_watt(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def watt_to_dbm(watt):
    return 10.0 * np.log10(np.asarray(watt, dtype=float)) + 30.0


@dataclass(frozen=True)
class SystemConfig:
    """Physical and protocol constants of one cell-free network.

    Powers are in W, lengths in m, the noise PSD in dBm/Hz. ``pilot_len``,
    ``dl_len``, ``ul_len`` and the two noise variances are derived in
    ``__post_init__`` when left as ``None``: ``tau_p = K/2`` and the rest of
    the coherence block split evenly between DL and UL, noise ``N_o * B``.
    """

    num_ues: int = 8
    num_aps: int = 16
    antennas_per_ap: int = 4
    cluster_size: int = 5
    area_side: float = math.sqrt(0.5e6)
    ap_height: float = 10.0
    ue_height: float = 1.65
    carrier_frequency: float = 3.5e9
    bandwidth: float = 20e6
    noise_psd: float = -174.0
    ap_power_budget: float = float(dbm_to_watt(23.0))
    ue_power_budget: float = float(dbm_to_watt(20.0))
    pilot_power: float = float(dbm_to_watt(20.0))
    coherence_len: int = 200
    pilot_len: int | None = None
    dl_len: int | None = None
    ul_len: int | None = None
    noise_var_ue: float | None = None
    noise_var_ap: float | None = None
    ipd_limit: float = 10.0
    # (b [1/kg], E [W/kg]) per body part
    sar_limits: tuple[tuple[float, float], ...] = ((8.0, 0.08),)
    min_ue_ap_distance: float = 10.0
    shadowing_std: float = 4.0
    plos_cap: float = 0.99

    def __post_init__(self):
        set_ = object.__setattr__
        if self.pilot_len is None:
            set_(self, "pilot_len", max(1, self.num_ues // 2))
        data_len = (self.coherence_len - self.pilot_len) // 2
        if self.dl_len is None:
            set_(self, "dl_len", data_len)
        if self.ul_len is None:
            set_(self, "ul_len", data_len)
        noise = float(dbm_to_watt(self.noise_psd)) * self.bandwidth
        if self.noise_var_ue is None:
            set_(self, "noise_var_ue", noise)
        if self.noise_var_ap is None:
            set_(self, "noise_var_ap", noise)
        set_(self, "sar_limits", tuple((float(b), float(e)) for b, e in self.sar_limits))
        self.validate()

    def validate(self):
        if min(self.num_ues, self.num_aps, self.antennas_per_ap, self.cluster_size) < 1:
            raise ValueError("counts K, M, L, N must be >= 1")
        if self.cluster_size > self.num_aps:
            raise ValueError("cluster_size N cannot exceed num_aps M")
        if self.pilot_len < 1:
            raise ValueError("pilot_len must be >= 1")
        if self.pilot_len + self.dl_len + self.ul_len > self.coherence_len:
            raise ValueError("tau_p + tau_d + tau_u exceeds tau_c")
        positive = ("area_side", "carrier_frequency", "bandwidth", "ap_power_budget",
                    "ue_power_budget", "pilot_power", "noise_var_ue", "noise_var_ap",
                    "ipd_limit", "min_ue_ap_distance")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.shadowing_std < 0:
            raise ValueError("shadowing_std must be non-negative")
        if not 0.0 < self.plos_cap < 1.0:
            raise ValueError("plos_cap must lie in (0, 1)")
        if not self.sar_limits:
            raise ValueError("at least one SAR body part is required")
        for b, e in self.sar_limits:
            if not (b > 0 and e > 0):
                raise ValueError("SAR coefficients and limits must be positive")

    @property
    def wavelength(self):
        return SPEED_OF_LIGHT / self.carrier_frequency

    @property
    def dl_prelog(self):
        return self.dl_len / self.coherence_len

    @property
    def ul_prelog(self):
        return self.ul_len / self.coherence_len

    @property
    def ue_power_cap(self):
        """Largest UE power that satisfies both the budget and every SAR limit."""
        return min(self.ue_power_budget, min(e / b for b, e in self.sar_limits))

    def replace(self, **changes) -> "SystemConfig":
        data = self.to_dict()
        # derived quantities are recomputed unless explicitly overridden
        if {"num_ues", "coherence_len"} & changes.keys():
            for key in ("pilot_len", "dl_len", "ul_len"):
                data[key] = None
        if {"noise_psd", "bandwidth"} & changes.keys():
            data["noise_var_ue"] = data["noise_var_ap"] = None
        data.update(changes)
        return SystemConfig(**data)

    def to_dict(self):
        data = asdict(self)
        data["sar_limits"] = [list(pair) for pair in self.sar_limits]
        return data

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


@dataclass
class Deployment:
    ue_positions: np.ndarray  # (K, 3)
    ap_positions: np.ndarray  # (M, 3)
    ap_orientation: np.ndarray  # (M,)
    association: np.ndarray  # (K, M) bool


@dataclass
class LargeScaleState:
    alpha: np.ndarray  # (K, M) linear gain
    rician: np.ndarray  # (K, M)
    distance: np.ndarray  # (K, M) 3D wrap-around distance
    aoa: np.ndarray  # (K, M) radians w.r.t. array broadside
    phase: np.ndarray  # (K, M) LoS phase offset, used when not redrawn


@dataclass
class ChannelRealization:
    h: np.ndarray  # (K, M, L) complex UL channels
    phase: np.ndarray = field(default=None)


def plos(distance, cap=None):
    """LoS probability of a UE-AP link (3GPP UMi), optionally capped.

    Raises
    ------
    ValueError
        If any distance is not strictly positive.
    """
    zeta = np.asarray(distance, dtype=float)
    if np.any(zeta <= 0):
        raise ValueError("distance must be strictly positive")
    decay = np.exp(-zeta / 36.0)
    p = np.minimum(18.0 / zeta, 1.0) * (1.0 - decay) + decay
    if cap is not None:
        p = np.minimum(p, cap)
    return p


def pathloss_db(distance, carrier_frequency):
    """UMi NLoS path loss in dB for ``distance`` in m and carrier in Hz."""
    f_ghz = carrier_frequency / 1e9
    return 36.7 * np.log10(distance) + 22.7 + 26.0 * math.log10(f_ghz)


def steering_vector(theta, num_antennas):
    """Half-wavelength ULA response; broadcasts over leading axes of ``theta``."""
    if num_antennas < 1:
        raise ValueError("num_antennas must be >= 1")
    theta = np.asarray(theta, dtype=float)
    ell = np.arange(num_antennas)
    return np.exp(1j * np.pi * np.multiply.outer(np.sin(theta), ell))


def wrapped_offsets(ue_xy, ap_xy, side):
    """Signed shortest (toroidal) planar offsets, shape (K, M, 2)."""
    diff = ue_xy[:, None, :] - ap_xy[None, :, :]
    return (diff + side / 2.0) % side - side / 2.0


def associate(alpha, cluster_size):
    """Boolean (K, M) mask selecting the ``cluster_size`` strongest APs per UE.

    Ties go to the lower AP index (stable sort on the negated gains).
    """
    order = np.argsort(-np.asarray(alpha), axis=1, kind="stable")
    mask = np.zeros(np.shape(alpha), dtype=bool)
    np.put_along_axis(mask, order[:, :cluster_size], True, axis=1)
    return mask


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def generate_deployment(cfg: SystemConfig, seed) -> tuple[Deployment, LargeScaleState]:
    """Drop UEs and APs uniformly and compute large-scale fading.

    UEs that land closer than ``cfg.min_ue_ap_distance`` (planar) to any AP
    are redrawn.
    """
    rng = _rng(seed)
    K, M, side = cfg.num_ues, cfg.num_aps, cfg.area_side
    ap_xy = rng.uniform(0.0, side, size=(M, 2))
    ue_xy = np.empty((K, 2))
    for k in range(K):
        for _ in range(10_000):
            candidate = rng.uniform(0.0, side, size=2)
            offs = wrapped_offsets(candidate[None, :], ap_xy, side)[0]
            if np.min(np.hypot(offs[:, 0], offs[:, 1])) >= cfg.min_ue_ap_distance:
                break
        else:
            raise RuntimeError("could not place UE away from all APs; area too small")
        ue_xy[k] = candidate
    orientation = rng.uniform(0.0, 2 * np.pi, size=M)

    offs = wrapped_offsets(ue_xy, ap_xy, side)
    planar = np.hypot(offs[..., 0], offs[..., 1])
    distance = np.hypot(planar, cfg.ap_height - cfg.ue_height)
    azimuth = np.arctan2(offs[..., 1], offs[..., 0])
    aoa = azimuth - orientation[None, :]

    shadow = cfg.shadowing_std * rng.standard_normal((K, M))
    alpha = 10.0 ** (-(pathloss_db(distance, cfg.carrier_frequency) + shadow) / 10.0)
    p = plos(distance, cfg.plos_cap)
    rician = p / (1.0 - p)
    phase = rng.uniform(0.0, 2 * np.pi, size=(K, M))

    deployment = Deployment(
        ue_positions=np.column_stack([ue_xy, np.full(K, cfg.ue_height)]),
        ap_positions=np.column_stack([ap_xy, np.full(M, cfg.ap_height)]),
        ap_orientation=orientation,
        association=associate(alpha, cfg.cluster_size),
    )
    state = LargeScaleState(alpha=alpha, rician=rician, distance=distance, aoa=aoa, phase=phase)
    return deployment, state


def draw_channels(ls: LargeScaleState, cfg: SystemConfig, seed, redraw_phase=True,
                  size=None) -> ChannelRealization:
    """Draw Rician UL channels ``h[k, m]`` of length L.

    Parameters
    ----------
    ls : LargeScaleState
    cfg : SystemConfig
    seed : int or numpy.random.Generator
    redraw_phase : bool
        Draw a fresh LoS phase per coherence block (default). When False the
        phase stored in ``ls`` is kept, which makes the LoS mean deterministic.
    size : int, optional
        Number of independent coherence blocks; adds a leading axis.
    """
    rng = _rng(seed)
    K, M = ls.alpha.shape
    L = cfg.antennas_per_ap
    lead = () if size is None else (size,)
    nlos = (rng.standard_normal(lead + (K, M, L))
            + 1j * rng.standard_normal(lead + (K, M, L))) / np.sqrt(2.0)
    if redraw_phase:
        phase = rng.uniform(0.0, 2 * np.pi, size=lead + (K, M))
    else:
        phase = np.broadcast_to(ls.phase, lead + (K, M))
    v = steering_vector(ls.aoa, L)
    los = np.sqrt(ls.rician)[..., None] * np.exp(1j * phase)[..., None] * v
    h = np.sqrt(ls.alpha / (1.0 + ls.rician))[..., None] * (los + nlos)
    return ChannelRealization(h=h, phase=np.asarray(phase))


def export_deployment_csv(deployment: Deployment, path):
    """Write positions as ``entity,index,x,y,z`` rows."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["entity", "index", "x", "y", "z"])
        for name, pos in (("ue", deployment.ue_positions), ("ap", deployment.ap_positions)):
            for i, (x, y, z) in enumerate(pos):
                writer.writerow([name, i, repr(float(x)), repr(float(y)), repr(float(z))])


def ranked_association(alpha, association) -> np.ndarray:
    """AP indices serving each UE, strongest first; shape (K, N)."""
    masked = np.where(association, alpha, -np.inf)
    order = np.argsort(-masked, axis=1, kind="stable")
    n = int(association.sum(axis=1)[0])
    return order[:, :n]


def sequence_seeds(seed, labels: Sequence[str]):
    """Independent child generators for named pipeline stages."""
    children = np.random.SeedSequence(seed).spawn(len(labels))
    return {label: np.random.default_rng(child) for label, child in zip(labels, children)}
