"""Small hand-built instances shared by the optimizer and acceptance tests."""

import numpy as np

from cfemf.metrics import EffectiveGains
from cfemf.scenario import SystemConfig


def gains_from_dl(dl, noise, assoc=None):
    dl = np.asarray(dl, dtype=complex)
    K, _, M = dl.shape
    assoc = np.ones((K, M), dtype=bool) if assoc is None else assoc
    return EffectiveGains(dl=dl * assoc[None, :, :], ul=np.eye(K, dtype=complex),
                          ul_noise=np.ones(K), association=assoc,
                          noise_var_ue=np.full(K, float(noise)))


def symmetric_two_ue(seed):
    """One single-antenna AP serving two UEs with mirrored gains.

    Returns ``(cfg, gains, sinr_opt)``; the max-min optimum splits the budget
    evenly, so ``sinr_opt = (P/2)|c|^2 / ((P/2)|e|^2 + sigma^2)``.
    """
    rng = np.random.default_rng(seed)
    cfg = SystemConfig(num_ues=2, num_aps=1, antennas_per_ap=1, cluster_size=1)
    c2 = 10 ** rng.uniform(-11, -9)
    e2 = c2 * 10 ** rng.uniform(-2, -0.5)
    ph = rng.uniform(0, 2 * np.pi, 4)
    c, e = np.sqrt(c2), np.sqrt(e2)
    dl = np.zeros((2, 2, 1), dtype=complex)
    dl[0, 0, 0], dl[1, 1, 0] = c * np.exp(1j * ph[0]), c * np.exp(1j * ph[1])
    dl[0, 1, 0], dl[1, 0, 0] = e * np.exp(1j * ph[2]), e * np.exp(1j * ph[3])
    sigma2 = cfg.noise_var_ue
    half = cfg.ap_power_budget / 2
    return cfg, gains_from_dl(dl, sigma2), half * c2 / (half * e2 + sigma2)


def single_ue(seed, num_aps=3):
    """One UE served coherently by ``num_aps`` APs; full power is optimal.

    The direct gains are real and positive, as conjugate precoding with
    perfect CSI makes them, so the closed form is ``P (sum_m |c_m|)^2 / sigma^2``.
    """
    rng = np.random.default_rng(seed)
    cfg = SystemConfig(num_ues=1, num_aps=num_aps, antennas_per_ap=1, cluster_size=num_aps,
                       pilot_len=1)
    mag = np.sqrt(10 ** rng.uniform(-12, -10, num_aps))
    dl = mag[None, None, :].astype(complex)
    sigma2 = cfg.noise_var_ue
    sinr = cfg.ap_power_budget * np.sum(mag) ** 2 / sigma2
    return cfg, gains_from_dl(dl, sigma2), sinr


def ul_two_ue(seed):
    """Random 2-UE uplink gains with per-UE noise."""
    rng = np.random.default_rng(seed)
    cfg = SystemConfig(num_ues=2, num_aps=2, antennas_per_ap=1, cluster_size=1)
    direct = np.sqrt(10 ** rng.uniform(-11, -9, 2))
    cross = direct[::-1] * np.sqrt(10 ** rng.uniform(-3, -0.5, 2))
    ul = np.array([[direct[0], cross[0]], [cross[1], direct[1]]], dtype=complex)
    ul *= np.exp(1j * rng.uniform(0, 2 * np.pi, (2, 2)))
    g = EffectiveGains(dl=np.zeros((2, 2, 2), dtype=complex), ul=ul,
                       ul_noise=np.full(2, cfg.noise_var_ap),
                       association=np.eye(2, dtype=bool), noise_var_ue=np.full(2, 1.0))
    return cfg, g


def ul_grid_optimum(cfg, gains, n=200):
    """Brute-force max-min UL rate over an ``n x n`` power grid.

    Returns the best grid rate and the largest rate change between adjacent
    grid points next to the argmax (the grid's rate resolution there).
    """
    q = np.linspace(0.0, cfg.ue_power_cap, n)
    q1, q2 = np.meshgrid(q, q, indexing="ij")
    mag = np.abs(gains.ul) ** 2
    s1 = mag[0, 0] * q1 / (mag[0, 1] * q2 + gains.ul_noise[0])
    s2 = mag[1, 1] * q2 / (mag[1, 0] * q1 + gains.ul_noise[1])
    r = cfg.ul_prelog * cfg.bandwidth * np.log2(1 + np.minimum(s1, s2))
    i, j = np.unravel_index(np.argmax(r), r.shape)
    lo_i, hi_i, lo_j, hi_j = max(i - 1, 0), min(i + 2, n), max(j - 1, 0), min(j + 2, n)
    block = r[lo_i:hi_i, lo_j:hi_j]
    resolution = max(np.max(np.abs(np.diff(block, axis=0)), initial=0.0),
                     np.max(np.abs(np.diff(block, axis=1)), initial=0.0))
    return float(r[i, j]), float(resolution)
