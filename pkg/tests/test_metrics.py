import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfemf.metrics import (EffectiveGains, PowerAllocationDL, PowerAllocationUL, dl_sinr,
                           dl_violations, ipd, rate_report, rates, sar, ul_sinr, ul_violations)
from cfemf.scenario import SystemConfig


def _gains(dl, ul=None, ul_noise=None, assoc=None, noise=1.0):
    dl = np.asarray(dl, dtype=complex)
    K, _, M = dl.shape
    return EffectiveGains(
        dl=dl, ul=np.eye(K, dtype=complex) if ul is None else np.asarray(ul, dtype=complex),
        ul_noise=np.ones(K) if ul_noise is None else np.asarray(ul_noise, float),
        association=np.ones((K, M), bool) if assoc is None else assoc,
        noise_var_ue=np.full(K, noise))


def test_single_link_dl_sinr():
    g = _gains([[[2.0 + 1.0j]]], noise=0.5)
    sinr = dl_sinr(PowerAllocationDL(p=np.array([[3.0]])), g)
    assert sinr == pytest.approx([3.0 * 5.0 / 0.5])


def test_two_ue_dl_sinr_by_hand():
    # dl[k, j, m]: gain to UE k from stream j through AP m, single AP
    dl = np.array([[[1.0], [0.5]], [[0.2], [2.0]]])
    g = _gains(dl, noise=0.1)
    p = np.array([[1.0], [4.0]])
    sinr = dl_sinr(PowerAllocationDL(p=p), g)
    assert sinr[0] == pytest.approx(1.0 / (0.25 * 4.0 + 0.1))
    assert sinr[1] == pytest.approx(16.0 / (0.04 * 1.0 + 0.1))


def test_coherent_combining_across_aps():
    dl = np.array([[[1.0, 1.0]]])
    g = _gains(dl, noise=1.0)
    sinr = dl_sinr(PowerAllocationDL(p=np.array([[1.0, 1.0]])), g)
    assert sinr == pytest.approx([4.0])


def test_ul_sinr_by_hand():
    ul = np.array([[1.0, 0.5j], [0.1, 2.0]])
    g = _gains(np.zeros((2, 2, 1)), ul=ul, ul_noise=[0.2, 0.3])
    sinr = ul_sinr(PowerAllocationUL(q=np.array([2.0, 1.0])), g)
    assert sinr[0] == pytest.approx(2.0 / (0.25 + 0.2))
    assert sinr[1] == pytest.approx(4.0 / (0.02 + 0.3))


def test_ipd_coefficient():
    cfg = SystemConfig()
    g = _gains([[[1.0]]])
    value = ipd(PowerAllocationDL(p=np.array([[1.0]])), g, cfg)
    # 4 pi / lambda^2 with lambda = c / 3.5 GHz, in arbitrary precision
    assert value == pytest.approx([1712.79168863602], rel=1e-12)


def test_sar_and_rates():
    cfg = SystemConfig(sar_limits=((8.0, 0.08), (2.0, 0.5)))
    s = sar(PowerAllocationUL(q=np.array([0.01, 0.02])), cfg)
    assert np.allclose(s, [[0.08, 0.02], [0.16, 0.04]])
    r = rates(np.array([1.0, 3.0]), cfg, "dl")
    assert np.allclose(r, cfg.dl_len / cfg.coherence_len * 20e6 * np.array([1.0, 2.0]))
    rep = rate_report(np.array([1.0, 3.0]), cfg, "ul")
    assert rep.min_rate == pytest.approx(rep.rate[0])
    assert cfg.ue_power_cap == pytest.approx(0.01)


def test_violation_counts():
    cfg = SystemConfig(num_ues=1, num_aps=2, antennas_per_ap=1, cluster_size=2)
    g = _gains(np.array([[[1e-3, 1e-3]]]))
    P = cfg.ap_power_budget
    ok = dl_violations(PowerAllocationDL(p=np.array([[P, P * (1 + 1e-7)]])), g, cfg)
    assert ok == {"power": 0, "ipd": 0, "negative": 0}
    bad = dl_violations(PowerAllocationDL(p=np.array([[P * 1.01, 0.0]])), g, cfg)
    assert bad["power"] == 1
    loud = _gains(np.array([[[1.0, 1.0]]]))
    assert dl_violations(PowerAllocationDL(p=np.array([[P, P]])), loud, cfg)["ipd"] == 1
    ul = ul_violations(PowerAllocationUL(q=np.array([0.02])), cfg)
    assert ul == {"power": 0, "sar": 1, "negative": 0}


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0.1, 10.0))
def test_sinr_scale_invariance_without_noise(seed, c):
    rng = np.random.default_rng(seed)
    dl = rng.standard_normal((3, 3, 4)) + 1j * rng.standard_normal((3, 3, 4))
    g = _gains(dl, noise=1e-300)
    p = rng.uniform(0.1, 1.0, (3, 4))
    a = dl_sinr(PowerAllocationDL(p=p), g)
    b = dl_sinr(PowerAllocationDL(p=c * p), g)
    assert np.allclose(a, b, rtol=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_sinr_monotone_in_own_power(seed):
    rng = np.random.default_rng(seed)
    ul = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    g = _gains(np.zeros((3, 3, 1)), ul=ul, ul_noise=rng.uniform(0.1, 1, 3))
    q = rng.uniform(0.1, 1.0, 3)
    base = ul_sinr(PowerAllocationUL(q=q), g)
    q2 = q.copy()
    q2[0] *= 2
    more = ul_sinr(PowerAllocationUL(q=q2), g)
    assert more[0] > base[0]
    assert np.all(more[1:] <= base[1:] + 1e-15)
    assert math.isfinite(float(more.sum()))
