import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfemf.scenario import (LargeScaleState, SystemConfig, associate, dbm_to_watt, draw_channels,
                            export_deployment_csv, generate_deployment, pathloss_db, plos,
                            ranked_association, steering_vector, watt_to_dbm, wrapped_offsets)


def test_default_config_matches_study_constants(default_cfg):
    c = default_cfg
    assert (c.num_ues, c.num_aps, c.antennas_per_ap, c.cluster_size) == (8, 16, 4, 5)
    assert c.pilot_len == 4 and c.dl_len == 98 and c.ul_len == 98
    assert c.pilot_len + c.dl_len + c.ul_len <= c.coherence_len
    noise = dbm_to_watt(-174.0) * 20e6
    assert c.noise_var_ue == pytest.approx(noise, rel=1e-12)
    assert c.noise_var_ap == c.noise_var_ue
    assert c.area_side ** 2 == pytest.approx(0.5e6)
    assert watt_to_dbm(c.ap_power_budget) == pytest.approx(23.0)
    assert c.ue_power_cap == pytest.approx(0.01)


@pytest.mark.parametrize("changes", [
    {"cluster_size": 20},
    {"num_ues": 0},
    {"plos_cap": 1.0},
    {"ipd_limit": 0.0},
    {"pilot_len": 100, "dl_len": 60, "ul_len": 60},
    {"sar_limits": ((8.0, -1.0),)},
])
def test_invalid_config_rejected(changes):
    with pytest.raises(ValueError):
        SystemConfig(**changes)


def test_replace_recomputes_derived_lengths(default_cfg):
    c = default_cfg.replace(num_ues=4)
    assert c.pilot_len == 2 and c.dl_len == 99


def test_association_argmax():
    assoc = associate(np.array([[0.1, 0.2]]), 1)
    assert assoc.tolist() == [[False, True]]


def test_association_ties_go_to_lower_index():
    assoc = associate(np.array([[0.5, 0.5, 0.5]]), 2)
    assert assoc.tolist() == [[True, True, False]]


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 6))
def test_association_invariant_under_monotone_transform(seed, n):
    alpha = np.random.default_rng(seed).uniform(1e-12, 1e-6, size=(5, 6))
    base = associate(alpha, n)
    assert np.all(base.sum(axis=1) == n)
    assert np.array_equal(base, associate(np.log(alpha), n))
    assert np.array_equal(base, associate((alpha * 1e6) ** 3 + 7.0, n))


def test_pathloss_at_100m():
    # 36.7*2 + 22.7 + 26*log10(3.5) evaluated in arbitrary precision
    assert pathloss_db(100.0, 3.5e9) == pytest.approx(110.245769153107, abs=1e-9)


def test_plos_values():
    assert plos(10.0) == pytest.approx(1.0)
    assert plos(10.0, cap=0.99) == pytest.approx(0.99)
    assert plos(36.0) == pytest.approx(0.683939720585721, abs=1e-12)
    assert plos(1e6) < 1e-4
    with pytest.raises(ValueError):
        plos(0.0)
    with pytest.raises(ValueError):
        plos(-3.0)


def test_rician_factor_from_half_probability():
    p = 0.5
    assert p / (1 - p) == 1.0


def test_steering_vector():
    assert np.allclose(steering_vector(0.0, 4), np.ones(4))
    assert np.allclose(steering_vector(np.pi / 2, 2), [1, -1])
    thetas = np.random.default_rng(0).uniform(-np.pi, np.pi, 20)
    v = steering_vector(thetas, 5)
    assert np.allclose(np.sum(np.abs(v) ** 2, axis=-1), 5.0)
    with pytest.raises(ValueError):
        steering_vector(0.0, 0)


def test_wrapped_offsets_bounded_and_symmetric():
    rng = np.random.default_rng(1)
    side = 100.0
    a, b = rng.uniform(0, side, (7, 2)), rng.uniform(0, side, (5, 2))
    off = wrapped_offsets(a, b, side)
    assert np.all(np.abs(off) <= side / 2 + 1e-12)
    back = wrapped_offsets(b, a, side)
    assert np.allclose(np.linalg.norm(off, axis=-1), np.linalg.norm(back, axis=-1).T)


def test_deployment_invariants(default_cfg):
    dep, ls = generate_deployment(default_cfg, 5)
    K, M = default_cfg.num_ues, default_cfg.num_aps
    assert dep.association.shape == (K, M)
    assert np.all(dep.association.sum(axis=1) == default_cfg.cluster_size)
    assert np.array_equal(dep.association, associate(ls.alpha, default_cfg.cluster_size))
    for pos in (dep.ue_positions, dep.ap_positions):
        assert np.all(pos[:, :2] >= 0) and np.all(pos[:, :2] < default_cfg.area_side)
    assert np.allclose(dep.ue_positions[:, 2], default_cfg.ue_height)
    assert np.allclose(dep.ap_positions[:, 2], default_cfg.ap_height)
    assert np.all(ls.alpha > 0)
    cap = default_cfg.plos_cap
    assert np.all(ls.rician >= 0) and np.all(ls.rician <= cap / (1 - cap) + 1e-9)
    assert np.all(ls.distance >= default_cfg.min_ue_ap_distance)


def test_deployment_reproducible(default_cfg):
    d1, l1 = generate_deployment(default_cfg, 42)
    d2, l2 = generate_deployment(default_cfg, 42)
    assert np.array_equal(d1.ue_positions, d2.ue_positions)
    assert np.array_equal(l1.alpha, l2.alpha)
    h1 = draw_channels(l1, default_cfg, 3).h
    h2 = draw_channels(l2, default_cfg, 3).h
    assert np.array_equal(h1, h2)


def _single_link(alpha, beta, aoa=0.3, phase=0.7):
    one = np.ones((1, 1))
    return LargeScaleState(alpha=alpha * one, rician=beta * one, distance=50 * one,
                           aoa=aoa * one, phase=phase * one)


def test_rayleigh_when_no_los():
    cfg = SystemConfig(num_ues=1, num_aps=1, antennas_per_ap=3, cluster_size=1)
    ls = _single_link(2.0, 0.0)
    h = draw_channels(ls, cfg, 9).h
    rng = np.random.default_rng(9)
    nlos = (rng.standard_normal((1, 1, 3)) + 1j * rng.standard_normal((1, 1, 3))) / np.sqrt(2)
    assert np.allclose(h, np.sqrt(2.0) * nlos)


def test_los_limit_norm_is_deterministic():
    cfg = SystemConfig(num_ues=1, num_aps=1, antennas_per_ap=4, cluster_size=1)
    ls = _single_link(1.5, 1e12)
    h = draw_channels(ls, cfg, 0, size=50).h
    assert np.allclose(np.sum(np.abs(h) ** 2, axis=-1), 1.5 * 4, rtol=1e-4)


def test_channel_power_and_mean(default_cfg):
    _, ls = generate_deployment(default_cfg, 11)
    n = 10_000
    h = draw_channels(ls, default_cfg, 12, redraw_phase=False, size=n).h
    L = default_cfg.antennas_per_ap
    ratio = np.mean(np.sum(np.abs(h) ** 2, axis=-1), axis=0) / (ls.alpha * L)
    assert np.all((ratio > 0.97) & (ratio < 1.03))
    # empirical mean vs the LoS component, per real/imag component
    mean = h.mean(axis=0)
    beta = ls.rician
    expected = (np.sqrt(ls.alpha * beta / (1 + beta)) * np.exp(1j * ls.phase))[..., None] \
        * steering_vector(ls.aoa, L)
    se = np.sqrt(ls.alpha / (1 + beta) / 2 / n)[..., None]
    assert np.all(np.abs(mean.real - expected.real) < 4 * se)
    assert np.all(np.abs(mean.imag - expected.imag) < 4 * se)


def test_ranked_association_orders_by_gain():
    alpha = np.array([[0.3, 0.9, 0.1, 0.5]])
    assoc = associate(alpha, 3)
    assert ranked_association(alpha, assoc).tolist() == [[1, 3, 0]]


def test_export_deployment_csv(tmp_path, small_cfg):
    dep, _ = generate_deployment(small_cfg, 0)
    path = tmp_path / "dep.csv"
    export_deployment_csv(dep, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "entity,index,x,y,z"
    assert len(lines) == 1 + small_cfg.num_ues + small_cfg.num_aps
    assert math.isclose(float(lines[1].split(",")[2]), dep.ue_positions[0, 0])
