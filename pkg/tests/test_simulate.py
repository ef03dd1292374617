"""Synthetic data generator: risk surfaces, censoring control, and the
exponential event-time mechanism."""

import json

import numpy as np
import pytest

from relusurv.simulate import (SimConfig, risk_gaussian, risk_linear,
                               sample_event_times, simulate,
                               write_sim_metadata)


def test_risk_linear_values():
    np.testing.assert_allclose(risk_linear([[0.0, 0.0, 9.0]]), [0.0])
    np.testing.assert_allclose(risk_linear([[1.0, 0.5]]), [2.0])
    np.testing.assert_allclose(risk_linear([[-1.0, 1.0]]), [1.0])


def test_risk_gaussian_values():
    # peak log(r_max) at the origin, radially symmetric decay
    np.testing.assert_allclose(risk_gaussian([[0.0, 0.0]]), [np.log(5.0)])
    expected = np.log(5.0) * np.exp(-0.25 / 0.5)
    np.testing.assert_allclose(risk_gaussian([[0.5, 0.0]]), [expected])
    a = risk_gaussian([[0.3, -0.4]])
    b = risk_gaussian([[-0.4, 0.3]])
    np.testing.assert_allclose(a, b)
    assert risk_gaussian([[0.0, 0.0]], r_max=9.0)[0] == pytest.approx(np.log(9.0))


def test_simulate_deterministic():
    cfg = SimConfig(n=200, risk="gaussian", seed=11)
    a = simulate(cfg)
    b = simulate(cfg)
    np.testing.assert_array_equal(a.X, b.X)
    np.testing.assert_array_equal(a.time, b.time)
    np.testing.assert_array_equal(a.event, b.event)
    c = simulate(SimConfig(n=200, risk="gaussian", seed=12))
    assert not np.array_equal(a.time, c.time)


def test_simulate_covariate_marginals():
    ds = simulate(SimConfig(n=4000, seed=1))
    assert ds.d == 10
    assert ds.feature_names == ["x%d" % i for i in range(10)]
    assert ds.X.min() >= -1.0
    assert ds.X.max() < 1.0
    assert abs(ds.X.mean()) < 0.05


def test_simulate_event_fraction_matches_config():
    for cf in (0.2, 0.5):
        ds = simulate(SimConfig(n=10000, censoring_fraction=cf, seed=3))
        target = round((1.0 - cf) * 10000)
        assert abs(int(ds.event.sum()) - target) <= 1
    full = simulate(SimConfig(n=500, censoring_fraction=0.0, seed=4))
    assert full.event.all()


def test_simulate_censored_times_clipped_at_cutoff():
    ds = simulate(SimConfig(n=2000, censoring_fraction=0.4, seed=5))
    cutoff = ds.time[~ds.event].min()
    assert np.all(ds.time[~ds.event] == ds.time[~ds.event][0])  # end of study
    assert np.all(ds.time[ds.event] <= cutoff)


def test_higher_risk_means_earlier_death():
    # Kendall tau between the true log-risk and uncensored death times
    cfg = SimConfig(n=4000, risk="linear", censoring_fraction=0.0, seed=6)
    ds = simulate(cfg)
    h = risk_linear(ds.X)
    t = ds.time
    n = len(t)
    rng = np.random.default_rng(0)
    i = rng.integers(0, n, size=200000)
    j = rng.integers(0, n, size=200000)
    keep = (h[i] != h[j]) & (t[i] != t[j])
    conc = np.sign(h[i] - h[j]) == -np.sign(t[i] - t[j])
    tau = 2.0 * conc[keep].mean() - 1.0
    assert tau > 0.3


def test_event_time_mechanism_is_exponential():
    # constant risk h: T should be Exp(rate = scale * e^h); KS check
    rng = np.random.default_rng(7)
    h = np.full(2000, 0.7)
    scale = 0.33
    t = sample_event_times(h, scale, rng)
    rate = scale * np.exp(0.7)
    grid = np.sort(t)
    empirical = np.arange(1, 2001) / 2000.0
    theoretical = 1.0 - np.exp(-rate * grid)
    ks = np.max(np.abs(empirical - theoretical))
    assert ks < 0.05
    assert t.min() > 0


def test_rate_scales_with_risk():
    rng = np.random.default_rng(8)
    lo = sample_event_times(np.zeros(5000), 0.2, np.random.default_rng(8))
    hi = sample_event_times(np.full(5000, 2.0), 0.2, np.random.default_rng(8))
    # identical uniforms, so the ratio is exactly exp(2) pointwise
    np.testing.assert_allclose(lo / hi, np.e**2, rtol=1e-12)


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(n=0)
    with pytest.raises(ValueError):
        SimConfig(n=10, d=1)
    with pytest.raises(ValueError):
        SimConfig(n=10, risk="cubic")
    with pytest.raises(ValueError):
        SimConfig(n=10, censoring_fraction=1.0)
    with pytest.raises(ValueError):
        SimConfig(n=10, r_max=0.0)
    with pytest.raises(ValueError):
        SimConfig(n=10, baseline_scale=-0.1)


def test_config_roundtrip():
    cfg = SimConfig(n=50, risk="gaussian", r_max=7.0, seed=3)
    back = SimConfig.from_json_dict(cfg.to_json_dict())
    assert back == cfg


def test_metadata_sidecar(tmp_path):
    cfg = SimConfig(n=25, seed=2)
    meta = write_sim_metadata(cfg, tmp_path / "sim.csv")
    assert meta.endswith("sim.meta.json")
    with open(meta) as fh:
        d = json.load(fh)
    assert d["n"] == 25
    assert d["risk"] == "linear"
    assert SimConfig.from_json_dict(d) == cfg
