import json
import math

import numpy as np
import pytest

from oracles import brute_price_path, markov_autocorr_sigma
from otcimpact.domain import REBASE_LEVEL, SynthConfig, Venue, plateau_kernel
from otcimpact.estimators import autocorr, n_eff, response
from otcimpact.ingest import load_tape
from otcimpact.signing import classify_all
from otcimpact.synth import (
    gen_prices,
    gen_signs,
    make_dataset,
    reported_signs,
    write_dataset,
)


def test_gen_signs_iid_when_phi_zero():
    rng = np.random.default_rng(1)
    signs = gen_signs(100_000, 0.0, rng)
    curve = autocorr(signs, 10)
    assert np.max(np.abs(curve.values[1:])) < 0.01


def test_gen_signs_concentration_invariant():
    rng = np.random.default_rng(2)
    phi = 0.7
    n = 100_000
    signs = gen_signs(n, phi, rng)
    curve = autocorr(signs, 20)
    for lag in range(1, 21):
        bound = 3 * markov_autocorr_sigma(phi, lag, n)
        assert abs(curve.value(lag) - phi ** lag) <= bound


def test_gen_signs_neff_two():
    rng = np.random.default_rng(3)
    signs = gen_signs(100_000, 0.5, rng)
    curve = autocorr(signs, 100)
    assert n_eff(curve, 100) == pytest.approx(2.0, abs=0.15)


def test_gen_signs_neff_extreme():
    # phi = 0.93 reproduces the largest effective order count on record (14.2)
    rng = np.random.default_rng(4)
    signs = gen_signs(1_000_000, 0.93, rng)
    curve = autocorr(signs, 300)
    assert 1.0 / (1.0 - 0.93) == pytest.approx(14.2857, abs=1e-3)
    assert n_eff(curve, 300) == pytest.approx(1.0 / 0.07, rel=0.05)


def test_gen_signs_mixture_runs():
    rng = np.random.default_rng(5)
    signs = gen_signs(50_000, 0.2, rng, phi_mix=0.9, phi_mix_weight=0.5)
    curve = autocorr(signs, 30)
    # mixture decays slower than the fast component alone
    assert curve.value(10) > 0.2 ** 10 + 0.01
    assert abs(curve.value(0)) == 1.0


def test_gen_prices_impulse_readout():
    kernel = plateau_kernel(5.0, 10)
    signs = np.zeros(50, dtype=np.int8)
    signs[0] = 1
    rng = np.random.default_rng(6)
    mids = gen_prices(signs, kernel, 0.0, rng)
    G = kernel.cumulative(49)
    assert np.allclose(mids - mids[0], G)


def test_gen_prices_constant_flow_drift():
    kernel = plateau_kernel(5.0, 10)
    signs = np.ones(100, dtype=np.int8)
    rng = np.random.default_rng(7)
    mids = gen_prices(signs, kernel, 0.0, rng)
    increments = np.diff(mids)
    assert np.allclose(increments[10:], kernel.g_inf)  # after warmup: sum of g


def test_gen_prices_double_loop_equivalence():
    rng = np.random.default_rng(8)
    signs = rng.choice([-1, 1], size=1000).astype(np.int8)
    kernel = plateau_kernel(3.0, 7)
    mids = gen_prices(signs, kernel, 0.0, rng)
    expect = brute_price_path(signs, list(kernel.g), level=REBASE_LEVEL)
    assert np.allclose(mids, expect, rtol=1e-12, atol=1e-9)


def test_gen_prices_response_equals_kernel_for_iid_flow():
    rng = np.random.default_rng(9)
    n = 120_000
    signs = rng.choice([-1, 1], size=n).astype(np.int8)
    kernel = plateau_kernel(5.0, 10)
    mids = gen_prices(signs, kernel, 0.0, rng)
    from otcimpact.estimators import response_arrays
    curve = response_arrays(mids, signs.astype(float), 30)
    G = kernel.cumulative(30)
    for lag in (1, 5, 10, 20, 30):
        dm = mids[lag:] - mids[: n - lag]
        sigma = dm.std() * math.sqrt((2 * lag + 1) / (n - lag))
        assert abs(curve.value(lag) - G[lag]) <= 3 * sigma


def test_reported_signs_identity_at_q_one():
    rng = np.random.default_rng(10)
    true = rng.choice([-1, 1], size=1000).astype(np.int8)
    assert np.array_equal(reported_signs(true, 1.0, rng), true)


def test_reported_signs_accuracy():
    rng = np.random.default_rng(11)
    n = 100_000
    true = rng.choice([-1, 1], size=n).astype(np.int8)
    rep = reported_signs(true, 0.72, rng)
    acc = float(np.mean(rep == true))
    assert abs(acc - 0.72) <= 3 * math.sqrt(0.72 * 0.28 / n)


def test_make_dataset_deterministic(tmp_path):
    cfg = SynthConfig(n_trades=2000, phi=0.5, kernel=plateau_kernel(5.0, 10),
                      noise_sd=1.0, q=0.8, half_spread=1.0, seed=99)
    tape1, truth1 = make_dataset(cfg)
    tape2, truth2 = make_dataset(cfg)
    assert np.array_equal(truth1.true_signs, truth2.true_signs)
    assert np.array_equal(truth1.mids, truth2.mids)
    p1 = write_dataset(tape1, truth1, tmp_path / "a")
    p2 = write_dataset(tape2, truth2, tmp_path / "b")
    for key in p1:
        assert p1[key].read_bytes() == p2[key].read_bytes()


def test_make_dataset_round_trips_through_ingest():
    cfg = SynthConfig(n_trades=3000, phi=0.5, kernel=plateau_kernel(5.0, 10),
                      noise_sd=2.0, q=1.0, half_spread=1.0, seed=41)
    tape, truth = make_dataset(cfg)
    signed, report = classify_all(tape)
    assert report.n_signed == cfg.n_trades
    mids = np.array([st.mid_before for st in signed])
    assert np.allclose(mids, truth.mids, rtol=1e-12)


def test_csv_round_trip_preserves_pipeline(tmp_path):
    cfg = SynthConfig(n_trades=3000, phi=0.5, kernel=plateau_kernel(5.0, 10),
                      noise_sd=2.0, q=1.0, half_spread=1.0, seed=42)
    tape, truth = make_dataset(cfg)
    paths = write_dataset(tape, truth, tmp_path)
    loaded, warnings = load_tape(paths["trades"], paths["quotes"])
    assert warnings == ()
    signed, _ = classify_all(loaded)
    mids = np.array([st.mid_before for st in signed])
    # 15 significant digits through the file round trip
    assert np.allclose(mids, truth.mids, rtol=1e-12)
    eps = np.array([st.eps for st in signed])
    assert np.array_equal(eps, truth.true_signs)


def test_ground_truth_json(tmp_path):
    cfg = SynthConfig(n_trades=100, phi=0.25, kernel=plateau_kernel(4.0, 5),
                      noise_sd=0.5, q=0.9, half_spread=0.5, seed=13)
    tape, truth = make_dataset(cfg)
    paths = write_dataset(tape, truth, tmp_path)
    data = json.loads(paths["ground_truth"].read_text())
    assert data["phi"] == 0.25
    assert data["n_eff"] == pytest.approx(1 / 0.75)
    assert data["g_inf"] == pytest.approx(4.0)
    assert data["q"] == 0.9
    assert data["seed"] == 13


def test_table_style_neff_recovery():
    # product-style target: N_eff = 2.3 -> phi = 1 - 1/2.3
    target = 2.3
    cfg = SynthConfig(n_trades=200_000, phi=1 - 1 / target,
                      kernel=plateau_kernel(5.0, 10), noise_sd=2.0,
                      q=1.0, half_spread=1.0, seed=1234)
    tape, truth = make_dataset(cfg)
    signed, _ = classify_all(tape)
    curve = autocorr([st.eps for st in signed], 100)
    assert n_eff(curve, 100) == pytest.approx(target, rel=0.05)


def test_two_category_config_records_venues():
    cfg = SynthConfig(n_trades=5000, phi=0.5, kernel=plateau_kernel(5.0, 10),
                      off_kernel=plateau_kernel(2.5, 10), p_off=0.4,
                      noise_sd=0.0, half_spread=1.0, seed=17)
    tape, truth = make_dataset(cfg)
    venues = np.array([t.venue is Venue.OFF_SEF for t in tape.trades])
    assert np.array_equal(venues, truth.categories == 1)
    frac = venues.mean()
    assert abs(frac - 0.4) <= 3 * math.sqrt(0.4 * 0.6 / 5000)


def test_label_fraction_controls_labels():
    cfg = SynthConfig(n_trades=10_000, phi=0.0, kernel=plateau_kernel(1.0, 2),
                      label_fraction=0.25, seed=23, half_spread=0.5)
    tape, _ = make_dataset(cfg)
    frac = np.mean([t.true_sign is not None for t in tape.trades])
    assert abs(frac - 0.25) <= 3 * math.sqrt(0.25 * 0.75 / 10_000)


def test_trade_noise_drives_misclassification():
    # u-noise channel: flips happen when noise crosses the half spread
    cfg = SynthConfig(n_trades=50_000, phi=0.0, kernel=plateau_kernel(1.0, 2),
                      half_spread=1.0, trade_noise_sd=1.0, seed=29)
    tape, truth = make_dataset(cfg)
    signed, _ = classify_all(tape)
    eps = np.array([st.eps for st in signed])
    acc = float(np.mean(eps == truth.true_signs))
    # P(correct) = Phi(half_spread / u_sd) for Gaussian u-noise
    from math import erf, sqrt
    expect = 0.5 * (1 + erf(1.0 / sqrt(2.0)))
    assert abs(acc - expect) <= 3 * math.sqrt(expect * (1 - expect) / len(eps)) + 2e-3
