import math

import numpy as np
import pytest

from conftest import make_trade
from oracles import brute_category_response, brute_cross_corr
from otcimpact.domain import SignedTrade, SynthConfig, Venue, plateau_kernel
from otcimpact.errors import EmptyCategoryError
from otcimpact.estimators import autocorr, n_eff, response
from otcimpact.multiprop import (
    CategoryScheme,
    category_autocorr,
    category_bounds,
    category_response,
    cross_corr,
    solve_multi,
    venue_scheme,
)
from otcimpact.propagator import bound_lower, bound_upper, solve_propagator
from otcimpact.signing import classify_all
from otcimpact.synth import make_dataset

# MC-calibrated (12 seeds) sd of the on/off plateau difference for identical
# kernels at n = 2e5, phi = 0.5, noise_sd = 2
PLATEAU_DIFF_SIGMA = 0.045


def _two_cat_tape(off_scale, seed, n=200_000):
    cfg = SynthConfig(n_trades=n, phi=0.5, kernel=plateau_kernel(5.0, 10),
                      off_kernel=plateau_kernel(5.0 * off_scale, 10), p_off=0.5,
                      noise_sd=2.0, q=1.0, half_spread=1.0, seed=seed)
    tape, truth = make_dataset(cfg)
    signed, _ = classify_all(tape)
    return signed, truth


def _single_scheme():
    return CategoryScheme(name="all", categories=("ALL",), assign=lambda t: "ALL")


def _signed_toy(eps, venues, mids=None):
    mids = mids if mids is not None else np.full(len(eps), 1e4)
    out = []
    for i, (e, v) in enumerate(zip(eps, venues)):
        trade = make_trade(i + 1, venue=v)
        out.append(SignedTrade(trade=trade, mid_before=float(mids[i]), eps=int(e)))
    return out


def test_cross_corr_single_category_reduces_to_autocorr():
    rng = np.random.default_rng(81)
    eps = rng.choice([-1, 1], size=5000)
    signed = _signed_toy(eps, [Venue.ON_SEF] * 5000)
    cross = cross_corr(signed, _single_scheme(), 10)
    full = autocorr(eps, 10)
    assert np.allclose(cross.tensor[0, 0], full.values, atol=1e-12)
    assert cross.probs[0] == 1.0


def test_cross_corr_iid_categories_on_iid_signs():
    rng = np.random.default_rng(82)
    n = 100_000
    eps = rng.choice([-1, 1], size=n)
    venues = np.where(rng.random(n) < 0.5, Venue.ON_SEF, Venue.OFF_SEF)
    signed = _signed_toy(eps, venues)
    cross = cross_corr(signed, venue_scheme(), 10)
    sigma = 3.0 / math.sqrt(n)
    assert abs(cross.tensor[0, 0, 0] - 0.5) <= sigma
    assert abs(cross.tensor[1, 1, 0] - 0.5) <= sigma
    assert cross.tensor[0, 1, 0] == 0.0  # one category per trade at lag 0
    assert np.max(np.abs(cross.tensor[:, :, 1:])) <= sigma


def test_partition_identity_exact(oracle_signed):
    signed, _ = oracle_signed
    chunk = signed[:20_000]
    rng = np.random.default_rng(83)
    venues = np.where(rng.random(len(chunk)) < 0.3, Venue.OFF_SEF, Venue.ON_SEF)
    relabeled = [
        SignedTrade(
            trade=make_trade(st.trade.ts, venue=v, product=st.trade.product),
            mid_before=st.mid_before, eps=st.eps, tie=st.tie)
        for st, v in zip(chunk, venues)
    ]
    cross = cross_corr(relabeled, venue_scheme(), 15)
    full = autocorr([st.eps for st in relabeled], 15)
    recombined = cross.tensor.sum(axis=(0, 1))
    assert np.allclose(recombined, full.values, rtol=0, atol=1e-13)


def test_cross_corr_symmetry_invariant():
    rng = np.random.default_rng(84)
    n = 3000
    eps = rng.choice([-1, 1], size=n)
    venues = np.where(rng.random(n) < 0.4, Venue.ON_SEF, Venue.OFF_SEF)
    signed = _signed_toy(eps, venues)
    cross = cross_corr(signed, venue_scheme(), 8)
    for lag in range(1, 9):
        assert cross.at(0, 1, -lag) == cross.at(1, 0, lag)


def test_cross_corr_brute_force():
    rng = np.random.default_rng(85)
    n = 70
    eps = rng.choice([-1, 1], size=n)
    venues = np.where(rng.random(n) < 0.5, Venue.ON_SEF, Venue.OFF_SEF)
    signed = _signed_toy(eps, venues)
    cross = cross_corr(signed, venue_scheme(), 12)
    cats = [("ON_SEF" if v is Venue.ON_SEF else "OFF_SEF") for v in venues]
    expect = brute_cross_corr(eps.astype(float), cats, ("ON_SEF", "OFF_SEF"), 12)
    assert np.allclose(cross.tensor, expect, rtol=1e-10, atol=1e-12)


def test_category_response_single_category_reduces():
    rng = np.random.default_rng(86)
    n = 4000
    eps = rng.choice([-1, 1], size=n)
    mids = 1e4 + np.cumsum(rng.normal(0, 1, size=n))
    signed = _signed_toy(eps, [Venue.ON_SEF] * n, mids)
    per_cat = category_response(signed, _single_scheme(), 12)
    full = response(signed, 12)
    assert np.allclose(per_cat["ALL"].values, full.values, atol=1e-12)


def test_category_response_constant_mid_zero():
    rng = np.random.default_rng(87)
    n = 1000
    eps = rng.choice([-1, 1], size=n)
    venues = np.where(rng.random(n) < 0.5, Venue.ON_SEF, Venue.OFF_SEF)
    signed = _signed_toy(eps, venues)
    per_cat = category_response(signed, venue_scheme(), 8)
    for curve in per_cat.values():
        assert np.allclose(curve.values, 0.0)


def test_category_response_brute_force():
    rng = np.random.default_rng(88)
    n = 60
    eps = rng.choice([-1, 1], size=n)
    venues = np.where(rng.random(n) < 0.5, Venue.ON_SEF, Venue.OFF_SEF)
    mids = 1e4 + np.cumsum(rng.normal(0, 2, size=n))
    signed = _signed_toy(eps, venues, mids)
    per_cat = category_response(signed, venue_scheme(), 10)
    cats = [("ON_SEF" if v is Venue.ON_SEF else "OFF_SEF") for v in venues]
    for cat in ("ON_SEF", "OFF_SEF"):
        expect = brute_category_response(mids, eps.astype(float), cats, cat, 10)
        assert np.allclose(per_cat[cat].values, expect, rtol=1e-10, atol=1e-12)


def test_category_response_detects_weaker_kernel():
    signed, truth = _two_cat_tape(off_scale=0.5, seed=1001)
    per_cat = category_response(signed, venue_scheme(), 60)
    r_on = per_cat["ON_SEF"]
    r_off = per_cat["OFF_SEF"]
    # crude 3-sigma on the difference of two conditional means
    n = min(r_on.counts[60], r_off.counts[60])
    mids = np.array([st.mid_before for st in signed])
    dm = mids[60:] - mids[:-60]
    sigma = math.sqrt(2.0 * float(np.mean(dm ** 2)) / n)
    assert r_off.value(60) < r_on.value(60) - 3 * sigma


def test_solve_multi_single_category_equals_single_solve(oracle_signed):
    signed, _ = oracle_signed
    chunk = signed[:30_000]
    relabeled = [SignedTrade(trade=make_trade(st.trade.ts, venue=Venue.ON_SEF),
                             mid_before=st.mid_before, eps=st.eps) for st in chunk]
    scheme = _single_scheme()
    cross = cross_corr(relabeled, scheme, 40)
    responses = category_response(relabeled, scheme, 40)
    multi = solve_multi(cross, responses, 20)
    c = autocorr([st.eps for st in relabeled], 40)
    r = response(relabeled, 40)
    single = solve_propagator(c, r, 20)
    assert np.allclose(multi.increments["ALL"], single.increments, rtol=1e-9, atol=1e-12)
    assert multi.probs[0] == 1.0


def test_solve_multi_identical_kernels_agree():
    signed, truth = _two_cat_tape(off_scale=1.0, seed=1002)
    scheme = venue_scheme()
    cross = cross_corr(signed, scheme, 60)
    responses = category_response(signed, scheme, 60)
    multi = solve_multi(cross, responses, 30)
    p_on = multi.plateau("ON_SEF", 20, 40)
    p_off = multi.plateau("OFF_SEF", 20, 40)
    assert abs(p_on - p_off) <= 3 * PLATEAU_DIFF_SIGMA
    single = solve_propagator(autocorr([st.eps for st in signed], 60),
                              response(signed, 60), 30)
    p_single = single.plateau(20, 40)
    assert p_on == pytest.approx(p_single, rel=0.05)
    assert p_off == pytest.approx(p_single, rel=0.05)


def test_solve_multi_recovers_kernel_ratio():
    signed, truth = _two_cat_tape(off_scale=0.5, seed=1003)
    scheme = venue_scheme()
    cross = cross_corr(signed, scheme, 60)
    responses = category_response(signed, scheme, 60)
    multi = solve_multi(cross, responses, 30)
    p_on = multi.plateau("ON_SEF", 20, 40)
    p_off = multi.plateau("OFF_SEF", 20, 40)
    assert p_off / p_on == pytest.approx(0.5, abs=0.1)
    assert p_off < p_on - 3 * PLATEAU_DIFF_SIGMA


def test_category_bounds_reductions():
    values = np.concatenate([[0.0], np.linspace(1, 12, 30)])
    curve_on = __import__("otcimpact.domain", fromlist=["LagCurve"]).LagCurve(
        kind=__import__("otcimpact.domain", fromlist=["CurveKind"]).CurveKind.RESPONSE,
        values=values, counts=np.full(31, 10))
    bounds = category_bounds({"ON_SEF": curve_on}, {"ON_SEF": 1.0}, 30)
    lo, up = bounds["ON_SEF"]
    assert lo == up == curve_on.value(30)
    bounds = category_bounds({"ON_SEF": curve_on}, {"ON_SEF": 2.5}, 30)
    assert bounds["ON_SEF"] == (bound_lower(curve_on.value(30), 2.5),
                                bound_upper(curve_on.value(30), 2.5))


def test_category_bounds_contain_plateau_on_synthetic():
    signed, truth = _two_cat_tape(off_scale=0.5, seed=1004)
    scheme = venue_scheme()
    lag = 50
    cross = cross_corr(signed, scheme, 60)
    responses = category_response(signed, scheme, 60)
    autocorrs = category_autocorr(signed, scheme, 60)
    multi = solve_multi(cross, responses, 30)
    neffs = {cat: n_eff(autocorrs[cat], 60) for cat in scheme.categories}
    bounds = category_bounds(responses, neffs, lag)
    mids = np.array([st.mid_before for st in signed])
    dm = mids[lag:] - mids[:-lag]
    for cat in scheme.categories:
        sigma_r = math.sqrt(float(np.mean(dm ** 2)) * (2 * lag + 1)
                            / responses[cat].counts[lag])
        slack = 3 * sigma_r / neffs[cat]
        g_at = multi.cumulative[cat].value(lag)
        lo, up = bounds[cat]
        assert lo - slack <= g_at <= up + slack


def test_empty_category_raises():
    rng = np.random.default_rng(89)
    eps = rng.choice([-1, 1], size=100)
    signed = _signed_toy(eps, [Venue.ON_SEF] * 100)
    with pytest.raises(EmptyCategoryError):
        cross_corr(signed, venue_scheme(), 5)


def test_unknown_category_assignment_raises():
    scheme = CategoryScheme(name="broken", categories=("A",), assign=lambda t: "B")
    signed = _signed_toy([1, -1, 1, -1], [Venue.ON_SEF] * 4)
    with pytest.raises(EmptyCategoryError):
        cross_corr(signed, scheme, 1)


def test_unknown_venue_maps_to_on_sef():
    scheme = venue_scheme()
    trade = make_trade(1, venue=Venue.UNKNOWN)
    assert scheme.categories[scheme.index_of(trade)] == "ON_SEF"
