import numpy as np
import pytest

from otcimpact.domain import Quote, SynthConfig, Trade, plateau_kernel
from otcimpact.signing import classify_all
from otcimpact.synth import make_dataset


def make_trade(ts, spread=72.5, notional=1e7, product="TEST", **kw):
    return Trade(id=str(ts), ts=ts, product=product, spread=spread,
                 notional=notional, **kw)


def make_quote(ts, spread=70.0, product="TEST"):
    return Quote(ts=ts, product=product, spread=spread)


@pytest.fixture(scope="session")
def oracle_tape():
    """The workhorse tape: phi=0.5, plateau 5 reached at lag 10, noisy mids."""
    cfg = SynthConfig(n_trades=200_000, phi=0.5, kernel=plateau_kernel(5.0, 10),
                      noise_sd=2.0, q=1.0, half_spread=1.0, seed=20160831)
    tape, truth = make_dataset(cfg)
    return tape, truth


@pytest.fixture(scope="session")
def oracle_signed(oracle_tape):
    tape, truth = oracle_tape
    signed, report = classify_all(tape)
    assert report.n_dropped_no_quote == 0
    return signed, truth
