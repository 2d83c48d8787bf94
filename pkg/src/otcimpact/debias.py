"""Corrections for sign-misclassification bias using a labeled trade subset.

With detected signs eps = eps_true * (2q - 1) (q the per-trade indicator of
correct classification, flips independent of the sign process):

* the response with detected signs shrinks by one factor (2<q> - 1),
* the detected-sign autocorrelation tail shrinks by (2<q> - 1)^2, and
* the mixed product <eps_true_t * eps_{t+l}> shrinks by a single factor,
  which is what makes a labeled subset enough to rebuild the true curve.

All corrections divide by (2 q_hat - 1), which is singular at q_hat = 0.5
(signs carry no information); callers must pass one coherent q_hat estimate
so the corrected curves stay mutually consistent.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .domain import CurveKind, FitForm, LagCurve, SignedTrade
from .errors import NoLabelsError, QTooLowError, TooShortError
from .fitting import eval_fit, fit_stretched
from .propagator import KernelSolution, solve_propagator


def _correction(q_hat: float) -> float:
    if q_hat <= 0.5:
        raise QTooLowError("correction is singular at q_hat <= 0.5", q_hat=q_hat)
    return 2.0 * q_hat - 1.0


def debias_autocorr(signed: Sequence[SignedTrade], q_hat: float, max_lag: int) -> LagCurve:
    """True-sign autocorrelation from labeled trades.

    value(l >= 1) = <eps_true_t * eps_{t+l}>_{t labeled} / (2 q_hat - 1);
    value(0) is pinned to 1 (true signs are +-1).
    """
    corr = _correction(q_hat)
    eps = np.array([st.eps for st in signed], dtype=np.float64)
    labels = np.array([0 if st.trade.true_sign is None else st.trade.true_sign
                       for st in signed], dtype=np.float64)
    labeled = labels != 0
    n = len(eps)
    if n <= max_lag:
        raise TooShortError("need more trades than lags", n=n, max_lag=max_lag)
    if not labeled.any():
        raise NoLabelsError("no trades carry a true_sign label")
    values = np.zeros(max_lag + 1)
    counts = np.zeros(max_lag + 1, dtype=np.int64)
    values[0] = 1.0
    counts[0] = int(labeled.sum())
    for lag in range(1, max_lag + 1):
        first = labeled[: n - lag]
        cnt = int(first.sum())
        if cnt == 0:
            raise NoLabelsError("no labeled pairs at lag", lag=lag)
        prod = labels[: n - lag][first] * eps[lag:][first]
        values[lag] = float(prod.sum()) / cnt / corr
        counts[lag] = cnt
    # the corrected tail is an estimate and may exceed 1 in noise; clip so the
    # curve remains a valid autocorrelation for downstream solvers
    np.clip(values, -1.0, 1.0, out=values)
    return LagCurve(kind=CurveKind.AUTOCORR, values=values, counts=counts)


def debias_response(r: LagCurve, q_hat: float) -> LagCurve:
    """Rescale a detected-sign response to its true-sign level."""
    corr = _correction(q_hat)
    return LagCurve(kind=r.kind, values=r.values / corr, counts=r.counts)


def debias_propagator(
    c_corr: LagCurve,
    r_corr: LagCurve,
    fit_first: bool = True,
    truncation: Optional[int] = None,
) -> KernelSolution:
    """Solve for the propagator from corrected curves.

    With ``fit_first`` (default) both curves are replaced by their
    stretched-exponential fits before the solve, which suppresses the noise
    the labeled-subset correction amplifies; the autocorrelation keeps its
    exact lag-0 value of 1. Raw mode feeds the corrected curves straight in.
    """
    if fit_first:
        c_fit = fit_stretched(c_corr, FitForm.DECAY, min_lag=1)
        r_fit = fit_stretched(r_corr, FitForm.SATURATING, min_lag=1)
        lags_c = np.arange(c_corr.max_lag + 1)
        c_values = eval_fit(c_fit, lags_c)
        c_values[0] = 1.0
        c_values = np.clip(c_values, -1.0, 1.0)
        c_in = LagCurve(kind=CurveKind.AUTOCORR, values=c_values, counts=c_corr.counts)
        lags_r = np.arange(r_corr.max_lag + 1)
        r_in = LagCurve(kind=CurveKind.RESPONSE, values=eval_fit(r_fit, lags_r),
                        counts=r_corr.counts)
    else:
        c_in, r_in = c_corr, r_corr
    return solve_propagator(c_in, r_in, truncation)
