"""Stretched-exponential fits for lag curves.

Forms (the amplitude enters linearly, so it is solved in closed form inside
the objective and the search runs over (b, nu) only):

    DECAY       f(l) = a * exp(-(b*l)^nu)      for autocorrelations
    SATURATING  f(l) = a * (1 - exp(-(b*l)^nu)) for responses / propagators

The search is a derivative-free simplex over (log b, log nu) from 16 fixed
starting points, so identical inputs give bit-identical parameters. Fits are
unweighted over lags min_lag..max_lag; lag 0 is excluded by default because
the autocorrelation is pinned there by definition.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy.optimize import minimize

from .domain import FitForm, FitParams, LagCurve
from .errors import NonConvergedError, TooFewPointsError

MIN_POINTS = 8
MAX_EVALS = 100_000
#: simplex diameter convergence threshold; absolute in log space = relative in (b, nu)
XTOL = 1e-11
FTOL = 1e-15

_B_STARTS = (0.02, 0.08, 0.3, 1.0)
_NU_STARTS = (0.4, 0.7, 1.0, 1.6)

# search box in log space; nu is kept away from 0 where the form collapses to
# a constant, and b is allowed far enough up to represent saturation limits
_LOGB_LO, _LOGB_HI = np.log(1e-8), np.log(1e40)
_LOGNU_LO, _LOGNU_HI = np.log(0.05), np.log(20.0)


def _shape(form: FitForm, b: float, nu: float, lags: np.ndarray) -> np.ndarray:
    # (b*l)^nu computed in log space so extreme b never overflows
    with np.errstate(divide="ignore"):
        t = nu * np.log(b * lags)
    power = np.exp(np.minimum(t, 700.0))
    decay = np.exp(-power)
    return decay if form is FitForm.DECAY else 1.0 - decay


def _best_amplitude(shape: np.ndarray, target: np.ndarray) -> float:
    denom = float(shape @ shape)
    if denom == 0.0:
        return 0.0
    return float(shape @ target) / denom


def fit_stretched(curve: LagCurve, form: FitForm, min_lag: int = 1) -> FitParams:
    """Least-squares stretched-exponential fit of a lag curve.

    Minimizes the sum of squared residuals over lags >= min_lag. Raises
    TOO_FEW_POINTS below 8 usable lags and NON_CONVERGED if no simplex start
    terminates within the evaluation budget.
    """
    lags = np.arange(min_lag, curve.max_lag + 1, dtype=np.float64)
    if len(lags) < MIN_POINTS:
        raise TooFewPointsError("need at least 8 lags to fit",
                                usable=len(lags), min_lag=min_lag)
    target = curve.values[min_lag:].astype(np.float64)

    def clipped(logb: float, lognu: float) -> tuple[float, float, float]:
        lb = min(max(logb, _LOGB_LO), _LOGB_HI)
        ln = min(max(lognu, _LOGNU_LO), _LOGNU_HI)
        penalty = (logb - lb) ** 2 + (lognu - ln) ** 2
        return lb, ln, penalty

    def sse_at(logb: float, lognu: float) -> tuple[float, float]:
        lb, ln, penalty = clipped(logb, lognu)
        shape = _shape(form, np.exp(lb), np.exp(ln), lags)
        a = _best_amplitude(shape, target)
        resid = target - a * shape
        return float(resid @ resid) + penalty, a

    best = None  # (sse, start_index, a, b, nu)
    converged_any = False
    for idx, (b0, nu0) in enumerate(itertools.product(_B_STARTS, _NU_STARTS)):
        res = minimize(
            lambda x: sse_at(x[0], x[1])[0],
            x0=np.array([np.log(b0), np.log(nu0)]),
            method="Nelder-Mead",
            options={"xatol": XTOL, "fatol": FTOL, "maxfev": MAX_EVALS,
                     "maxiter": MAX_EVALS},
        )
        if res.success:
            converged_any = True
        lb, ln, _ = clipped(res.x[0], res.x[1])
        sse, a = sse_at(lb, ln)
        cand = (sse, idx, a, float(np.exp(lb)), float(np.exp(ln)))
        if best is None or cand[:2] < best[:2]:
            best = cand
    if not converged_any:
        raise NonConvergedError("no simplex start converged", max_evals=MAX_EVALS)
    sse, _, a, b, nu = best
    return FitParams(form=form, a=a, b=b, nu=nu, sse=sse)


def eval_fit(params: FitParams, lag) -> np.ndarray | float:
    """Evaluate a fitted form at one or many non-negative lags.

    DECAY gives a at lag 0; SATURATING gives 0 there.
    """
    arr = np.asarray(lag, dtype=np.float64)
    out = params.a * _shape(params.form, params.b, params.nu, arr)
    return float(out) if np.isscalar(lag) or arr.ndim == 0 else out
