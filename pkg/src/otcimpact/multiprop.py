"""Per-category propagators: each trade class carries its own impact kernel.

Model: every trade belongs to exactly one category (default: execution
venue), and the mid follows

    m_{t+1} - m_t = sum_{k>=1} g_{cat(t+1-k)}(k) * eps_{t+1-k} + noise_t.

Writing xi^p_t = eps_t * 1[cat_t = p], the one-step return is a moving
average of the xi streams. Correlating with xi^p_t and dividing by the
category frequency P_p gives, for the *conditional* response
R_p(l) = <(m_{t+l} - m_t) eps_t | cat_t = p> and its increment D_p(l):

    P_p * D_p(l) = sum_r sum_{k=1..K} g_r(k) * Chat_{rp}(l - k + 1)

with Chat_{rp}(l) = <xi^r_{t+l} xi^p_t> and negative lags via the symmetry
Chat_{rp}(-l) = Chat_{pr}(l). Stacking the rows for every category and lag
l = 0..L-1 yields one joint least-squares system for all kernels; with a
single category it reduces exactly to the one-propagator solve (P = 1,
Chat = C). The P_p factor on the left converts the conditional response
increments into the unconditional covariances the right side is built from.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .domain import CurveKind, LagCurve, SignedTrade, Trade, Venue
from .errors import DimensionMismatchError, EmptyCategoryError, SingularSystemError, TooShortError
from .propagator import RIDGE_CONDITION, RIDGE_SCALE, SINGULAR_CONDITION, bound_lower, bound_upper


@dataclass(frozen=True)
class CategoryScheme:
    """Total assignment of trades to a fixed, ordered set of categories."""

    name: str
    categories: tuple
    assign: Callable[[Trade], str]

    def __post_init__(self):
        object.__setattr__(self, "categories", tuple(self.categories))
        if len(set(self.categories)) != len(self.categories):
            raise ValueError("duplicate categories")

    def index_of(self, trade: Trade) -> int:
        cat = self.assign(trade)
        try:
            return self.categories.index(cat)
        except ValueError:
            raise EmptyCategoryError("assign returned unknown category", category=cat) from None


def venue_scheme() -> CategoryScheme:
    """Default on/off-SEF split; UNKNOWN joins the on-SEF majority."""
    def assign(trade: Trade) -> str:
        return "OFF_SEF" if trade.venue is Venue.OFF_SEF else "ON_SEF"

    return CategoryScheme(name="venue", categories=("ON_SEF", "OFF_SEF"), assign=assign)


@dataclass(frozen=True)
class CrossCorrelation:
    """Signed-indicator covariance tensor Chat_{rp}(l), l = 0..max_lag."""

    categories: tuple
    tensor: np.ndarray  # shape (ncat, ncat, max_lag + 1)
    counts: np.ndarray  # pairs per lag
    probs: np.ndarray  # category frequencies P_p

    def __post_init__(self):
        t = np.array(self.tensor, dtype=np.float64)
        t.setflags(write=False)
        object.__setattr__(self, "tensor", t)
        object.__setattr__(self, "categories", tuple(self.categories))

    @property
    def max_lag(self) -> int:
        return self.tensor.shape[2] - 1

    def at(self, rho: int, pi: int, lag: int) -> float:
        """Chat_{rho pi}(lag) for any integer lag, zero-padded beyond range."""
        if lag < 0:
            rho, pi, lag = pi, rho, -lag
        if lag > self.max_lag:
            return 0.0
        return float(self.tensor[rho, pi, lag])


def _indicator_streams(signed: Sequence[SignedTrade], scheme: CategoryScheme):
    eps = np.array([st.eps for st in signed], dtype=np.float64)
    idx = np.array([scheme.index_of(st.trade) for st in signed], dtype=np.intp)
    ncat = len(scheme.categories)
    for c, cat in enumerate(scheme.categories):
        if not np.any(idx == c):
            raise EmptyCategoryError("category has no trades", category=cat)
    xi = np.zeros((ncat, len(eps)))
    xi[idx, np.arange(len(eps))] = eps
    return eps, idx, xi


def cross_corr(signed: Sequence[SignedTrade], scheme: CategoryScheme, max_lag: int) -> CrossCorrelation:
    """Covariances of the signed category-indicator streams.

    Summed over categories the tensor reassembles the plain sign
    autocorrelation exactly (the indicators partition every trade).
    """
    eps, idx, xi = _indicator_streams(signed, scheme)
    n = len(eps)
    if n <= max_lag:
        raise TooShortError("need more trades than lags", n=n, max_lag=max_lag)
    ncat = len(scheme.categories)
    tensor = np.zeros((ncat, ncat, max_lag + 1))
    counts = np.zeros(max_lag + 1, dtype=np.int64)
    for lag in range(max_lag + 1):
        k = n - lag
        counts[lag] = k
        for r in range(ncat):
            lead = xi[r, lag:]
            for p in range(ncat):
                tensor[r, p, lag] = float(lead @ xi[p, :k]) / k
    probs = np.array([float(np.mean(idx == c)) for c in range(ncat)])
    return CrossCorrelation(categories=scheme.categories, tensor=tensor,
                            counts=counts, probs=probs)


def category_autocorr(
    signed: Sequence[SignedTrade], scheme: CategoryScheme, max_lag: int
) -> dict[str, LagCurve]:
    """Conditional sign autocorrelation per category of the earlier trade."""
    eps, idx, _ = _indicator_streams(signed, scheme)
    n = len(eps)
    if n <= max_lag:
        raise TooShortError("need more trades than lags", n=n, max_lag=max_lag)
    out = {}
    for c, cat in enumerate(scheme.categories):
        values = np.zeros(max_lag + 1)
        counts = np.zeros(max_lag + 1, dtype=np.int64)
        values[0] = 1.0
        counts[0] = int(np.sum(idx == c))
        for lag in range(1, max_lag + 1):
            sel = idx[: n - lag] == c
            cnt = int(sel.sum())
            if cnt == 0:
                raise EmptyCategoryError("category has no pairs at lag",
                                         category=cat, lag=lag)
            values[lag] = float((eps[: n - lag][sel] * eps[lag:][sel]).sum()) / cnt
            counts[lag] = cnt
        out[cat] = LagCurve(kind=CurveKind.AUTOCORR, values=values, counts=counts)
    return out


def category_response(
    signed: Sequence[SignedTrade], scheme: CategoryScheme, max_lag: int
) -> dict[str, LagCurve]:
    """Conditional response per category of the initiating trade.

    R_p(l) = <(m_{t+l} - m_t) eps_t | cat_t = p>; a single category
    reduces this to the plain response.
    """
    eps, idx, _ = _indicator_streams(signed, scheme)
    mids = np.array([st.mid_before for st in signed], dtype=np.float64)
    n = len(eps)
    if n <= max_lag:
        raise TooShortError("need more trades than lags", n=n, max_lag=max_lag)
    out = {}
    for c, cat in enumerate(scheme.categories):
        values = np.zeros(max_lag + 1)
        counts = np.zeros(max_lag + 1, dtype=np.int64)
        counts[0] = int(np.sum(idx == c))
        for lag in range(1, max_lag + 1):
            sel = idx[: n - lag] == c
            cnt = int(sel.sum())
            if cnt == 0:
                raise EmptyCategoryError("category has no pairs at lag",
                                         category=cat, lag=lag)
            diff = mids[lag:] - mids[: n - lag]
            values[lag] = float((diff[sel] * eps[: n - lag][sel]).sum()) / cnt
            counts[lag] = cnt
        out[cat] = LagCurve(kind=CurveKind.RESPONSE, values=values, counts=counts)
    return out


@dataclass(frozen=True)
class MultiKernelSolution:
    """Joint per-category kernels plus the statistics that produced them."""

    categories: tuple
    increments: dict  # category -> np.ndarray g(1..K)
    cumulative: dict  # category -> PROPAGATOR LagCurve (plateau-padded)
    cross: CrossCorrelation
    probs: np.ndarray
    residual_norm: float
    truncation: int

    def plateau(self, category: str, lag_from: int, lag_to: Optional[int] = None) -> float:
        curve = self.cumulative[category]
        hi = curve.max_lag if lag_to is None else lag_to
        return float(np.mean(curve.values[lag_from : hi + 1]))


def solve_multi(
    cross: CrossCorrelation,
    responses: Mapping[str, LagCurve],
    truncation: Optional[int] = None,
) -> MultiKernelSolution:
    """Solve the stacked per-category deconvolution (see module docstring).

    ``responses`` must cover exactly the cross tensor's categories with a
    common max lag L; the joint system has one row per (category, lag) and
    one unknown per (category, k <= K).
    """
    cats = cross.categories
    if set(responses) != set(cats):
        raise DimensionMismatchError("responses must cover the scheme categories",
                                     expected=list(cats), got=sorted(responses))
    L = responses[cats[0]].max_lag
    for cat in cats:
        if responses[cat].max_lag != L:
            raise DimensionMismatchError("responses must share a max lag")
    K = truncation if truncation is not None else max(1, L // 2)
    if K < 1 or K > L:
        raise DimensionMismatchError("truncation must lie in 1..max_lag", K=K, L=L)
    ncat = len(cats)

    A = np.zeros((ncat * L, ncat * K))
    rhs = np.zeros(ncat * L)
    for p, cat in enumerate(cats):
        d = np.diff(responses[cat].values) * cross.probs[p]
        for l in range(L):
            row = p * L + l
            rhs[row] = d[l]
            for r in range(ncat):
                for k in range(1, K + 1):
                    A[row, r * K + k - 1] = cross.at(r, p, l - k + 1)

    ata = A.T @ A
    atd = A.T @ rhs
    cond = float(np.linalg.cond(ata))
    if not np.isfinite(cond) or cond > RIDGE_CONDITION:
        ridge = RIDGE_SCALE * float(np.trace(ata))
        if ridge <= 0:
            raise SingularSystemError("normal equations have zero trace")
        ata = ata + ridge * np.eye(ncat * K)
        cond = float(np.linalg.cond(ata))
        if not np.isfinite(cond) or cond > SINGULAR_CONDITION:
            raise SingularSystemError("stacked system remains ill-conditioned",
                                      condition=cond)
    g = np.linalg.solve(ata, atd)
    residual = float(np.linalg.norm(A @ g - rhs))

    increments = {}
    cumulative = {}
    for p, cat in enumerate(cats):
        gp = g[p * K : (p + 1) * K]
        values = np.zeros(L + 1)
        values[1 : K + 1] = np.cumsum(gp)
        if L > K:
            values[K + 1 :] = values[K]
        increments[cat] = gp
        cumulative[cat] = LagCurve(kind=CurveKind.PROPAGATOR, values=values,
                                   counts=responses[cat].counts)
    return MultiKernelSolution(categories=cats, increments=increments,
                               cumulative=cumulative, cross=cross,
                               probs=cross.probs, residual_norm=residual,
                               truncation=K)


def category_bounds(
    responses: Mapping[str, LagCurve],
    n_effs: Mapping[str, float],
    lag: int,
) -> dict[str, tuple[float, float]]:
    """Large-lag propagator bounds per category from conditional statistics."""
    out = {}
    for cat, curve in responses.items():
        r_at = curve.value(lag)
        out[cat] = (bound_lower(r_at, n_effs[cat]), bound_upper(r_at, n_effs[cat]))
    return out
