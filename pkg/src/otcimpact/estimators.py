"""Order-flow and price-response statistics in trade time.

Lags count trades, not clock time. Per-lag means use every available pair
(so counts shrink with the lag) and accumulate in a fixed order, making
results bit-reproducible. An optional session-break threshold cuts lag
pairs that span an intertrade gap larger than the threshold; by default
pairs span overnight gaps.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .domain import BinRecord, CurveKind, LagCurve, RebasedSeries, SignedTrade, Trade
from .errors import (
    EmptyCategoryError,
    NoLabelsError,
    TooFewBinsError,
    TooShortError,
)

DEFAULT_NEFF_TRUNCATION = 100


def _sessions(ts: Optional[np.ndarray], n: int, session_break_ns: Optional[int]):
    """Contiguous index ranges; one range unless a break threshold is set."""
    if ts is None or session_break_ns is None:
        return [(0, n)]
    gaps = np.flatnonzero(np.diff(ts) > session_break_ns)
    starts = np.concatenate([[0], gaps + 1])
    ends = np.concatenate([gaps + 1, [n]])
    return list(zip(starts.tolist(), ends.tolist()))


def autocorr(
    eps: Sequence[int],
    max_lag: int,
    ts: Optional[Sequence[int]] = None,
    session_break_ns: Optional[int] = None,
) -> LagCurve:
    """Sign autocorrelation: value at lag l is the mean of eps_t * eps_{t+l}.

    Signs are +-1 so no further normalization is needed and the lag-0 value
    is exactly 1.
    """
    e = np.asarray(eps, dtype=np.float64)
    n = len(e)
    if n <= max_lag:
        raise TooShortError("need more trades than lags", n=n, max_lag=max_lag)
    ts_arr = None if ts is None else np.asarray(ts, dtype=np.int64)
    spans = _sessions(ts_arr, n, session_break_ns)
    values = np.zeros(max_lag + 1)
    counts = np.zeros(max_lag + 1, dtype=np.int64)
    for lag in range(max_lag + 1):
        total = 0.0
        cnt = 0
        for lo, hi in spans:
            m = hi - lo - lag
            if m <= 0:
                continue
            seg = e[lo:hi]
            total += float(seg[: hi - lo - lag] @ seg[lag:])
            cnt += m
        if cnt == 0:
            raise TooShortError("no pairs at lag", lag=lag)
        values[lag] = total / cnt
        counts[lag] = cnt
    values[0] = 1.0
    return LagCurve(kind=CurveKind.AUTOCORR, values=values, counts=counts)


def response_arrays(
    mids: np.ndarray,
    eps: np.ndarray,
    max_lag: int,
    ts: Optional[np.ndarray] = None,
    session_break_ns: Optional[int] = None,
) -> LagCurve:
    """Response from parallel mid/sign arrays; see :func:`response`."""
    m = np.asarray(mids, dtype=np.float64)
    e = np.asarray(eps, dtype=np.float64)
    n = len(e)
    if len(m) != n:
        raise ValueError("mids and eps must be parallel")
    if n <= max_lag:
        raise TooShortError("need more trades than lags", n=n, max_lag=max_lag)
    spans = _sessions(None if ts is None else np.asarray(ts, np.int64), n, session_break_ns)
    values = np.zeros(max_lag + 1)
    counts = np.zeros(max_lag + 1, dtype=np.int64)
    counts[0] = n
    for lag in range(1, max_lag + 1):
        total = 0.0
        cnt = 0
        for lo, hi in spans:
            k = hi - lo - lag
            if k <= 0:
                continue
            total += float((m[lo + lag : hi] - m[lo : lo + k]) @ e[lo : lo + k])
            cnt += k
        if cnt == 0:
            raise TooShortError("no pairs at lag", lag=lag)
        values[lag] = total / cnt
        counts[lag] = cnt
    return LagCurve(kind=CurveKind.RESPONSE, values=values, counts=counts)


def response(
    signed: Sequence[SignedTrade],
    max_lag: int,
    session_break_ns: Optional[int] = None,
) -> LagCurve:
    """Average signed price move l trades after a trade.

    value(l) = mean over t of (m_{t+l} - m_t) * eps_t, where m_t is the mid
    prevailing just before the t-th trade; value(0) = 0 by definition.
    """
    mids = np.array([st.mid_before for st in signed], dtype=np.float64)
    eps = np.array([st.eps for st in signed], dtype=np.float64)
    ts = np.array([st.trade.ts for st in signed], dtype=np.int64)
    return response_arrays(mids, eps, max_lag, ts=ts, session_break_ns=session_break_ns)


def n_eff(curve: LagCurve, l_sum: int = DEFAULT_NEFF_TRUNCATION) -> float:
    """Effective number of correlated orders: the autocorrelation summed
    over lags 0..l_sum (raw values, no fitting)."""
    if curve.max_lag < l_sum:
        raise ValueError(f"curve max_lag {curve.max_lag} < truncation {l_sum}")
    return float(np.sum(curve.values[: l_sum + 1]))


def subsample_autocorr(
    signed: Sequence[SignedTrade],
    subset: Callable[[SignedTrade], bool],
    max_lag: int,
) -> LagCurve:
    """Sign autocorrelation conditioned on one leg lying in a subset.

    value(l) = ( <eps_t eps_{t+l}>_{t in S} + <eps_t eps_{t+l}>_{t+l in S} )/2.
    With the full subset this reduces to :func:`autocorr` exactly.
    """
    e = np.array([st.eps for st in signed], dtype=np.float64)
    mask = np.array([bool(subset(st)) for st in signed])
    n = len(e)
    if n <= max_lag:
        raise TooShortError("need more trades than lags", n=n, max_lag=max_lag)
    if not mask.any():
        raise NoLabelsError("subset selects no trades")
    values = np.zeros(max_lag + 1)
    counts = np.zeros(max_lag + 1, dtype=np.int64)
    for lag in range(max_lag + 1):
        lead = e[: n - lag] * e[lag:]
        first = mask[: n - lag]
        second = mask[lag:]
        n1 = int(first.sum())
        n2 = int(second.sum())
        if n1 == 0 or n2 == 0:
            raise NoLabelsError("subset has no pairs at lag", lag=lag)
        values[lag] = 0.5 * (float(lead[first].sum()) / n1 + float(lead[second].sum()) / n2)
        counts[lag] = n1 + n2
    values[0] = 1.0
    return LagCurve(kind=CurveKind.AUTOCORR, values=values, counts=counts)


@dataclass(frozen=True)
class WindowStats:
    """Per-window flow statistics (windows are epoch-aligned clock bins)."""

    window_start: int
    window_end: int
    n_trades: int
    n_eff: float
    r_at: float
    cum_autocorr: Optional[LagCurve]
    low_sample: bool


def windowed_stats(
    signed: Sequence[SignedTrade],
    window_ns: int,
    lag_star: int = 30,
    neff_truncation: int = DEFAULT_NEFF_TRUNCATION,
) -> list[WindowStats]:
    """Effective order count, R(lag_star) and cumulative autocorrelation per
    calendar window.

    Lag pairs never cross window boundaries. Windows with fewer than
    10 * lag_star trades are flagged low-sample; windows too short to
    support a statistic carry NaN and no curve.
    """
    if not signed:
        return []
    ts = np.array([st.trade.ts for st in signed], dtype=np.int64)
    first_win = int(ts[0] // window_ns)
    last_win = int(ts[-1] // window_ns)
    out = []
    for w in range(first_win, last_win + 1):
        start, end = w * window_ns, (w + 1) * window_ns
        lo = int(np.searchsorted(ts, start, side="left"))
        hi = int(np.searchsorted(ts, end, side="left"))
        chunk = signed[lo:hi]
        n = len(chunk)
        low = n < 10 * lag_star
        if n < 2:
            out.append(WindowStats(start, end, n, float("nan"), float("nan"), None, True))
            continue
        max_l = min(neff_truncation, n - 1)
        curve = autocorr([st.eps for st in chunk], max_l)
        neff_w = n_eff(curve, max_l)
        cum_l = min(lag_star, max_l)
        cum = LagCurve(
            kind=CurveKind.CUMULATIVE,
            values=np.cumsum(curve.values[: cum_l + 1]),
            counts=curve.counts[: cum_l + 1],
        )
        if n > lag_star:
            r_at = response(chunk, lag_star).value(lag_star)
        else:
            r_at = float("nan")
        out.append(WindowStats(start, end, n, neff_w, r_at, cum, low))
    return out


#: fixed histogram grid for normalized trade sizes Q / mean(Q)
SIZE_GRID = np.linspace(0.0, 8.0, 33)


@dataclass(frozen=True)
class SizeDistribution:
    category: str
    mean_notional: float
    edges: np.ndarray
    masses: np.ndarray  # probability mass per bin over all sizes (tail excluded)
    n: int


def size_distribution(
    trades: Sequence[Trade],
    assign: Callable[[Trade], str],
    categories: Optional[Sequence[str]] = None,
) -> dict[str, SizeDistribution]:
    """Histogram of mean-normalized trade sizes per category.

    Sizes are divided by the per-category mean before binning on the fixed
    grid, so categories with nearly identical shapes overlay regardless of
    scale. Masses are fractions of the category's trade count; sizes beyond
    the grid fall in no bin.
    """
    groups: dict[str, list[float]] = {}
    for t in trades:
        groups.setdefault(assign(t), []).append(t.notional)
    if categories is not None:
        for cat in categories:
            if not groups.get(cat):
                raise EmptyCategoryError("category has no trades", category=cat)
    out = {}
    for cat in sorted(groups):
        sizes = np.array(groups[cat], dtype=np.float64)
        if len(sizes) == 0:
            raise EmptyCategoryError("category has no trades", category=cat)
        mean = float(np.mean(sizes))
        norm = sizes / mean
        hist, _ = np.histogram(norm, bins=SIZE_GRID)
        out[cat] = SizeDistribution(
            category=cat,
            mean_notional=mean,
            edges=SIZE_GRID.copy(),
            masses=hist.astype(np.float64) / len(sizes),
            n=len(sizes),
        )
    return out


def bin_imbalance(
    signed: Sequence[SignedTrade],
    series: RebasedSeries,
    width_ns: int,
) -> list[BinRecord]:
    """Net signed notional and mid change per clock-time bin.

    Bin b covers [b*width, (b+1)*width); its return is the change of the
    last-at-or-before-boundary mid across the bin (no lookahead). Empty bins
    carry zero imbalance; bins whose boundary mid is undefined (before the
    first quote) carry NaN returns and are excluded from profiles.
    """
    if not signed:
        return []
    ts = np.array([st.trade.ts for st in signed], dtype=np.int64)
    eps_notional = np.array([st.eps * st.trade.notional for st in signed], dtype=np.float64)
    first_bin = int(ts[0] // width_ns)
    last_bin = int(ts[-1] // width_ns)

    def mid_at_or_before(boundary: int) -> float:
        i = int(np.searchsorted(series.ts, boundary, side="right")) - 1
        return float(series.m[i]) if i >= 0 else float("nan")

    records = []
    prev_mid = mid_at_or_before(first_bin * width_ns)
    for b in range(first_bin, last_bin + 1):
        start, end = b * width_ns, (b + 1) * width_ns
        lo = int(np.searchsorted(ts, start, side="left"))
        hi = int(np.searchsorted(ts, end, side="left"))
        n = hi - lo
        imbalance = float(np.sum(eps_notional[lo:hi])) if n else 0.0
        end_mid = mid_at_or_before(end)
        ret = end_mid - prev_mid
        prev_mid = end_mid
        records.append(BinRecord(bin_start=start, imbalance=imbalance, ret=ret, n_trades=n))
    return records


@dataclass(frozen=True)
class BinProfile:
    """Rank-grouped means of normalized (imbalance, return) pairs."""

    x: np.ndarray
    y: np.ndarray
    counts: np.ndarray


def bin_profile(bins: Sequence[BinRecord], n_groups: int = 30, clip: float = 3.0) -> BinProfile:
    """Group normalized bin imbalances by rank and average returns per group.

    x = imbalance / std(imbalance), y = return / mean(|return|), both
    computed over non-empty bins before the |x| > clip outliers are dropped.
    Groups are equal-count along the x rank order. The construction is
    invariant under any positive rescaling of all imbalances or all returns.
    """
    usable = [b for b in bins if b.n_trades > 0 and np.isfinite(b.ret)]
    if len(usable) < n_groups:
        raise TooFewBinsError("need at least one bin per group",
                              usable=len(usable), n_groups=n_groups)
    imb = np.array([b.imbalance for b in usable], dtype=np.float64)
    ret = np.array([b.ret for b in usable], dtype=np.float64)
    imb_scale = float(np.std(imb))
    ret_scale = float(np.mean(np.abs(ret)))
    if imb_scale == 0.0 or ret_scale == 0.0:
        raise ValueError("degenerate normalization: constant imbalance or zero returns")
    x = imb / imb_scale
    y = ret / ret_scale
    keep = np.abs(x) <= clip
    x, y = x[keep], y[keep]
    if len(x) < n_groups:
        raise TooFewBinsError("too few bins after outlier cut",
                              usable=len(x), n_groups=n_groups)
    order = np.argsort(x, kind="stable")
    xs = []
    ys = []
    cs = []
    for chunk in np.array_split(order, n_groups):
        xs.append(float(np.mean(x[chunk])))
        ys.append(float(np.mean(y[chunk])))
        cs.append(len(chunk))
    return BinProfile(x=np.array(xs), y=np.array(ys), counts=np.array(cs, dtype=np.int64))
