"""Core immutable data types shared by every stage of the pipeline.

Prices live in two unit systems: raw credit spreads in basis points (as
quoted) and "rebased" levels m = 10^4 * s / mean(s), i.e. basis points of
the typical spread. Every estimator downstream consumes rebased levels and
only ever looks at differences, so the arbitrary price offset is fixed to 0.

Timestamps are integer nanoseconds UTC; ties in time are broken by input
order. All types are frozen and their array payloads are marked read-only,
so instances can be shared freely across threads.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ValidationError

REBASE_LEVEL = 1e4
_REBASE_MEAN_RTOL = 1e-6


class Venue(enum.Enum):
    ON_SEF = "ON_SEF"
    OFF_SEF = "OFF_SEF"
    UNKNOWN = "UNKNOWN"


class CurveKind(enum.Enum):
    AUTOCORR = "AUTOCORR"
    RESPONSE = "RESPONSE"
    PROPAGATOR = "PROPAGATOR"
    CUMULATIVE = "CUMULATIVE"
    STEP_RESPONSE = "STEP_RESPONSE"


class FitForm(enum.Enum):
    #: a * exp(-(b*lag)^nu)
    DECAY = "DECAY"
    #: a * (1 - exp(-(b*lag)^nu))
    SATURATING = "SATURATING"


def _require_ts(ts, typename: str) -> int:
    if ts is None:
        raise ValidationError("MISSING_TIMESTAMP", f"{typename}.ts is required")
    return int(ts)


@dataclass(frozen=True)
class Trade:
    """One reported transaction. ``spread`` is the traded level in bps."""

    id: str
    ts: int
    product: str
    spread: float
    notional: float
    venue: Venue = Venue.UNKNOWN
    true_sign: Optional[int] = None  # +1 / -1 ground-truth label, None if unlabeled

    def __post_init__(self):
        object.__setattr__(self, "ts", _require_ts(self.ts, "Trade"))
        validate_trade(self)


@dataclass(frozen=True)
class Quote:
    """One indicative quote: spread level in bps at a point in time."""

    ts: int
    product: str
    spread: float

    def __post_init__(self):
        object.__setattr__(self, "ts", _require_ts(self.ts, "Quote"))
        validate_quote(self)


def validate_trade(trade: Trade) -> None:
    """Raise ValidationError naming the violated field rule."""
    if not (trade.spread > 0) or not math.isfinite(trade.spread):
        raise ValidationError("NEGATIVE_SPREAD", "Trade.spread must be > 0",
                              value=trade.spread, id=trade.id)
    if not (trade.notional > 0) or not math.isfinite(trade.notional):
        raise ValidationError("NEGATIVE_NOTIONAL", "Trade.notional must be > 0",
                              value=trade.notional, id=trade.id)
    if trade.true_sign not in (None, 1, -1):
        raise ValidationError("BAD_SIGN_LABEL", "true_sign must be +1, -1 or None",
                              value=trade.true_sign, id=trade.id)


def validate_quote(quote: Quote) -> None:
    if not (quote.spread > 0) or not math.isfinite(quote.spread):
        raise ValidationError("NEGATIVE_SPREAD", "Quote.spread must be > 0",
                              value=quote.spread)


def validate(record) -> None:
    """Re-check the invariants of an already-built Trade or Quote."""
    if isinstance(record, Trade):
        _require_ts(record.ts, "Trade")
        validate_trade(record)
    elif isinstance(record, Quote):
        _require_ts(record.ts, "Quote")
        validate_quote(record)
    else:
        raise TypeError(f"validate() accepts Trade or Quote, got {type(record).__name__}")


def _frozen_array(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class RebasedSeries:
    """Indicative mid history rebased to basis points of the typical spread.

    ``ts`` and ``m`` are parallel arrays; the sample mean of ``m`` is 10^4 by
    construction of the rebase.
    """

    product: str
    mean_spread: float
    ts: np.ndarray
    m: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "ts", _frozen_array(self.ts, np.int64))
        object.__setattr__(self, "m", _frozen_array(self.m, np.float64))
        if self.ts.ndim != 1 or self.ts.shape != self.m.shape:
            raise ValidationError("BAD_SERIES", "ts and m must be parallel 1-d arrays")
        if len(self.ts) == 0:
            raise ValidationError("EMPTY_SERIES", "rebased series needs at least one point")
        if np.any(np.diff(self.ts) < 0):
            raise ValidationError("NOT_TIME_ORDERED", "series points must be time-ordered")
        mean_m = float(np.mean(self.m))
        if abs(mean_m - REBASE_LEVEL) > _REBASE_MEAN_RTOL * REBASE_LEVEL:
            raise ValidationError("BAD_REBASE_MEAN",
                                  "sample mean of rebased series must be 10^4",
                                  mean=mean_m)

    def __len__(self) -> int:
        return len(self.ts)


@dataclass(frozen=True)
class SignedTrade:
    """A trade with its prevailing rebased mid and detected sign attached."""

    trade: Trade
    mid_before: float
    eps: int
    tie: bool = False

    def __post_init__(self):
        if self.eps not in (1, -1):
            raise ValidationError("BAD_SIGN", "eps must be +1 or -1", value=self.eps)


@dataclass(frozen=True)
class LagCurve:
    """A function of trade-time lag with per-lag sample counts.

    ``values[l]`` is the statistic at lag l for l = 0..max_lag; ``counts[l]``
    is the number of samples that entered it. Kind-specific invariants:
    AUTOCORR has values[0] = 1 and |values| <= 1; RESPONSE and PROPAGATOR
    start at 0.
    """

    kind: CurveKind
    values: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_array(self.values, np.float64))
        object.__setattr__(self, "counts", _frozen_array(self.counts, np.int64))
        if self.values.ndim != 1 or self.values.shape != self.counts.shape:
            raise ValidationError("BAD_CURVE", "values and counts must be parallel 1-d arrays")
        if len(self.values) == 0:
            raise ValidationError("BAD_CURVE", "curve needs at least lag 0")
        tol = 1e-9
        if self.kind is CurveKind.AUTOCORR:
            if abs(self.values[0] - 1.0) > tol:
                raise ValidationError("BAD_AUTOCORR", "autocorrelation must be 1 at lag 0",
                                      value=float(self.values[0]))
            if np.any(np.abs(self.values) > 1.0 + tol):
                raise ValidationError("BAD_AUTOCORR", "|autocorrelation| must not exceed 1")
        elif self.kind in (CurveKind.RESPONSE, CurveKind.PROPAGATOR):
            if abs(self.values[0]) > tol:
                raise ValidationError("BAD_CURVE", f"{self.kind.value} must be 0 at lag 0",
                                      value=float(self.values[0]))

    @property
    def max_lag(self) -> int:
        return len(self.values) - 1

    def value(self, lag: int) -> float:
        return float(self.values[lag])


@dataclass(frozen=True)
class FitParams:
    """Stretched-exponential parameters plus goodness of fit.

    DECAY:       f(l) = a * exp(-(b*l)^nu)
    SATURATING:  f(l) = a * (1 - exp(-(b*l)^nu))
    """

    form: FitForm
    a: float
    b: float
    nu: float
    sse: float

    def __post_init__(self):
        if not (self.b > 0):
            raise ValidationError("BAD_FIT", "b must be > 0", b=self.b)
        if not (self.nu > 0):
            raise ValidationError("BAD_FIT", "nu must be > 0", nu=self.nu)
        if not math.isfinite(self.a):
            raise ValidationError("BAD_FIT", "a must be finite", a=self.a)

    @property
    def is_degenerate(self) -> bool:
        """True when the decay scale collapsed (saturation-limit fits)."""
        return self.b > 1e3


@dataclass(frozen=True)
class BinRecord:
    """Net signed notional and price change over one clock-time bin."""

    bin_start: int
    imbalance: float
    ret: float
    n_trades: int

    def __post_init__(self):
        if self.n_trades < 0:
            raise ValidationError("BAD_BIN", "n_trades must be >= 0")
        if self.n_trades == 0 and self.imbalance != 0.0:
            raise ValidationError("BAD_BIN", "empty bin must carry zero imbalance")


@dataclass(frozen=True)
class Kernel:
    """Propagator ground truth for the simulator: increments g(1..K).

    The cumulative kernel is G(l) = sum(g[:l]); increments are implicitly 0
    beyond K, so G plateaus at ``g_inf = sum(g)``.
    """

    g: tuple

    def __post_init__(self):
        object.__setattr__(self, "g", tuple(float(x) for x in self.g))
        if len(self.g) == 0:
            raise ValidationError("BAD_KERNEL", "kernel needs at least one increment")
        if not all(math.isfinite(x) for x in self.g):
            raise ValidationError("BAD_KERNEL", "kernel increments must be finite")

    @property
    def g_inf(self) -> float:
        return float(sum(self.g))

    @property
    def rise(self) -> int:
        return len(self.g)

    def cumulative(self, max_lag: int) -> np.ndarray:
        """G(0..max_lag), plateau-padded beyond the rise."""
        g = np.zeros(max_lag + 1)
        k = min(self.rise, max_lag)
        g[1 : k + 1] = np.cumsum(self.g[:k])
        if max_lag > self.rise:
            g[self.rise :] = self.g_inf
        return g


def plateau_kernel(g_inf: float, rise: int) -> Kernel:
    """Linear rise to ``g_inf`` over ``rise`` lags, then flat."""
    if rise < 1:
        raise ValidationError("BAD_KERNEL", "rise must be >= 1")
    return Kernel(g=tuple([g_inf / rise] * rise))


@dataclass(frozen=True)
class SynthConfig:
    """Ground-truth generator parameters.

    ``phi`` is the metaorder continuation probability (sign autocorrelation
    phi^l, effective order count 1/(1-phi)); ``q`` the correct-classification
    probability of the as-reported sign channel. ``phi_mix`` optionally mixes
    a second continuation probability (drawn per metaorder with
    ``phi_mix_weight``) to approximate stretched-exponential flow.
    ``off_kernel``/``p_off`` switch on a second trade category with its own
    propagator.
    """

    n_trades: int
    phi: float
    kernel: Kernel
    noise_sd: float = 0.0
    q: float = 1.0
    half_spread: float = 0.0
    seed: int = 0
    notional_mean: float = 1e6
    label_fraction: float = 1.0
    trade_noise_sd: float = 0.0
    intertrade_ns: int = 60_000_000_000
    start_ts: int = 1_434_499_200_000_000_000  # fixed epoch so tapes are reproducible
    product: str = "SYNTH"
    phi_mix: Optional[float] = None
    phi_mix_weight: float = 0.0
    off_kernel: Optional[Kernel] = None
    p_off: float = 0.0

    def __post_init__(self):
        if not (0 <= self.phi < 1):
            raise ValidationError("BAD_PHI", "phi must be in [0, 1)", phi=self.phi)
        if not (0.5 < self.q <= 1):
            raise ValidationError("BAD_Q", "q must be in (0.5, 1]", q=self.q)
        if self.noise_sd < 0:
            raise ValidationError("BAD_NOISE", "noise_sd must be >= 0")
        if self.n_trades < 1:
            raise ValidationError("BAD_N", "n_trades must be >= 1")
        if not (0 <= self.label_fraction <= 1):
            raise ValidationError("BAD_LABEL_FRACTION", "label_fraction must be in [0, 1]")
        if self.phi_mix is not None and not (0 <= self.phi_mix < 1):
            raise ValidationError("BAD_PHI", "phi_mix must be in [0, 1)")
        if not (0 <= self.p_off <= 1):
            raise ValidationError("BAD_CATEGORY_PROB", "p_off must be in [0, 1]")
        if self.p_off > 0 and self.off_kernel is None:
            raise ValidationError("BAD_CATEGORY", "p_off > 0 requires off_kernel")


@dataclass(frozen=True)
class Tape:
    """One product's trades plus its rebased quote series."""

    product: str
    trades: tuple
    rebased: RebasedSeries

    def __post_init__(self):
        object.__setattr__(self, "trades", tuple(self.trades))
        for t in self.trades:
            if t.product != self.product:
                raise ValidationError("MIXED_PRODUCTS", "all trades must share the tape product",
                                      got=t.product, expected=self.product)
        ts = [t.ts for t in self.trades]
        if any(b < a for a, b in zip(ts, ts[1:])):
            raise ValidationError("NOT_TIME_ORDERED", "trades must be time-ordered")

    def __len__(self) -> int:
        return len(self.trades)
