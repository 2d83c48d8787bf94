"""Trade-sign detection from prices, and ground-truth label handling.

The detector is the price-versus-mid heuristic: a trade printing above the
prevailing mid is buyer-initiated (+1), below it seller-initiated (-1).
Exact equality is undefined by the heuristic; the default rule carries the
previous trade's sign forward (+1 for the very first trade) and flags the
trade, which keeps runs deterministic. ``tie_policy="drop"`` discards ties
instead.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .domain import REBASE_LEVEL, SignedTrade, Tape
from .errors import NoLabelsError, NoPriorQuoteError
from .ingest import prevailing_mid, prevailing_quote_ts


def classify(trade_price: float, mid: float, last_eps: int = 1) -> tuple[int, bool]:
    """Sign one trade from its rebased price and prevailing rebased mid.

    Returns (eps, tie). Depends only on trade_price - mid. ``last_eps`` is
    the carry-forward sign used when the two are exactly equal.
    """
    if trade_price > mid:
        return 1, False
    if trade_price < mid:
        return -1, False
    return (1 if last_eps >= 0 else -1), True


@dataclass(frozen=True)
class SigningReport:
    n_signed: int
    n_dropped_no_quote: int
    n_dropped_stale: int
    n_dropped_tie: int
    n_ties: int


def classify_all(
    tape: Tape,
    tie_policy: str = "carry",
    max_staleness_ns: Optional[int] = None,
) -> tuple[list[SignedTrade], SigningReport]:
    """Sign every trade on the tape that has a usable prevailing mid.

    Trades before the first quote are dropped (no lookahead), as are trades
    whose prevailing quote is older than ``max_staleness_ns`` when set.
    Trade prices are rebased with the same mean spread as the quote series
    before comparison.
    """
    if tie_policy not in ("carry", "drop"):
        raise ValueError(f"unknown tie_policy: {tie_policy!r}")
    series = tape.rebased
    signed: list[SignedTrade] = []
    n_no_quote = n_stale = n_tie_drop = n_ties = 0
    last_eps = 1
    for trade in tape.trades:
        try:
            mid = prevailing_mid(trade.ts, series)
        except NoPriorQuoteError:
            n_no_quote += 1
            continue
        if max_staleness_ns is not None:
            age = trade.ts - prevailing_quote_ts(trade.ts, series)
            if age > max_staleness_ns:
                n_stale += 1
                continue
        price = REBASE_LEVEL * trade.spread / series.mean_spread
        eps, tie = classify(price, mid, last_eps)
        if tie:
            n_ties += 1
            if tie_policy == "drop":
                n_tie_drop += 1
                continue
        signed.append(SignedTrade(trade=trade, mid_before=mid, eps=eps, tie=tie))
        last_eps = eps
    report = SigningReport(
        n_signed=len(signed),
        n_dropped_no_quote=n_no_quote,
        n_dropped_stale=n_stale,
        n_dropped_tie=n_tie_drop,
        n_ties=n_ties,
    )
    return signed, report


def label_accuracy(signed: Sequence[SignedTrade]) -> tuple[float, int]:
    """Fraction of labeled trades whose detected sign matches the label.

    Returns (q_hat, n_labeled). The estimate is global: the paper-level
    assumption is that the misclassification rate is stationary.
    """
    matches = 0
    labeled = 0
    for st in signed:
        label = st.trade.true_sign
        if label is None:
            continue
        labeled += 1
        if st.eps == label:
            matches += 1
    if labeled == 0:
        raise NoLabelsError("no trades carry a true_sign label")
    return matches / labeled, labeled
