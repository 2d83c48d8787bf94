"""Parse trade and quote CSVs, rebase quotes, attach prevailing mids.

File formats (UTF-8, comma-separated, header row required):

* trades: ``ts_ns, product, spread_bps, notional, venue, true_sign``
  (blank ``true_sign`` means unlabeled; blank ``venue`` means UNKNOWN)
* quotes: ``ts_ns, product, spread_bps``

The two feeds are independent and unsynchronized, so mids are attached with
a strict "last quote before the trade" rule: no lookahead, optionally capped
by a staleness threshold.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .domain import REBASE_LEVEL, Quote, RebasedSeries, Tape, Trade, Venue
from .errors import (
    EmptyFileError,
    EmptyInputError,
    NoPriorQuoteError,
    ParseError,
    SchemaMismatchError,
    ValidationError,
)

TRADE_COLUMNS = ("ts_ns", "product", "spread_bps", "notional", "venue", "true_sign")
QUOTE_COLUMNS = ("ts_ns", "product", "spread_bps")


@dataclass(frozen=True)
class ParseResult:
    """Parsed records plus non-fatal warnings (e.g. out-of-order rows)."""

    records: tuple
    warnings: tuple


def _open_rows(path, required: Sequence[str], schema: Optional[Mapping[str, str]]):
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = None
        for row in reader:  # skip leading `# key: value` metadata lines
            if row and row[0].lstrip().startswith("#"):
                continue
            header = row
            break
        if header is None:
            raise EmptyFileError("no header row", path=str(path))
        header = [h.strip() for h in header]
        colmap = dict(schema) if schema else {c: c for c in required}
        missing = [c for c in required if colmap.get(c, c) not in header]
        if missing:
            raise SchemaMismatchError("missing columns", missing=missing, header=header)
        idx = {c: header.index(colmap.get(c, c)) for c in required}
        rows = list(reader)
    if not rows:
        raise EmptyFileError("no data rows", path=str(path))
    return idx, rows


def _parse_float(raw: str, line: int, col: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ParseError(f"non-numeric {col}", line=line, value=raw) from None


def _parse_int(raw: str, line: int, col: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ParseError(f"non-integer {col}", line=line, value=raw) from None


def parse_trades(path, schema: Optional[Mapping[str, str]] = None) -> ParseResult:
    """Read a trades CSV into validated, time-sorted Trade records.

    ``schema`` optionally remaps canonical column names to file columns.
    The sort is stable, so equal timestamps keep input file order. Trade ids
    are the 0-based input row indices (the files carry none).
    """
    idx, rows = _open_rows(path, TRADE_COLUMNS, schema)
    trades = []
    for i, row in enumerate(rows):
        line = i + 2  # 1-based, after the header
        if not row or all(not c.strip() for c in row):
            continue
        try:
            ts = _parse_int(row[idx["ts_ns"]].strip(), line, "ts_ns")
            raw_venue = row[idx["venue"]].strip()
            venue = Venue(raw_venue) if raw_venue else Venue.UNKNOWN
            raw_sign = row[idx["true_sign"]].strip()
            true_sign = int(raw_sign) if raw_sign else None
            trade = Trade(
                id=str(i),
                ts=ts,
                product=row[idx["product"]].strip(),
                spread=_parse_float(row[idx["spread_bps"]].strip(), line, "spread_bps"),
                notional=_parse_float(row[idx["notional"]].strip(), line, "notional"),
                venue=venue,
                true_sign=true_sign,
            )
        except (ValueError, IndexError) as exc:
            raise ParseError(str(exc), line=line) from None
        except ValidationError as exc:
            raise ParseError(f"invalid trade: {exc}", line=line) from None
        trades.append(trade)
    if not trades:
        raise EmptyFileError("no trades parsed", path=str(path))
    warnings = []
    out_of_order = sum(1 for a, b in zip(trades, trades[1:]) if b.ts < a.ts)
    if out_of_order:
        warnings.append(f"{out_of_order} rows out of time order; sorted")
    trades.sort(key=lambda t: t.ts)  # stable: file order breaks ties
    return ParseResult(records=tuple(trades), warnings=tuple(warnings))


def parse_quotes(path, schema: Optional[Mapping[str, str]] = None) -> ParseResult:
    """Read a quotes CSV; same contract as :func:`parse_trades`."""
    idx, rows = _open_rows(path, QUOTE_COLUMNS, schema)
    quotes = []
    for i, row in enumerate(rows):
        line = i + 2
        if not row or all(not c.strip() for c in row):
            continue
        try:
            quote = Quote(
                ts=_parse_int(row[idx["ts_ns"]].strip(), line, "ts_ns"),
                product=row[idx["product"]].strip(),
                spread=_parse_float(row[idx["spread_bps"]].strip(), line, "spread_bps"),
            )
        except ValidationError as exc:
            raise ParseError(f"invalid quote: {exc}", line=line) from None
        quotes.append(quote)
    if not quotes:
        raise EmptyFileError("no quotes parsed", path=str(path))
    warnings = []
    out_of_order = sum(1 for a, b in zip(quotes, quotes[1:]) if b.ts < a.ts)
    if out_of_order:
        warnings.append(f"{out_of_order} rows out of time order; sorted")
    quotes.sort(key=lambda q: q.ts)
    return ParseResult(records=tuple(quotes), warnings=tuple(warnings))


def rebase(quotes: Sequence[Quote]) -> RebasedSeries:
    """Rebase quote spreads to basis points of their own sample mean.

    m = 10^4 * s / mean(s), so the rebased series has sample mean 10^4 and is
    invariant under any positive rescaling of the raw spreads.
    """
    if len(quotes) == 0:
        raise EmptyInputError("rebase needs at least one quote")
    spreads = np.array([q.spread for q in quotes], dtype=float)
    mean_spread = float(np.mean(spreads))
    m = REBASE_LEVEL * spreads / mean_spread
    return RebasedSeries(
        product=quotes[0].product,
        mean_spread=mean_spread,
        ts=np.array([q.ts for q in quotes], dtype=np.int64),
        m=m,
    )


def prevailing_mid(trade_ts: int, series: RebasedSeries) -> float:
    """Rebased mid of the latest quote strictly before ``trade_ts``."""
    i = int(np.searchsorted(series.ts, trade_ts, side="left"))
    if i == 0:
        raise NoPriorQuoteError("trade precedes first quote", trade_ts=trade_ts)
    return float(series.m[i - 1])


def prevailing_quote_ts(trade_ts: int, series: RebasedSeries) -> int:
    """Timestamp of the quote :func:`prevailing_mid` would use."""
    i = int(np.searchsorted(series.ts, trade_ts, side="left"))
    if i == 0:
        raise NoPriorQuoteError("trade precedes first quote", trade_ts=trade_ts)
    return int(series.ts[i - 1])


def build_tape(trades: Sequence[Trade], quotes: Sequence[Quote]) -> Tape:
    """Assemble a single-product tape from parsed records."""
    if not trades:
        raise EmptyInputError("tape needs at least one trade")
    if not quotes:
        raise EmptyInputError("tape needs at least one quote")
    return Tape(product=trades[0].product, trades=tuple(trades), rebased=rebase(quotes))


def load_tape(trades_path, quotes_path) -> tuple[Tape, tuple]:
    """Parse both files and assemble the tape; returns (tape, warnings)."""
    t = parse_trades(trades_path)
    q = parse_quotes(quotes_path)
    return build_tape(t.records, q.records), t.warnings + q.warnings
