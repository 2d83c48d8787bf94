"""Deterministic file formats for every pipeline artifact.

CSV files open with `# key: value` metadata lines (tool version, config
hash, seed, and format-specific keys), then a header row, then data rows
with floats printed to 15 significant digits. JSON files carry the same
metadata under a "meta" key and are dumped with sorted keys. Identical
inputs therefore produce byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from . import __version__
from .domain import CurveKind, FitParams, FitForm, LagCurve, SignedTrade, Trade, Venue
from .errors import SchemaMismatchError
from .propagator import KernelSolution


def fmt(x) -> str:
    """Fixed float formatting: 15 significant digits."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.15g}"
    return str(x)


def config_hash(config: Mapping) -> str:
    """Stable 16-hex-digit digest of an effective configuration."""
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def base_meta(cfg_hash: str = "", seed="") -> dict:
    return {"tool_version": __version__, "config_hash": cfg_hash, "seed": seed}


def write_table(path, columns: Sequence[str], rows: Iterable[Sequence],
                meta: Optional[Mapping] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        for key in sorted(meta or {}):
            fh.write(f"# {key}: {meta[key]}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")
    return path


def read_meta_comments(path) -> dict:
    """Leading `# key: value` lines of any artifact file."""
    meta: dict = {}
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            body = line[1:].strip()
            if ":" in body:
                key, val = body.split(":", 1)
                meta[key.strip()] = val.strip()
    return meta


def read_table(path) -> tuple[dict, list[str], list[list[str]]]:
    """Read back a metadata-headed CSV; values stay as strings."""
    meta: dict = {}
    header: Optional[list[str]] = None
    rows: list[list[str]] = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if ":" in body:
                    key, val = body.split(":", 1)
                    meta[key.strip()] = val.strip()
                continue
            if header is None:
                header = [c.strip() for c in line.split(",")]
            else:
                rows.append(line.split(","))
    if header is None:
        raise SchemaMismatchError("file has no header row", path=str(path))
    return meta, header, rows


def write_json(path, payload: Mapping, meta: Optional[Mapping] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {"meta": dict(meta or {})}
    doc.update(payload)
    with path.open("w", encoding="utf-8", newline="") as fh:
        json.dump(_jsonable(doc), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def read_json(path) -> dict:
    with Path(path).open("r", encoding="utf-8") as fh:
        return json.load(fh)


def _jsonable(obj):
    if isinstance(obj, Mapping):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        obj = float(obj)
    if isinstance(obj, float) and math.isnan(obj):
        return None
    return obj


# ---------------------------------------------------------------------------
# Lag curves


def write_lagcurve(path, curve: LagCurve, meta: Optional[Mapping] = None) -> Path:
    full = dict(meta or {})
    full["kind"] = curve.kind.value
    rows = ((lag, curve.values[lag], curve.counts[lag]) for lag in range(curve.max_lag + 1))
    return write_table(path, ("lag", "value", "count"), rows, full)


def read_lagcurve(path) -> tuple[LagCurve, dict]:
    meta, header, rows = read_table(path)
    if header != ["lag", "value", "count"]:
        raise SchemaMismatchError("not a lag-curve file", header=header, path=str(path))
    if "kind" not in meta:
        raise SchemaMismatchError("lag-curve file lacks a kind", path=str(path))
    values = np.array([float(r[1]) for r in rows])
    counts = np.array([int(r[2]) for r in rows], dtype=np.int64)
    curve = LagCurve(kind=CurveKind(meta["kind"]), values=values, counts=counts)
    return curve, meta


# ---------------------------------------------------------------------------
# Signed trades


SIGNED_COLUMNS = ("ts_ns", "product", "spread_bps", "notional", "venue",
                  "true_sign", "mid_before", "eps", "tie")


def write_signed(path, signed: Sequence[SignedTrade], mean_spread: float,
                 meta: Optional[Mapping] = None) -> Path:
    full = dict(meta or {})
    full["mean_spread"] = fmt(mean_spread)
    rows = (
        (
            st.trade.ts,
            st.trade.product,
            st.trade.spread,
            st.trade.notional,
            st.trade.venue.value,
            "" if st.trade.true_sign is None else st.trade.true_sign,
            st.mid_before,
            st.eps,
            st.tie,
        )
        for st in signed
    )
    return write_table(path, SIGNED_COLUMNS, rows, full)


def read_signed(path) -> tuple[list[SignedTrade], dict]:
    meta, header, rows = read_table(path)
    if list(header) != list(SIGNED_COLUMNS):
        raise SchemaMismatchError("not a signed-trades file", header=header, path=str(path))
    signed = []
    for i, r in enumerate(rows):
        trade = Trade(
            id=str(i),
            ts=int(r[0]),
            product=r[1],
            spread=float(r[2]),
            notional=float(r[3]),
            venue=Venue(r[4]),
            true_sign=int(r[5]) if r[5] else None,
        )
        signed.append(SignedTrade(trade=trade, mid_before=float(r[6]),
                                  eps=int(r[7]), tie=r[8] == "true"))
    return signed, meta


# ---------------------------------------------------------------------------
# Kernel solutions and fits


def write_kernel(path_csv, path_json, solution: KernelSolution,
                 meta: Optional[Mapping] = None,
                 extra: Optional[Mapping] = None) -> tuple[Path, Path]:
    g = solution.increments
    G = solution.cumulative.values
    rows = []
    for lag in range(solution.cumulative.max_lag + 1):
        g_at = g[lag - 1] if 1 <= lag <= solution.truncation else 0.0
        rows.append((lag, g_at, G[lag]))
    csv_path = write_table(path_csv, ("lag", "g", "G"), rows, meta)
    payload = {
        "truncation": solution.truncation,
        "residual_norm": solution.residual_norm,
    }
    if extra:
        payload.update(extra)
    json_path = write_json(path_json, payload, meta)
    return csv_path, json_path


def fit_to_payload(params: FitParams) -> dict:
    return {"form": params.form.value, "a": params.a, "b": params.b,
            "nu": params.nu, "sse": params.sse}


def fit_from_payload(data: Mapping) -> FitParams:
    return FitParams(form=FitForm(data["form"]), a=float(data["a"]),
                     b=float(data["b"]), nu=float(data["nu"]), sse=float(data["sse"]))
