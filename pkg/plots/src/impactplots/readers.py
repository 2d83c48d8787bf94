"""Readers for the pipeline's file formats.

The formats are the contract: CSVs open with `# key: value` metadata lines,
then a header row; JSONs carry a "meta" key. Readers validate that the
columns a figure needs are present and fail with typed errors otherwise.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np


class MissingInputError(Exception):
    code = "MISSING_INPUT"


class SchemaMismatchError(Exception):
    code = "SCHEMA_MISMATCH"


def _require(path) -> Path:
    p = Path(path)
    if not p.exists():
        raise MissingInputError(f"input not found: {p}")
    return p


def read_csv(path, required: Sequence[str]) -> tuple[dict, dict]:
    """Return (meta, columns) with columns as numpy arrays keyed by name.

    Numeric columns come back as float arrays; anything non-numeric stays a
    string array. Raises SCHEMA_MISMATCH when a required column is absent.
    """
    p = _require(path)
    meta: dict = {}
    header = None
    rows = []
    with p.open("r", encoding="utf-8") as fh:
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
        raise SchemaMismatchError(f"{p}: no header row")
    missing = [c for c in required if c not in header]
    if missing:
        raise SchemaMismatchError(f"{p}: missing columns {missing} (header={header})")
    columns: dict = {}
    for j, name in enumerate(header):
        raw = [r[j] if j < len(r) else "" for r in rows]
        try:
            columns[name] = np.array([float(v) for v in raw])
        except ValueError:
            columns[name] = np.array(raw)
    return meta, columns


def read_json(path, required: Sequence[str] = ()) -> dict:
    p = _require(path)
    with p.open("r", encoding="utf-8") as fh:
        doc = json.load(fh)
    missing = [k for k in required if k not in doc]
    if missing:
        raise SchemaMismatchError(f"{p}: missing keys {missing}")
    return doc
