"""Figure specifications: what to draw, from which files, to where."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

from .readers import MissingInputError, SchemaMismatchError


class FigureKind(enum.Enum):
    #: measured lag curve with its stretched-exponential fit overlaid
    LAG_CURVE_FIT = "lag_curve_fit"
    #: propagator with its theoretical bound band, optional corrected overlay
    PROPAGATOR_BOUNDS = "propagator_bounds"
    #: rank-grouped imbalance/return profile with a slope-1/3 guide
    IMBALANCE_PROFILE = "imbalance_profile"
    #: per-window effective order count and response level
    MONTHLY_STATS = "monthly_stats"
    #: per-window cumulative sign autocorrelation curves
    MONTHLY_CUM_AUTOCORR = "monthly_cum_autocorr"
    #: per-category propagators with per-category bound bands
    CATEGORY_PROPAGATORS = "category_propagators"
    #: mean-normalized size distributions on a log scale
    SIZE_DISTRIBUTIONS = "size_distributions"


#: required input names per kind (optional ones in comments)
REQUIRED_INPUTS = {
    FigureKind.LAG_CURVE_FIT: ("curve", "fit"),
    FigureKind.PROPAGATOR_BOUNDS: ("propagator", "bounds"),  # optional: corrected
    FigureKind.IMBALANCE_PROFILE: ("profile",),
    FigureKind.MONTHLY_STATS: ("windowed",),
    FigureKind.MONTHLY_CUM_AUTOCORR: ("curves",),
    FigureKind.CATEGORY_PROPAGATORS: ("curves", "bounds"),
    FigureKind.SIZE_DISTRIBUTIONS: ("sizes",),
}


@dataclass(frozen=True)
class FigureSpec:
    kind: FigureKind
    inputs: Mapping[str, Path]
    output: Path

    def __post_init__(self):
        object.__setattr__(self, "inputs",
                           {k: Path(v) for k, v in dict(self.inputs).items()})
        object.__setattr__(self, "output", Path(self.output))
        missing = [name for name in REQUIRED_INPUTS[self.kind]
                   if name not in self.inputs]
        if missing:
            raise SchemaMismatchError(f"spec lacks inputs {missing} for {self.kind.value}")
        for name, path in self.inputs.items():
            if not path.exists():
                raise MissingInputError(f"input '{name}' not found: {path}")


def load_spec(path) -> FigureSpec:
    """Parse a FigureSpec JSON: {kind, inputs: {name: path}, output}.

    Relative input/output paths resolve against the spec file's directory.
    """
    spec_path = Path(path)
    if not spec_path.exists():
        raise MissingInputError(f"spec not found: {spec_path}")
    with spec_path.open("r", encoding="utf-8") as fh:
        data = json.load(fh)
    for key in ("kind", "inputs", "output"):
        if key not in data:
            raise SchemaMismatchError(f"spec lacks '{key}'")
    try:
        kind = FigureKind(data["kind"])
    except ValueError:
        raise SchemaMismatchError(f"unknown figure kind: {data['kind']!r}") from None
    base = spec_path.parent
    inputs = {name: (base / p if not Path(p).is_absolute() else Path(p))
              for name, p in data["inputs"].items()}
    out = Path(data["output"])
    output = base / out if not out.is_absolute() else out
    return FigureSpec(kind=kind, inputs=inputs, output=output)
