"""Script entry point: one positional argument, a FigureSpec JSON file."""

from __future__ import annotations

import json
import sys

from .figspec import load_spec
from .readers import MissingInputError, SchemaMismatchError
from .render import render


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    if len(argv) != 1 or argv[0] in ("-h", "--help"):
        sys.stderr.write("usage: impact-plot SPEC_JSON\n")
        return 2
    try:
        spec = load_spec(argv[0])
        out = render(spec)
    except (MissingInputError, SchemaMismatchError) as exc:
        sys.stderr.write(json.dumps({"error": exc.code, "message": str(exc)}) + "\n")
        return 1
    print(str(out))
    return 0


if __name__ == "__main__":
    sys.exit(main())
