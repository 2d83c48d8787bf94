"""Presentation layer for otcimpact pipeline artifacts.

Reads the CLI's CSV/JSON output files and renders one PNG per figure spec.
Never recomputes statistics: every number drawn comes from an input file,
so figures stay auditable against the pipeline outputs.
"""

__version__ = "0.1.0"
