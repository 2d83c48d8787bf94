"""Price impact estimation for OTC trade/quote tapes."""

__version__ = "0.1.0"
