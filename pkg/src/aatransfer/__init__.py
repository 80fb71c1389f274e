"""Ambiguity-aware cross-lingual transfer of arc-factored dependency parsers."""

__version__ = "0.1.0"
