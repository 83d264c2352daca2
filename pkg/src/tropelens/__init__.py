"""Genderedness scoring and analysis of trope wiki corpora."""

__version__ = "0.1.0"
