"""Toolkit for Ba+ hyperfine spectroscopy, isotope-shift analysis, EOM
sideband planning, and trapped-ion molecular dynamics."""

__version__ = "0.1.0"
