"""Tabulate ranked-ballot multiwinner elections and measure committee proportionality."""

__version__ = "0.1.0"
