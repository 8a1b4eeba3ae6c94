"""Traffic-volume gap filling and census-block traffic density."""

__version__ = "0.1.0"
