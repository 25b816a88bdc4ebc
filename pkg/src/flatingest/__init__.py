"""Automated ingestion of complex comma-separated flat files."""

__version__ = "0.1.0"
