"""Plain-text rendering of result tables."""
from .builder import ReportBuilder

__all__ = ['ReportBuilder']
