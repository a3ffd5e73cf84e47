"""Return panel ingestion."""
from .load_data import ReturnPanel, ingest_csv

__all__ = ['ReturnPanel', 'ingest_csv']
