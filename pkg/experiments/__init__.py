"""Experiment orchestration and evaluation utilities."""
from .evaluate import check_metrics, error_report, score
from .utils import ensure_dir, load_config

__all__ = ['check_metrics', 'error_report', 'score', 'ensure_dir', 'load_config']
