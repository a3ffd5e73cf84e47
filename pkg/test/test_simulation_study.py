"""
Scaled-down reproductions of the simulation study. Each takes minutes;
deselect with -m "not slow".
"""
import sys
import os
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import pytest

from experiments.pipelines import pipeline_preset
from experiments.run_experiment import ExperimentConfig, FactorCountConfig, run_experiment, run_factor_count_experiment
from models import scenario_preset

pytestmark = pytest.mark.slow


def _mean_error(table, pipeline, metric="sigma0_max"):
    row = table[(table["pipeline"] == pipeline) & (table["metric"] == metric)]
    assert len(row) == 1
    return float(row["mean"].iloc[0])


def test_max_norm_error_shrinks_at_root_n():
    errors = {}
    for n in (100, 400):
        cfg = ExperimentConfig(
            scenario=scenario_preset("I", n=n, d=100, seed=0),
            pipelines=[pipeline_preset("POET-TME")],
            reps=100,
            metrics=["sigma0_max"],
            seed=1,
            threads=4,
        )
        result = run_experiment(cfg)
        assert result.failures["POET-TME"] == 0
        errors[n] = _mean_error(result.table, "POET-TME")
    assert 0.40 <= errors[400] / errors[100] <= 0.65


def test_heavy_tails_favor_the_robust_pipeline():
    cfg = ExperimentConfig(
        scenario=scenario_preset("III", n=100, d=200, seed=0),
        pipelines=[pipeline_preset(name) for name in ("SAMPLE", "POET-TME", "RegTME")],
        reps=50,
        metrics=["sigma0_max"],
        seed=2,
        threads=4,
    )
    table = run_experiment(cfg).table
    tme = _mean_error(table, "POET-TME")
    assert tme <= 0.7 * _mean_error(table, "SAMPLE")
    assert tme < _mean_error(table, "RegTME")


def test_gr_recovers_three_factors():
    cfg = FactorCountConfig(
        scenario=scenario_preset("I", n=250, d=400, seed=0),
        d_grid=[400],
        reps=100,
        methods=["GR"],
        seed=3,
        threads=4,
    )
    table = run_factor_count_experiment(cfg)
    hit = table[(table["method"] == "GR") & (table["m_hat"] == 3)]["frequency"].iloc[0]
    assert hit >= 0.95
