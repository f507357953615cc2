"""Two-period cluster randomized crossover trials: estimators, estimands, simulation."""

import json as _json
import os as _os

from ._core import (
    ConfigError,
    IoError,
    NumericalError,
    TrialDataset,
    fit,
    generate_trial as _generate_trial,
    load_trial_csv,
    read_trial_csv_text,
    validate,
    variance,
)
from . import _core


def _as_text(obj):
    return obj if isinstance(obj, str) else _json.dumps(obj)


def analyze(data, estimators, methods=("model", "cr0", "jackknife"), level=0.95):
    return _json.loads(_core.analyze_json(data, list(estimators), list(methods), level))


def estimands(dgp, draws=0, seed=1, tolerance=1e-9):
    return _json.loads(_core.estimands_json(_as_text(dgp), draws, seed, tolerance))


def probability_limit(estimator, dgp, vc, draws=0, seed=1):
    return _core.probability_limit(estimator, _as_text(dgp), tuple(vc), draws, seed)


def generate_trial(dgp, clusters, seed):
    return _generate_trial(_as_text(dgp), clusters, seed)


def simulate(scenario, base_dir=".", replicates=None, seed=None, threads=None):
    """Run a scenario (dict, JSON text or path) and return the summary CSV text."""
    if isinstance(scenario, str) and _os.path.exists(scenario):
        base_dir = _os.path.dirname(_os.path.abspath(scenario))
        with open(scenario) as fh:
            scenario = fh.read()
    return _core.simulate_summary_csv(_as_text(scenario), base_dir, replicates, seed, threads)


__all__ = [
    "ConfigError", "IoError", "NumericalError", "TrialDataset", "analyze", "estimands", "fit",
    "generate_trial", "load_trial_csv", "probability_limit", "read_trial_csv_text", "simulate",
    "validate", "variance",
]
