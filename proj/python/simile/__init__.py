"""Simulated interval-censored likelihoods with a pseudo-marginal sampler."""

import json
import os

import numpy as np

from . import _simile
from ._simile import ConfigError, NumericalError, figure_data, grid_json

__all__ = [
    "ConfigError",
    "NumericalError",
    "emulate_run",
    "emulate_train",
    "figure_data",
    "generate",
    "grid",
    "run",
    "sample",
    "simile_loglik",
    "simulate",
    "tune",
]


def _config_args(config, base_dir):
    if isinstance(config, (str, os.PathLike)):
        with open(config, encoding="utf-8") as f:
            text = f.read()
        return text, os.path.dirname(os.path.abspath(config))
    return json.dumps(config), os.path.abspath(base_dir or os.getcwd())


def _rows(data):
    a = np.asarray(data, dtype=float)
    return a.reshape(-1, 1) if a.ndim == 1 else a


def simulate(model, theta, n, seed=1, workers=1):
    return _simile.simulate(model, list(theta), n, seed, workers)


def simile_loglik(model, theta, data, n_int, n_sim, seed=1, eval_id=0, workers=1):
    return _simile.simile_loglik(model, list(theta), _rows(data), n_int, n_sim, seed, eval_id, workers)


def grid(model, data, n_int):
    return json.loads(grid_json(model, _rows(data), n_int))


def sample(loglik, priors, n_burn, n_keep, initial, scales=(), seed=1):
    """loglik(theta, eval_id) -> float; priors as [{"family", "m", "s"}, ...]."""
    return _simile.sample(loglik, json.dumps(priors), n_burn, n_keep, list(initial), list(scales), seed)


def generate(config, base_dir=None):
    _simile.generate(*_config_args(config, base_dir))


def run(config, base_dir=None):
    return _simile.run(*_config_args(config, base_dir))


def tune(config, base_dir=None):
    return _simile.tune(*_config_args(config, base_dir))


def emulate_train(config, base_dir=None):
    _simile.emulate_train(*_config_args(config, base_dir))


def emulate_run(config, base_dir=None):
    return _simile.emulate_run(*_config_args(config, base_dir))
