"""Python bindings for the crossrec cross-session purchase recommender."""

import json as _json
import os as _os

from . import _core
from ._core import (
    ConfigError,
    CrossrecError,
    DataError,
    NumericError,
    apply_post_filter,
    metrics_at_k,
    rank_items,
    weibull_pmf,
    weibull_tail,
)

__all__ = [
    "ConfigError",
    "CrossrecError",
    "DataError",
    "NumericError",
    "apply_post_filter",
    "config_hash",
    "fit_gmm",
    "generate_synth",
    "metrics_at_k",
    "rank_items",
    "run_cli",
    "train_and_evaluate",
    "weibull_pmf",
    "weibull_tail",
    "write_synth",
]


def config_hash(config):
    return _core.config_hash(_json.dumps(config))


def generate_synth(**config):
    return _core.generate_synth(_json.dumps(config))


def write_synth(directory, **config):
    _core.write_synth(_json.dumps(config), _os.fspath(directory))


def fit_gmm(xs):
    return _core.fit_gmm([float(x) for x in xs])


def train_and_evaluate(data_dir, spec, prep=None, k=3):
    report = _core.train_and_evaluate(_os.fspath(data_dir), _json.dumps(spec), _json.dumps(prep or {}), k)
    return _json.loads(report)


def run_cli(*args):
    return _core.run_cli([str(a) for a in args])
