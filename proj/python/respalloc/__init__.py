"""Learning responsibility allocations for multi-agent CBF safety filters.

Thin Python layer over the C++ core. Functions that take or return JSON in
the core accept and return plain dictionaries here.
"""

import json as _json

from . import _core
from ._core import (
    CbfLinearConstraint,
    CheckpointError,
    FilterError,
    FilterJacobians,
    FilterProblem,
    FilterSolution,
    FilterWeights,
    InteractionSample,
    ResponsibilityModel,
    TrainingError,
    TrajectoryFormatError,
    active_fraction,
    augment,
    differentiate_filter,
    generate_synthetic,
    generate_weaving,
    init_model,
    kkt_residual,
    load_checkpoint,
    save_checkpoint,
    save_trajectories,
    solve_filter,
)

__all__ = [
    "CbfLinearConstraint",
    "CheckpointError",
    "FilterError",
    "FilterJacobians",
    "FilterProblem",
    "FilterSolution",
    "FilterWeights",
    "InteractionSample",
    "ResponsibilityModel",
    "Scenario",
    "TrainingError",
    "TrajectoryFormatError",
    "active_fraction",
    "augment",
    "differentiate_filter",
    "fit",
    "generate_synthetic",
    "generate_weaving",
    "init_model",
    "kkt_residual",
    "load_checkpoint",
    "load_trajectories",
    "loss",
    "loss_and_gradient",
    "make_scenario",
    "save_checkpoint",
    "save_trajectories",
    "solve_filter",
    "train_config",
]

Scenario = _core.Scenario


def make_scenario(kind, **params):
    """Scenario by name ("synthetic-2agent", "synthetic-6agent", "weaving")
    with optional parameter overrides such as beta1=0.0."""
    return _core.Scenario(_json.dumps({"kind": kind, "params": params}))


def train_config(**overrides):
    return _json.loads(_core.train_config(_json.dumps(overrides)))


def loss(batch, model, scenario, **config):
    return _core.loss(batch, model, scenario, _json.dumps(config))


def loss_and_gradient(batch, model, scenario, **config):
    return _core.loss_and_gradient(batch, model, scenario, _json.dumps(config))


def fit(data, model, scenario, **config):
    """Train `model` in place; returns the training report as a dict."""
    return _json.loads(_core.fit(data, model, scenario, _json.dumps(config)))


def load_trajectories(path):
    """Returns (header config dict, scenario name, samples)."""
    config, name, samples = _core.load_trajectories(str(path))
    return _json.loads(config), name, samples
