"""Python access to the DC tube MPC core."""

import json

from ._dctmpc import (  # noqa: F401
    ArgumentError,
    DataError,
    DcModel,
    Error,
    InitializationError,
    LdiError,
    RestorationError,
    SetupError,
    SolverError,
    TerminalDesignError,
    box_vertices,
    dp_gains,
    load_model,
    pvtol_accelerations,
    pvtol_step,
    save_model,
    spearman,
)
from . import _dctmpc


def fit_pvtol(kind="poly", samples=20000, degree=6, seed=1):
    """Returns (model, report dict)."""
    model, report = _dctmpc.fit_pvtol(kind, samples, degree, seed)
    return model, json.loads(report)


def pvtol_terminal(model, alpha=1.0):
    return json.loads(_dctmpc.pvtol_terminal(model, alpha))


def run_experiment(config, model=None):
    """config is a dict with ExperimentConfig fields; returns the summary dict."""
    return json.loads(_dctmpc.run_experiment(json.dumps(config), model))
