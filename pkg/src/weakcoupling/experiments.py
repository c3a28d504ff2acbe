"""Experiment registry used by the CLI.

An experiment is a function ``run(cfg) -> (report, extra)`` where ``cfg`` is
a resolved configuration dict and ``extra`` maps additional CSV file stems to
their text. Plugins call :func:`register` with a defaults section.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import config as _config
from .hierarchy import chaos_experiment, consistency_experiment
from .kernel import kernel_convergence_study
from .landau import landau_q_report
from .nbody import nbody_run
from .potential import load_potential
from .profiles import InitialData, TestFunction
from .report import ExperimentReport
from .twobody import scatter_experiment


@dataclass(frozen=True)
class Experiment:
    name: str
    description: str
    run: Callable


_REGISTRY: dict[str, Experiment] = {}


def register(name: str, description: str, defaults: dict | None = None):
    """Decorator adding ``run`` to the registry; ``defaults`` becomes its config section."""

    def deco(fn):
        if name in _REGISTRY:
            raise ValueError(f"experiment {name!r} already registered")
        _REGISTRY[name] = Experiment(name, description, fn)
        if name not in _config.DEFAULTS:
            _config.DEFAULTS[name] = dict(defaults or {})
        return fn

    return deco


def unregister(name: str):
    _REGISTRY.pop(name, None)
    if name not in _BUILTINS:
        _config.DEFAULTS.pop(name, None)


def get(name: str) -> Experiment:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown experiment {name!r}; known: {', '.join(_REGISTRY)}") from None


def list_experiments():
    return list(_REGISTRY.values())


def _pot(cfg):
    return load_potential(cfg["potential"])


@register("kernel-limit", "time-truncated scattering kernel K_eps(w) against the Landau matrix a(w)")
def _kernel_limit(cfg):
    rep = kernel_convergence_study(cfg["w"], cfg["eps_ladder"], cfg["tau"], _pot(cfg),
                                   tuple(cfg["resolution"]), cfg["s_steps_per_unit"],
                                   cfg["trajectory"], cfg["check_quadrature"])
    rep.checks["smallest_eps_within_tolerance"] = rep.rows[-1]["frob_err_rel"] <= cfg["tolerance"]
    return rep, {}


@register("landau-q", "conservation moments and Maxwellian defect of the grid Landau operator")
def _landau_q(cfg):
    return landau_q_report(cfg["b"], cfg["drift"], cfg["extent"], cfg["points"],
                           cfg["stencil"], cfg["A"]), {}


@register("scatter", "two-body scattering events against the interaction-time and deflection bounds")
def _scatter(cfg):
    return scatter_experiment(cfg["eps"], cfg["n_events"], cfg["seed"], cfg["speed_span"],
                              cfg["dt_factor"], _pot(cfg)), {}


@register("nbody-run", "chaotic N-body ensemble: energy/momentum time series and velocity marginal")
def _nbody(cfg):
    rep, marg = nbody_run(cfg["N"], cfg["t_final"], cfg["dt_factor"], cfg["seed"],
                          InitialData.maxwellian(cfg["b"]), np.asarray(cfg["bins"], dtype=float),
                          cfg["record_every"], _pot(cfg))
    return rep, {"marginal": ExperimentReport("marginal", marg).to_csv()}


@register("consistency", "first-order particle pairing <u, g_1> against the Landau pairing on an eps ladder")
def _consistency(cfg):
    return consistency_experiment(InitialData.from_config(cfg["f0"]), TestFunction.from_config(cfg["u"]),
                                  cfg["t"], cfg["eps_ladder"], cfg["n_samples"], cfg["seed"],
                                  _pot(cfg), cfg["dt_factor"], cfg["reference"]), {}


@register("chaos", "two-particle pairing: leading terms vs tensorised Landau prediction, cross-term bound")
def _chaos(cfg):
    return chaos_experiment(InitialData.from_config(cfg["f0"]), TestFunction.from_config(cfg["u"]),
                            TestFunction.from_config(cfg["u2"]), cfg["t"], cfg["eps_ladder"],
                            cfg["n_samples"], cfg["seed"], _pot(cfg), cfg["dt_factor"],
                            cfg["reference"], cfg["slope_target"], cfg["slope_tol"]), {}


_BUILTINS = frozenset(_REGISTRY)
