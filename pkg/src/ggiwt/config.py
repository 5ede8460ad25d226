"""JSON configuration: defaults, merging, validation and the effective-config dump.

A config file has the sections ``run``, ``scenario``, ``motion``,
``measurement``, ``filter`` and ``metric``; every key is optional. The
effective configuration written next to each run's results has the same
layout, so feeding it back through ``--config`` reproduces the run.
"""
from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass

import numpy as np

from .common import BirthTemplate, FilterConfig
from .distributions import GammaParams, GaussianParams, GGIWParams, InverseWishartParams
from .errors import ConfigError
from .metrics import MetricConfig
from .models import MeasModel, MotionConfig
from .sim import FILTERS, SCENARIOS, ScenarioConfig

FILTER_CHOICES = FILTERS + ("all",)


@dataclass(frozen=True)
class RunSettings:
    filters: str = "all"
    runs: int = 100
    seed: int = 0
    workers: int = 1

    @property
    def filter_names(self) -> tuple:
        return FILTERS if self.filters == "all" else (self.filters,)

    def problems(self):
        out = []
        if self.filters not in FILTER_CHOICES:
            out.append(f"filters must be one of {', '.join(FILTER_CHOICES)}")
        if not (isinstance(self.runs, int) and self.runs >= 1):
            out.append("runs must be an integer >= 1")
        if not isinstance(self.seed, int) or self.seed < 0:
            out.append("seed must be a non-negative integer")
        if not (isinstance(self.workers, int) and self.workers >= 1):
            out.append("workers must be an integer >= 1")
        return out


@dataclass(frozen=True, eq=False)
class Settings:
    run: RunSettings
    scenario: ScenarioConfig

    def problems(self):
        return self.run.problems() + self.scenario.problems()


_SCENARIO_KEYS = ("id", "area", "duration", "clutter_rate", "truth_rate", "semi_axes", "speed")
_MOTION_KEYS = ("Ts", "sigma_v", "sigma_omega", "n_e", "eta", "tau_ext")
_MEAS_KEYS = ("sigma_r", "sigma_phi", "rho")
_FILTER_KEYS = ("p_survival", "p_detect", "prune_T", "merge_U", "cap_M", "extract_threshold",
                "gate", "clutter_all_cells", "eps_grid", "l_scan", "birth")
_METRIC_KEYS = ("c", "p", "switch_penalty")
_RUN_KEYS = ("filters", "runs", "seed", "workers")
_BIRTH_KEYS = ("weight", "alpha", "beta", "mean", "cov", "dof", "scale")
SECTIONS = {"run": _RUN_KEYS, "scenario": _SCENARIO_KEYS, "motion": _MOTION_KEYS,
            "measurement": _MEAS_KEYS, "filter": _FILTER_KEYS, "metric": _METRIC_KEYS}


def _birth_to_dict(b: BirthTemplate) -> dict:
    p = b.params
    return {"weight": b.weight, "alpha": p.rate.alpha, "beta": p.rate.beta,
            "mean": p.kin.mean.tolist(), "cov": p.kin.cov.tolist(),
            "dof": p.ext.dof, "scale": p.ext.scale.tolist()}


def _birth_from_dict(d: dict) -> BirthTemplate:
    params = GGIWParams(GammaParams(float(d["alpha"]), float(d["beta"])),
                        GaussianParams(np.array(d["mean"], dtype=float), np.array(d["cov"], dtype=float)),
                        InverseWishartParams(float(d["dof"]), np.array(d["scale"], dtype=float)))
    return BirthTemplate(float(d["weight"]), params)


def default_dict() -> dict:
    return to_dict(Settings(RunSettings(), ScenarioConfig()))


def to_dict(s: Settings) -> dict:
    sc = s.scenario
    f, m, mm, mc = sc.filter, sc.motion, sc.meas, sc.metric
    return {
        "run": {k: getattr(s.run, k) for k in _RUN_KEYS},
        "scenario": {"id": sc.scenario, "area": list(sc.area), "duration": sc.duration,
                     "clutter_rate": sc.clutter_rate, "truth_rate": sc.truth_rate,
                     "semi_axes": list(sc.semi_axes), "speed": sc.speed},
        "motion": {k: getattr(m, k) for k in _MOTION_KEYS},
        "measurement": {k: getattr(mm, k) for k in _MEAS_KEYS},
        "filter": {**{k: getattr(f, k) for k in _FILTER_KEYS if k not in ("birth", "eps_grid")},
                   "eps_grid": None if f.eps_grid is None else list(f.eps_grid),
                   "birth": [_birth_to_dict(b) for b in f.birth]},
        "metric": {k: getattr(mc, k) for k in _METRIC_KEYS},
    }


def merge(base: dict, override: dict) -> dict:
    """Recursive dict merge; ``override`` wins, lists are replaced wholesale."""
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _unknown_keys(raw: dict):
    out = []
    for section, value in raw.items():
        if section not in SECTIONS:
            out.append(f"unknown config section {section!r}")
        elif not isinstance(value, dict):
            out.append(f"config section {section!r} must be an object")
        else:
            out += [f"unknown key {section}.{k}" for k in value if k not in SECTIONS[section]]
    return out


def from_dict(raw: dict) -> Settings:
    """Build settings from a (possibly partial) dict; raises ConfigError listing every problem."""
    problems = _unknown_keys(raw)
    if problems:
        raise ConfigError(problems)
    d = merge(default_dict(), raw)
    try:
        births = tuple(_birth_from_dict(b) for b in d["filter"]["birth"])
    except (KeyError, TypeError, ValueError) as exc:
        problems.append(f"invalid birth template: {exc}")
        births = ()
    try:
        fd = d["filter"]
        sd = d["scenario"]
        filt = FilterConfig(**{k: fd[k] for k in _FILTER_KEYS if k not in ("birth", "eps_grid")},
                            eps_grid=None if fd["eps_grid"] is None else tuple(fd["eps_grid"]),
                            birth=births)
        motion = MotionConfig(**d["motion"])
        scenario = ScenarioConfig(
            scenario=sd["id"], area=tuple(sd["area"]), duration=sd["duration"],
            clutter_rate=sd["clutter_rate"], truth_rate=sd["truth_rate"],
            semi_axes=tuple(sd["semi_axes"]), speed=sd["speed"], motion=motion,
            meas=MeasModel(**d["measurement"]), filter=filt, metric=MetricConfig(**d["metric"]))
        settings = Settings(RunSettings(**d["run"]), scenario)
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise ConfigError(problems + [f"invalid configuration value: {exc}"]) from None
    if not births:
        problems.append("at least one birth template is required")
    problems += settings.problems()
    if problems:
        raise ConfigError(problems)
    return settings


def load(path=None, overrides: dict | None = None) -> Settings:
    raw = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError([f"cannot read config {path}: {exc.strerror}"]) from None
        except json.JSONDecodeError as exc:
            raise ConfigError([f"config {path} is not valid JSON: {exc}"]) from None
        if not isinstance(raw, dict):
            raise ConfigError(["config root must be a JSON object"])
    return from_dict(merge(raw, overrides or {}))


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else str(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def dumps(s: Settings) -> str:
    return json.dumps(_clean(to_dict(s)), indent=2, sort_keys=False) + "\n"


__all__ = ["RunSettings", "Settings", "SCENARIOS", "FILTER_CHOICES", "load", "from_dict", "to_dict",
           "dumps", "merge", "default_dict"]
