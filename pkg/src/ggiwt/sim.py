"""Ground-truth scenarios, measurement synthesis and the Monte Carlo harness."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import ggiw_phd, ggiwt_phd
from .common import FilterConfig
from .errors import UnknownScenario
from .metrics import MetricConfig, MetricReport, rms_over_runs, trajectory_distance
from .models import MeasModel, MotionConfig, rotation

FILTERS = ("baseline", "trajectory", "trajectory-no-smoothing")
SCENARIOS = (1, 2)


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    scenario: int = 1
    area: tuple = (-200.0, 200.0, 100.0, 500.0)      # xmin, xmax, ymin, ymax
    duration: int = 60                              # last scan index
    clutter_rate: float = 100.0
    truth_rate: float = 10.0
    semi_axes: tuple = (4.0, 2.0)
    speed: float = 5.0
    motion: MotionConfig = field(default_factory=MotionConfig)
    meas: MeasModel = field(default_factory=MeasModel)
    filter: FilterConfig = field(default_factory=FilterConfig)
    metric: MetricConfig = field(default_factory=MetricConfig)

    @property
    def area_size(self) -> float:
        x0, x1, y0, y1 = self.area
        return (x1 - x0) * (y1 - y0)

    @property
    def n_scans(self) -> int:
        return self.duration + 1

    def filter_config(self) -> FilterConfig:
        """Filter settings with the clutter model matched to this scenario."""
        return replace(self.filter, clutter_rate=self.clutter_rate, clutter_density=1.0 / self.area_size)

    def problems(self):
        out = []
        if self.scenario not in SCENARIOS:
            out.append(f"unknown scenario {self.scenario!r}; expected one of {SCENARIOS}")
        x0, x1, y0, y1 = self.area
        if not (x0 < x1 and y0 < y1):
            out.append("area bounds must satisfy xmin < xmax and ymin < ymax")
        if not (isinstance(self.duration, int) and self.duration > 0):
            out.append("duration must be a positive integer")
        if not self.clutter_rate >= 0:
            out.append("clutter_rate must be non-negative")
        if not self.truth_rate >= 0:
            out.append("truth_rate must be non-negative")
        if not (len(self.semi_axes) == 2 and min(self.semi_axes) > 0):
            out.append("semi_axes must be two positive lengths")
        out += self.motion.problems() + self.meas.problems() + self.filter.problems() + self.metric.problems()
        return out


@dataclass(eq=False)
class GroundTruthObject:
    birth: int
    death: int
    states: np.ndarray      # (death - birth + 1, 5)
    extents: np.ndarray     # (death - birth + 1, 2, 2)
    rate: float

    def alive_at(self, k) -> bool:
        return self.birth <= k <= self.death

    def upto(self, k):
        """The trajectory restricted to scans up to ``k`` (None if not yet born)."""
        if k < self.birth:
            return None
        n = min(k, self.death) - self.birth + 1
        return _Track(self.birth, self.states[:n], self.extents[:n])

    # trajectory protocol used by the metric
    @property
    def birth_time(self):
        return self.birth

    @property
    def means(self):
        return self.states


@dataclass(frozen=True)
class _Track:
    birth_time: int
    means: np.ndarray
    extents: np.ndarray


def aligned_extent(heading, semi_axes):
    a, b = semi_axes
    R = rotation(heading)
    X = R @ np.diag([a * a, b * b]) @ R.T
    return 0.5 * (X + X.T)


def _object(start, headings, cfg: ScenarioConfig):
    """Integrate positions from a heading sequence with the motion model's time step."""
    n = len(headings)
    ts = cfg.motion.Ts
    pos = np.zeros((n, 2))
    pos[0] = start
    for k in range(n - 1):
        pos[k + 1] = pos[k] + ts * cfg.speed * np.array([math.cos(headings[k]), math.sin(headings[k])])
    yaw = np.append(np.diff(headings) / ts, 0.0)
    states = np.column_stack([pos, np.full(n, cfg.speed), headings, yaw])
    extents = np.array([aligned_extent(h, cfg.semi_axes) for h in headings])
    return GroundTruthObject(0, n - 1, states, extents, cfg.truth_rate)


def _ramp(n, start, steps, total):
    """Headings that ramp linearly by ``total`` over ``steps`` scans, first moving
    the position at scan ``start + 1``."""
    k = np.arange(n)
    return total * np.clip(k - start + 1, 0, steps) / steps


def generate_scenario(cfg: ScenarioConfig) -> list:
    """Two objects alive on scans 0..duration.

    Scenario 1 starts them 40 m apart on parallel headings; from scan 20 they
    turn towards each other at 2 degrees per scan and cross at scan 35. Scenario 2 starts
    them 6 m apart; from scan 20 they turn 30 degrees away from each other.
    """
    n = cfg.n_scans
    if cfg.scenario == 1:
        turn = _ramp(n, 20, 15, math.radians(30.0))
        return [_object((-150.0, 320.0), -turn, cfg), _object((-150.0, 280.0), turn, cfg)]
    if cfg.scenario == 2:
        turn = _ramp(n, 20, 10, math.radians(30.0))
        return [_object((-150.0, 303.0), turn, cfg), _object((-150.0, 297.0), -turn, cfg)]
    raise UnknownScenario(f"unknown scenario {cfg.scenario!r}")


def generate_scan(truth, k, cfg: ScenarioConfig, rng) -> np.ndarray:
    """Object measurements ~ N(position, rho X + R(position)) plus uniform Poisson clutter, shuffled."""
    parts = []
    mm = cfg.meas
    for obj in truth:
        if not obj.alive_at(k):
            continue
        i = k - obj.birth
        count = rng.poisson(obj.rate)
        pos = obj.states[i, :2]
        cov = mm.rho * obj.extents[i] + mm.noise_cov(pos)
        parts.append(rng.multivariate_normal(pos, cov, size=count, method="cholesky"))
    n_clutter = rng.poisson(cfg.clutter_rate)
    x0, x1, y0, y1 = cfg.area
    parts.append(np.column_stack([rng.uniform(x0, x1, n_clutter), rng.uniform(y0, y1, n_clutter)]))
    scan = np.concatenate(parts) if parts else np.zeros((0, 2))
    return scan[rng.permutation(len(scan))]


def generate_scans(truth, cfg: ScenarioConfig, seed) -> list:
    rng = np.random.default_rng(seed)
    return [generate_scan(truth, k, cfg, rng) for k in range(cfg.n_scans)]


# -- Monte Carlo ---------------------------------------------------------------

@dataclass(eq=False)
class RunResult:
    reports: dict            # filter -> MetricReport
    final: dict              # filter -> list of EstimatedTrajectory at the last scan


@dataclass(eq=False)
class MonteCarloResult:
    filters: tuple
    per_run: dict            # filter -> list of MetricReport
    rms: dict                # filter -> MetricReport
    final: dict              # filter -> list (per run) of final-scan trajectories


def _truth_upto(truth, k):
    return [t for t in (o.upto(k) for o in truth if o.alive_at(k)) if t is not None]


def run_filters(truth, scans, cfg: ScenarioConfig, filters=FILTERS) -> RunResult:
    """Run the selected filters on one shared measurement sequence and score every scan."""
    fcfg = cfg.filter_config()
    motion, mm, mcfg = cfg.motion, cfg.meas, cfg.metric
    rows = {f: [] for f in filters}
    final = {}
    want_t = any(f.startswith("trajectory") for f in filters)
    g_mix = ggiw_phd.GGIWMixture()
    t_mix = ggiwt_phd.TrajectoryMixture()
    history = []
    for k, scan in enumerate(scans):
        partitions = fcfg.partitions(scan, mm)
        est = {}
        if "baseline" in filters:
            g_mix, estimates = ggiw_phd.step(g_mix, scan, fcfg, motion, mm, partitions)
            history.append(estimates)
            tracks = ggiw_phd.build_labeled_trajectories(history, motion, end_time=k)
            est["baseline"] = [t for t in tracks if t.alive]
        if want_t:
            t_mix, raw, smooth = ggiwt_phd.recursion_step(t_mix, scan, fcfg, motion, mm, partitions)
            est["trajectory"] = smooth
            est["trajectory-no-smoothing"] = raw
        truth_k = _truth_upto(truth, k)
        for f in filters:
            d = trajectory_distance(truth_k, est[f], mcfg, n_scans=k + 1)
            rows[f].append(d + (len(est[f]), len(truth_k)))
            if k == len(scans) - 1:
                final[f] = est[f]
    return RunResult({f: MetricReport.from_rows(rows[f]) for f in filters}, final)


def _one_run(args):
    cfg, filters, seed = args
    truth = generate_scenario(cfg)
    return run_filters(truth, generate_scans(truth, cfg, seed), cfg, filters)


def monte_carlo(cfg: ScenarioConfig, filters=FILTERS, runs: int = 100, base_seed: int = 0,
                workers: int = 1) -> MonteCarloResult:
    """Run ``runs`` independent simulations; run r uses seed base_seed + r."""
    if runs < 1:
        raise ValueError("runs must be at least 1")
    filters = tuple(filters)
    generate_scenario(cfg)          # fail early on an unknown scenario
    jobs = [(cfg, filters, base_seed + r) for r in range(runs)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_one_run, jobs))
    else:
        results = [_one_run(j) for j in jobs]
    per_run = {f: [r.reports[f] for r in results] for f in filters}
    return MonteCarloResult(
        filters, per_run, {f: rms_over_runs(per_run[f]) for f in filters},
        {f: [r.final[f] for r in results] for f in filters})
