import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import MM, random_case, random_component_params, reduction_mismatch, six_components
from ggiwt import ggiw_phd
from ggiwt.common import FilterConfig, missed_detection
from ggiwt.ggiw_phd import Estimate, GGIWComponent, GGIWMixture
from ggiwt.models import MotionConfig, kinematics_jacobian, predict_kinematics, process_noise
from ggiwt.partitioning import Cell, Partition
from ggiwt.sim import ScenarioConfig, generate_scans, generate_scenario


def test_predict_single_component(rng):
    cfg, motion = FilterConfig(birth=(), p_survival=0.9), MotionConfig()
    p = random_component_params(rng)
    mix = GGIWMixture((GGIWComponent.create(0.8, *p, label=3),), time=0, next_label=4)
    out = ggiw_phd.predict(mix, cfg, motion).components[0]
    F = kinematics_jacobian(p[2], motion)
    assert out.weight == pytest.approx(0.72)
    assert out.label == 3
    assert np.allclose(out.params.kin.mean, predict_kinematics(p[2], motion))
    assert np.allclose(out.params.kin.cov, F @ p[3] @ F.T + process_noise(motion))
    assert out.params.rate.alpha == pytest.approx(p[0] / motion.eta)


@given(st.floats(1.0, 100.0), st.floats(0.1, 10.0), st.floats(0.05, 0.99))
def test_missed_detection_moment_match(alpha, beta, pd):
    q, a, b = missed_detection(alpha, beta, pd)
    w1, w2 = 1 - pd, pd * (beta / (beta + 1)) ** alpha
    assert q == pytest.approx(w1 + w2, rel=1e-12)
    mean = (w1 * alpha / beta + w2 * alpha / (beta + 1)) / q
    ex2 = (w1 * alpha * (alpha + 1) / beta**2 + w2 * alpha * (alpha + 1) / (beta + 1) ** 2) / q
    assert a / b == pytest.approx(mean, rel=1e-9)
    assert a / b**2 == pytest.approx(ex2 - mean**2, rel=1e-6)


def test_detected_update_is_ekf_on_centroid(rng):
    p = random_component_params(rng)
    mix = GGIWMixture((GGIWComponent.create(0.9, *p, label=0),), 0, 1)
    pts = rng.multivariate_normal(p[2][:2] + [1.0, -1.0], 4 * np.eye(2), 8)
    part = Partition((Cell(tuple(range(len(pts)))),))
    out = ggiw_phd.update(mix, pts, [part], FilterConfig(birth=()), MM)
    assert len(out) == 2
    c = out.components[1].params
    a, b, m, P, dof, V = p
    H = np.hstack([np.eye(2), np.zeros((2, 3))])
    R_hat = MM.rho * V / (dof - 6) + MM.noise_cov(m[:2])
    S = H @ P @ H.T + R_hat / len(pts)
    K = P @ H.T @ np.linalg.inv(S)
    eps = pts.mean(axis=0) - m[:2]
    assert np.allclose(c.kin.mean, m + K @ eps, rtol=1e-10, atol=1e-10)
    assert np.allclose(c.kin.cov, P - K @ S @ K.T, rtol=1e-10, atol=1e-10)
    assert c.rate.alpha == a + 8 and c.rate.beta == b + 1 and c.ext.dof == dof + 8


def test_update_weights_cover_partition_hypotheses(rng):
    g, _, scan, parts, cfg = random_case(rng)
    out = ggiw_phd.update(g, scan, parts, cfg, MM)
    # every new label is a birth, every old label survives in its missed copy
    labels = [c.label for c in out.components]
    assert labels[:len(g)] == list(range(len(g)))
    assert all(lab >= len(g) for lab in labels[len(g):] if lab not in range(len(g)))
    assert np.all(out.weights >= 0)


def test_reduction_hand_built():
    mix = six_components()
    cfg = FilterConfig(cap_M=2)
    out = ggiw_phd.reduce(mix, cfg)
    assert [c.label for c in out.components] == [0, 2]
    assert out.components[0].weight == pytest.approx(0.9, abs=1e-12)
    assert reduction_mismatch(mix, cfg) < 1e-12
    assert reduction_mismatch(mix, FilterConfig(cap_M=50)) < 1e-12


@given(st.integers(0, 10_000))
def test_reduction_matches_reference_on_random_mixtures(seed):
    rng = np.random.default_rng(seed)
    comps = []
    for i in range(int(rng.integers(1, 9))):
        a, b, m, P, dof, scale = random_component_params(rng)
        m[:2] = rng.uniform(-6, 6, 2) + [0, 300]
        comps.append(GGIWComponent.create(rng.uniform(1e-4, 1.0), a, rng.choice([b, a * 1.5]), m, P, dof,
                                          scale, label=i))
    cfg = FilterConfig(cap_M=int(rng.integers(1, 5)))
    assert reduction_mismatch(GGIWMixture(tuple(comps), 0, len(comps)), cfg) < 1e-12


def test_extract_threshold_is_strict():
    mix = six_components()
    comps = list(mix.components)
    comps[0] = GGIWComponent(math.log(0.5), comps[0].params, 0)
    comps[1] = GGIWComponent(math.log(0.5000001), comps[1].params, 1)
    est = ggiw_phd.extract(GGIWMixture(tuple(comps)), FilterConfig())
    assert [e.label for e in est] == [1]
    assert est[0].rate == pytest.approx(18.0 / 2.0)


def _est(label, x, k):
    return Estimate(label, 1.0, 10.0, np.array([x, 0.0, 1.0, 0.0, 0.0]), np.eye(2) * (k + 1))


def test_labeled_trajectories_bridge_one_gap_and_split_longer():
    history = [[_est(0, 0, 0)], [], [_est(0, 2, 2), _est(0, 99, 2)], [], [], [_est(0, 5, 5), _est(1, 0, 5)]]
    tracks = ggiw_phd.build_labeled_trajectories(history, MotionConfig())
    assert [(t.birth_time, t.length, t.label, t.alive) for t in tracks] == \
        [(0, 3, 0, False), (5, 1, 0, True), (5, 1, 1, True)]
    # the bridged step is the prediction of the previous estimate
    assert tracks[0].means[1, 0] == pytest.approx(1.0)
    assert tracks[0].means[2, 0] == 2.0


def test_two_object_cardinality():
    sc = ScenarioConfig(scenario=1, duration=15)
    truth = generate_scenario(sc)
    scans = generate_scans(truth, sc, seed=7)
    cfg, motion = sc.filter_config(), sc.motion
    mix = GGIWMixture()
    for scan in scans:
        mix, est = ggiw_phd.step(mix, scan, cfg, motion, sc.meas)
    assert mix.weights.sum() == pytest.approx(2.0, abs=0.2)
    assert len(est) == 2
