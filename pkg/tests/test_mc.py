import numpy as np
import pytest

from noisydpc import ChannelConfig
from noisydpc.capacity_engine import achievable_rate, capacity, capacity_rx_only, mi_u_m1, mi_u_y_m2
from noisydpc.errors import SingularSampleCovariance
from noisydpc.gaussian import JointGaussianSpec, build_joint_spec, gaussian_mi, mi_from_cov
from noisydpc.mc import estimate_mi, estimate_rate_gap, verify_tightness

ALPHA_STAR = 150 / 371


def test_independent_pair_is_statistically_zero():
    spec = JointGaussianSpec(("A", "B"), np.diag([1.0, 4.0]))
    est = estimate_mi(spec, "A", "B", 100_000, seed=1)
    assert est.std_error > 0
    assert abs(est.value) < 3 * est.std_error


def test_u_vs_receiver_side(nominal):
    spec = build_joint_spec(nominal, ALPHA_STAR)
    est = estimate_mi(spec, "U", ["Y", "M2"], 1_000_000, seed=2)
    analytic = gaussian_mi(spec, "U", ["Y", "M2"])
    assert analytic == pytest.approx(mi_u_y_m2(10, 5, 1, 2, 3, ALPHA_STAR), abs=1e-12)
    assert abs(est.value - analytic) <= 0.01


def test_u_vs_transmitter_observation(nominal):
    spec = build_joint_spec(nominal, ALPHA_STAR)
    est = estimate_mi(spec, "U", "M1", 1_000_000, seed=3)
    assert abs(est.value - 0.5 * np.log2((10 + ALPHA_STAR**2 * 7) / 10)) <= 0.01
    assert mi_u_m1(10, 5, 2, ALPHA_STAR) == pytest.approx(0.5 * np.log2((10 + ALPHA_STAR**2 * 7) / 10))


def test_rate_gap_at_optimum(nominal):
    est = estimate_rate_gap(nominal, ALPHA_STAR, 1_000_000, seed=4)
    assert abs(est.value - capacity(nominal).value) <= 0.01


def test_rate_gap_without_precoding(nominal):
    est = estimate_rate_gap(nominal, 0.0, 1_000_000, seed=5)
    assert abs(est.value - capacity_rx_only(10, 5, 1, 3).value) <= 0.01


def test_rate_gap_without_interference_tracks_formula():
    # with Q = 0, M1 is pure noise: inflating U by alpha*M1 only costs rate
    cfg = ChannelConfig(10.0, 0.0, 1.0, (2.0,), (3.0,))
    for alpha in (0.0, 0.5):
        est = estimate_rate_gap(cfg, alpha, 200_000, seed=6)
        assert abs(est.value - achievable_rate(cfg, alpha).value) <= 4 * est.std_error + 1e-3


def test_tightness_passes(nominal):
    assert verify_tightness(nominal, 100_000, seed=7).passed


def test_tightness_many_observations():
    cfg = ChannelConfig(2.0, 3.0, 0.5, (1.0, 2.0), (0.5, 4.0))
    est = verify_tightness(cfg, 100_000, seed=8)
    assert est.passed
    assert est.target_label == "I(X;M1,M2,M3,M4)"


def test_tightness_negative_control(nominal):
    spec = build_joint_spec(nominal)
    # replace X by X + S, which leaks the interference into the input
    t = np.eye(spec.dim)
    ix, js = spec.index(["X", "S"])
    t[ix, js] = 1.0
    cov = t @ spec.cov @ t.T
    bad = JointGaussianSpec(spec.names, 0.5 * (cov + cov.T))
    assert not verify_tightness(nominal, 100_000, seed=9, spec=bad).passed


def test_tightness_needs_observations():
    with pytest.raises(ValueError):
        verify_tightness(ChannelConfig(1, 1, 1), 1000, seed=0)


def test_seed_determinism(nominal):
    spec = build_joint_spec(nominal, ALPHA_STAR)
    a = estimate_mi(spec, "U", "M1", 50_000, seed=10)
    b = estimate_mi(spec, "U", "M1", 50_000, seed=10)
    assert a == b
    c = estimate_rate_gap(nominal, ALPHA_STAR, 50_000, seed=10, workers=3)
    d = estimate_rate_gap(nominal, ALPHA_STAR, 50_000, seed=10, workers=1)
    assert c == d


def test_plug_in_exact_on_true_covariance(nominal):
    spec = build_joint_spec(nominal, ALPHA_STAR)
    idx = spec.index(["U", "Y", "M2"])
    cov = spec.cov[np.ix_(idx, idx)]
    assert mi_from_cov(cov, [0], [1, 2]) == pytest.approx(gaussian_mi(spec, "U", ["Y", "M2"]), abs=1e-12)


def test_too_few_samples():
    spec = JointGaussianSpec(("A", "B"), np.eye(2))
    with pytest.raises(ValueError):
        estimate_mi(spec, "A", "B", 2, seed=0)


def test_singular_sample_covariance():
    cfg = ChannelConfig(1.0, 1.0, 1.0, (0.0,), (0.0,))
    with pytest.raises(SingularSampleCovariance):
        estimate_mi(build_joint_spec(cfg), "M1", "M2", 100, seed=0)


@pytest.mark.slow
def test_bias_decays_with_samples():
    spec = JointGaussianSpec(("A", "B"), np.array([[1.0, 0.8], [0.8, 1.0]]))
    truth = gaussian_mi(spec, "A", "B")
    wins = 0
    for rep in range(100):
        small = estimate_mi(spec, "A", "B", 1_000, seed=1000 + rep)
        large = estimate_mi(spec, "A", "B", 1_000_000, seed=5000 + rep)
        wins += abs(large.value - truth) < abs(small.value - truth)
    assert wins >= 95
