import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from noisydpc import ChannelConfig
from noisydpc.capacity_engine import (
    achievable_rate,
    alpha_quadratic,
    capacity,
    capacity_rx_only,
    capacity_tx_only,
    capacity_via_determinants,
    fuse_observations,
    mi_u_m1,
    mi_u_y_m2,
    optimal_alpha_closed_form,
    optimal_alpha_numeric,
    reduce_config,
    residual_fraction,
)
from noisydpc.errors import EmptyObservationList, SingularMatrix
from noisydpc.gaussian import build_joint_spec, gaussian_mi

from conftest import log_uniform, random_config
from oracles import exact_alpha_star, exact_capacity_bits, exact_mu, exact_rate

# 1/2 log2(371/61): mu = 6/31 and 1 + P/(mu Q + N0) = 371/61 at the nominal point
NOMINAL_CAPACITY = 0.5 * math.log2(371 / 61)


def half_log2(x):
    return 0.5 * math.log2(x)


class TestResidualFraction:
    def test_nominal_rational(self):
        mu = exact_mu(5, [2, 3])
        assert mu == Fraction(6, 31)
        cfg = ChannelConfig(10, 5, 1, (2,), (3,))
        assert residual_fraction(cfg) == pytest.approx(float(mu), rel=1e-15)
        assert residual_fraction(cfg) == pytest.approx(0.193548, abs=1e-6)

    def test_exact_observation(self):
        assert residual_fraction(ChannelConfig(1, 7, 1, (3,), (0,))) == 0.0

    def test_no_observations(self):
        assert residual_fraction(ChannelConfig(1, 5, 1)) == 1.0

    def test_in_unit_interval(self, rng):
        for _ in range(200):
            mu = residual_fraction(random_config(rng))
            assert 0.0 <= mu <= 1.0


class TestCapacity:
    def test_nominal(self, nominal):
        assert capacity(nominal).value == pytest.approx(NOMINAL_CAPACITY, abs=1e-14)
        assert capacity(nominal).value == pytest.approx(1.3023, abs=5e-5)
        assert capacity(nominal).value == pytest.approx(exact_capacity_bits(10, 5, 1, [2, 3]), abs=1e-13)

    def test_perfect_transmitter_knowledge(self):
        report = capacity(ChannelConfig(10, 5, 1, (0,)))
        assert report.value == pytest.approx(half_log2(11), abs=1e-15)
        assert report.value == pytest.approx(1.7297, abs=5e-5)

    def test_no_knowledge(self):
        # 1/2 log2(1 + 10/6) = 0.70752 bits
        assert capacity(ChannelConfig(10, 5, 1)).value == pytest.approx(half_log2(1 + 10 / 6), abs=1e-15)

    def test_noiseless_channel_with_exact_knowledge_is_unbounded(self):
        assert math.isinf(capacity(ChannelConfig(1, 1, 0, (0,))).value)

    def test_matches_exact_determinant_oracle(self, rng):
        for _ in range(50):
            cfg = random_config(rng, max_per_side=3)
            oracle = exact_capacity_bits(cfg.p, cfg.q, cfg.n0, cfg.noises)
            assert capacity(cfg).value == pytest.approx(oracle, abs=1e-12)

    def test_bounds(self, rng):
        for _ in range(300):
            cfg = random_config(rng)
            c = capacity(cfg).value
            assert half_log2(1 + cfg.p / (cfg.q + cfg.n0)) - 1e-12 <= c <= half_log2(1 + cfg.p / cfg.n0) + 1e-12

    def test_monotone(self, rng):
        for _ in range(200):
            cfg = random_config(rng, min_per_side=1)
            c = capacity(cfg).value
            bump = 1.5
            assert capacity(cfg.with_(p=cfg.p * bump)).value > c
            assert capacity(cfg.with_(n0=cfg.n0 * bump)).value < c
            assert capacity(cfg.with_(q=cfg.q * bump)).value <= c
            tx = list(cfg.tx_noise)
            tx[0] *= bump
            assert capacity(cfg.with_(tx_noise=tx)).value <= c
            rx = list(cfg.rx_noise)
            rx[-1] *= bump
            assert capacity(cfg.with_(rx_noise=rx)).value <= c

    def test_large_interference_limit(self):
        limit = half_log2(1 + 10 / (2 + 1))
        values = [capacity_tx_only(10, q, 1, 2).value for q in (1, 10, 100, 1e4, 1e8)]
        assert all(a > b for a, b in zip(values, values[1:]))
        assert values[-1] == pytest.approx(limit, abs=1e-7)


class TestSingleObservation:
    def test_receiver_only_value(self):
        assert capacity_rx_only(1, 1, 1, 1).value == pytest.approx(half_log2(1 + 1 / 1.5), abs=1e-15)
        assert capacity_rx_only(1, 1, 1, 1).value == pytest.approx(0.3685, abs=5e-5)

    def test_receiver_exact(self):
        assert capacity_rx_only(3, 2, 1, 0).value == pytest.approx(half_log2(1 + 3 / 1), abs=1e-15)

    def test_receiver_matches_general_formula(self, rng):
        for p, q, n0, n2 in log_uniform(rng, (100, 4)):
            mu = n2 / (q + n2)
            general = capacity(ChannelConfig(p, q, n0, (), (n2,))).value
            assert capacity_rx_only(p, q, n0, n2).value == pytest.approx(general, abs=1e-12)
            assert general == pytest.approx(half_log2(1 + p / (mu * q + n0)), abs=1e-12)

    def test_transmitter_only_value(self):
        assert capacity_tx_only(1, 1, 0, 1).value == pytest.approx(half_log2(3), abs=1e-15)

    def test_transmitter_perfect_knowledge(self):
        assert capacity_tx_only(10, 5, 1, 0).value == pytest.approx(half_log2(11), abs=1e-15)

    def test_tx_rx_equivalence(self, rng):
        for p, q, n0, v in log_uniform(rng, (200, 4)):
            assert capacity_tx_only(p, q, n0, v).value == capacity_rx_only(p, q, n0, v).value


class TestAchievableRate:
    def test_quadratic_expansion(self):
        # the alpha-quadratic must equal det Cov(U, Y, M2) for any alpha
        for alpha in (-1.0, 0.0, 0.3, 2.5):
            spec = build_joint_spec(ChannelConfig(10, 5, 1, (2,), (3,)), alpha)
            a, b, c = alpha_quadratic(10, 5, 1, 2, 3)
            det = np.linalg.det(spec.marginal(["U", "Y", "M2"]))
            assert alpha * alpha * a - 2 * alpha * b + c == pytest.approx(det, rel=1e-12)

    def test_alpha_zero_reduces_to_receiver_only(self, rng):
        for p, q, n0, n1, n2 in log_uniform(rng, (100, 5)):
            cfg = ChannelConfig(p, q, n0, (n1,), (n2,))
            assert achievable_rate(cfg, 0.0).value == pytest.approx(capacity_rx_only(p, q, n0, n2).value, abs=1e-12)

    def test_nominal_at_optimum(self, nominal):
        alpha = float(exact_alpha_star(10, 5, 1, 2, 3))
        assert achievable_rate(nominal, alpha).value == pytest.approx(NOMINAL_CAPACITY, abs=1e-12)

    def test_below_capacity_elsewhere(self, nominal):
        c = capacity(nominal).value
        alpha = 150 / 371
        for a in (alpha - 0.1, alpha + 0.01, 0.0, 1.0, -2.0):
            assert achievable_rate(nominal, a).value < c

    def test_matches_exact_oracle(self, rng):
        for _ in range(100):
            p, q, n0, n1, n2 = log_uniform(rng, 5)
            alpha = rng.uniform(-2, 2)
            cfg = ChannelConfig(p, q, n0, (n1,), (n2,))
            assert achievable_rate(cfg, alpha).value == pytest.approx(exact_rate(p, q, n0, n1, n2, alpha), abs=1e-10)

    def test_identity_with_gaussian_core(self, rng):
        for _ in range(100):
            p, q, n0, n1, n2 = log_uniform(rng, 5)
            alpha = rng.uniform(-1, 2)
            cfg = ChannelConfig(p, q, n0, (n1,), (n2,))
            spec = build_joint_spec(cfg, alpha)
            via_core = gaussian_mi(spec, "U", ["Y", "M2"]) - gaussian_mi(spec, "U", "M1")
            assert achievable_rate(cfg, alpha).value == pytest.approx(via_core, abs=1e-10)
            assert mi_u_y_m2(p, q, n0, n1, n2, alpha) == pytest.approx(gaussian_mi(spec, "U", ["Y", "M2"]), abs=1e-10)
            assert mi_u_m1(p, q, n1, alpha) == pytest.approx(gaussian_mi(spec, "U", "M1"), abs=1e-10)

    def test_requires_single_pair(self):
        with pytest.raises(ValueError):
            achievable_rate(ChannelConfig(1, 1, 1, (1, 2), (1,)), 0.1)


class TestOptimalAlpha:
    def test_nominal_closed_form(self):
        assert exact_alpha_star(10, 5, 1, 2, 3) == Fraction(150, 371)
        opt = optimal_alpha_closed_form(10, 5, 1, 2, 3)
        assert opt.alpha_star == pytest.approx(150 / 371, rel=1e-15)
        assert opt.method == "closed_form"
        assert opt.rate_at_alpha_star == pytest.approx(NOMINAL_CAPACITY, abs=1e-12)

    def test_perfect_knowledge_alpha_limit(self):
        for p, n0 in ((10, 1), (1, 3), (0.2, 0.05)):
            assert optimal_alpha_closed_form(p, 5, n0, 1e-12, 3).alpha_star == pytest.approx(p / (p + n0), abs=1e-9)

    def test_exact_receiver_knowledge(self):
        assert optimal_alpha_closed_form(10, 5, 1, 2, 0).alpha_star == 0.0

    def test_numeric_nominal(self):
        opt = optimal_alpha_numeric(10, 5, 1, 2, 3, tol=1e-9)
        assert opt.method == "numeric"
        assert opt.alpha_star == pytest.approx(150 / 371, abs=1e-9)

    def test_numeric_symmetric(self):
        for v in (0.01, 1.0, 50.0):
            assert optimal_alpha_numeric(3, 2, 1, v, v).alpha_star == pytest.approx(
                optimal_alpha_closed_form(3, 2, 1, v, v).alpha_star, abs=1e-9
            )

    def test_zero_interference(self):
        assert optimal_alpha_numeric(3, 0, 1, 2, 2).alpha_star == 0.0
        assert optimal_alpha_closed_form(3, 0, 1, 2, 2).alpha_star == 0.0

    def test_rate_invariant(self, rng):
        for p, q, n0, n1, n2 in log_uniform(rng, (50, 5)):
            for opt in (optimal_alpha_closed_form(p, q, n0, n1, n2), optimal_alpha_numeric(p, q, n0, n1, n2)):
                cfg = ChannelConfig(p, q, n0, (n1,), (n2,))
                assert opt.rate_at_alpha_star == pytest.approx(achievable_rate(cfg, opt.alpha_star).value, abs=1e-9)


class TestFusion:
    def test_equal_pair(self):
        f = fuse_observations([2, 2])
        assert f.weights == (0.5, 0.5)
        assert f.effective_variance == 1.0

    def test_three(self):
        assert Fraction(1) / (1 + Fraction(1, 2) + Fraction(1, 3)) == Fraction(6, 11)
        f = fuse_observations([1, 2, 3])
        assert f.effective_variance == pytest.approx(6 / 11, abs=1e-15)
        assert sum(f.weights) == pytest.approx(1.0, abs=1e-12)

    def test_single(self):
        f = fuse_observations([4.5])
        assert f.weights == (1.0,)
        assert f.effective_variance == 4.5

    def test_exact_observation_takes_all_weight(self):
        f = fuse_observations([2, 0, 3])
        assert f.weights == (0.0, 1.0, 0.0)
        assert f.effective_variance == 0.0

    def test_empty(self):
        with pytest.raises(EmptyObservationList):
            fuse_observations([])

    def test_estimator_error_variance_empirically(self):
        g = np.random.default_rng(4)
        noises = [1.0, 2.0, 3.0]
        s = g.standard_normal(200_000) * 2.0
        obs = [s + g.standard_normal(s.size) * math.sqrt(v) for v in noises]
        f = fuse_observations(noises)
        err = f.combine(obs) - s
        assert err.var() == pytest.approx(6 / 11, rel=0.02)

    def test_reduce_config(self):
        cfg = ChannelConfig(10, 5, 1, (2, 2), (3,))
        red = reduce_config(cfg)
        assert red.tx_noise == (1.0,) and red.rx_noise == (3.0,)
        assert capacity(red).value == pytest.approx(capacity(cfg).value, abs=1e-12)
        assert reduce_config(ChannelConfig(10, 5, 1)) == ChannelConfig(10, 5, 1)

    def test_reduce_preserves_capacity(self, rng):
        for _ in range(200):
            cfg = random_config(rng)
            assert abs(capacity(reduce_config(cfg)).value - capacity(cfg).value) <= 1e-12

    def test_one_side_equals_split(self, rng):
        for _ in range(50):
            cfg = random_config(rng, min_per_side=1)
            all_tx = cfg.with_(tx_noise=cfg.noises, rx_noise=())
            all_rx = cfg.with_(tx_noise=(), rx_noise=cfg.noises)
            c = capacity(cfg).value
            assert capacity(all_tx).value == pytest.approx(c, abs=1e-12)
            assert capacity(all_rx).value == pytest.approx(c, abs=1e-12)

    def test_extra_observation_helps(self, rng):
        for _ in range(100):
            cfg = random_config(rng)
            extra = float(log_uniform(rng))
            for side in ("tx_noise", "rx_noise"):
                more = cfg.with_(**{side: getattr(cfg, side) + (extra,)})
                assert capacity(more).value > capacity(cfg).value


class TestDeterminantPath:
    def test_nominal(self, nominal):
        r = capacity_via_determinants(nominal)
        assert r.path == "determinant"
        assert r.value == pytest.approx(NOMINAL_CAPACITY, abs=1e-12)

    def test_five_distinct_observations(self):
        cfg = ChannelConfig(3.0, 7.0, 0.5, (0.3, 1.7, 4.0), (0.9, 2.2))
        oracle = exact_capacity_bits(cfg.p, cfg.q, cfg.n0, cfg.noises)
        assert capacity_via_determinants(cfg).value == pytest.approx(oracle, abs=1e-12)
        assert capacity(cfg).value == pytest.approx(oracle, abs=1e-12)

    def test_no_observations(self):
        cfg = ChannelConfig(10, 5, 1)
        assert capacity_via_determinants(cfg).value == pytest.approx(half_log2(1 + 10 / 6), abs=1e-14)

    def test_declines_degenerate(self):
        with pytest.raises(SingularMatrix):
            capacity_via_determinants(ChannelConfig(1, 1, 1, (0,), (0,)))

    def test_permutations_across_sides(self):
        noises = [0.5, 1.5, 3.0, 8.0]
        ref = capacity(ChannelConfig(2, 3, 1, (), tuple(noises))).value
        for perm in itertools.permutations(noises):
            for k in range(len(perm) + 1):
                cfg = ChannelConfig(2, 3, 1, perm[:k], perm[k:])
                assert abs(capacity(cfg).value - ref) <= 1e-12
                assert abs(capacity_via_determinants(cfg).value - ref) <= 1e-9
