"""Capacity of the Gaussian channel with noisy interference knowledge at
either or both ends, plus the single-auxiliary achievable rate R(alpha).

All rates are in bits per channel use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Literal, Sequence

from .channel import ChannelConfig
from .errors import BracketFailure, DegenerateDenominator, EmptyObservationList
from .gaussian import build_joint_spec, gaussian_mi

Path = Literal["closed_form", "determinant", "monte_carlo", "optimizer"]

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class RateReport:
    value: float
    path: Path
    config: ChannelConfig | None = None
    detail: dict[str, Any] = field(default_factory=dict)

    def __float__(self):
        return self.value


@dataclass(frozen=True)
class AlphaOptimum:
    alpha_star: float
    rate_at_alpha_star: float
    method: Literal["closed_form", "numeric"]


@dataclass(frozen=True)
class FusionResult:
    """Inverse-variance (ML) combination of independent observations of S."""

    weights: tuple[float, ...]
    effective_variance: float

    def combine(self, observations):
        """Apply the weights to observation vectors stacked along axis 0."""
        total = 0.0
        for w, m in zip(self.weights, observations):
            total = total + w * m
        return total


def _half_log2_1p(snr: float) -> float:
    if math.isinf(snr):
        return math.inf
    return 0.5 * math.log1p(snr) / math.log(2.0)


def residual_fraction(cfg: ChannelConfig) -> float:
    """Fraction mu of the interference power that survives every observation.

    ``mu = 1 / (1 + sum_l Q/N_l)`` over the observations at both ends; an
    exact observation (N_l = 0) gives mu = 0, no observations give mu = 1.
    """
    if any(v == 0 for v in cfg.noises):
        return 0.0
    if cfg.q == 0:
        return 1.0
    gain = math.fsum(cfg.q / v for v in cfg.noises)
    return 1.0 / (1.0 + gain)


def _awgn_capacity(p, residual, n0):
    denom = residual + n0
    if denom == 0:
        return math.inf
    return _half_log2_1p(p / denom)


def capacity(cfg: ChannelConfig) -> RateReport:
    mu = residual_fraction(cfg)
    value = _awgn_capacity(cfg.p, mu * cfg.q, cfg.n0)
    return RateReport(value, "closed_form", cfg, {"mu": mu})


def capacity_rx_only(p, q, n0, n2) -> RateReport:
    # residual interference after MMSE cancellation at the receiver: Q*N2/(Q+N2)
    residual = 0.0 if q + n2 == 0 else q * (n2 / (q + n2))
    value = _awgn_capacity(p, residual, n0)
    return RateReport(value, "closed_form", ChannelConfig(p, q, n0, rx_noise=(n2,)))


def capacity_tx_only(p, q, n0, n1) -> RateReport:
    residual = 0.0 if q + n1 == 0 else q * (n1 / (q + n1))
    value = _awgn_capacity(p, residual, n0)
    return RateReport(value, "closed_form", ChannelConfig(p, q, n0, tx_noise=(n1,)))


def _single_pair(cfg: ChannelConfig) -> tuple[float, float]:
    if len(cfg.tx_noise) != 1 or len(cfg.rx_noise) != 1:
        raise ValueError(
            "expected exactly one transmitter and one receiver observation; "
            "use reduce_config() for multi-observation channels"
        )
    return cfg.tx_noise[0], cfg.rx_noise[0]


def alpha_quadratic(p, q, n0, n1, n2) -> tuple[float, float, float]:
    """Coefficients (a, b, c) of a*alpha^2 - 2*b*alpha + c.

    This is the determinant of Cov(U, Y, M2) up to the factor relating it to
    R(alpha); R is maximal where the quadratic is minimal.
    """
    a = q * (p + n0) * (n1 + n2) + (q + p + n0) * n1 * n2
    b = q * p * n2
    c = p * (q * n0 + q * n2 + n0 * n2)
    return a, b, c


def _rate_from_quadratic(p, q, n0, n2, quad):
    num = p * ((q + p + n0) * (q + n2) - q * q)
    if not quad > 0 or not num > 0:
        raise DegenerateDenominator(f"log arguments must be positive (numerator {num}, quadratic {quad})")
    return 0.5 * (math.log2(num) - math.log2(quad))


def achievable_rate(cfg: ChannelConfig, alpha: float) -> RateReport:
    """R(alpha) = I(U;Y,M2) - I(U;M1) for U = X + alpha*M1, in closed form.

    Far from the optimum this difference can be negative; the raw value is
    returned.
    """
    n1, n2 = _single_pair(cfg)
    a, b, c = alpha_quadratic(cfg.p, cfg.q, cfg.n0, n1, n2)
    quad = alpha * alpha * a - 2.0 * alpha * b + c
    value = _rate_from_quadratic(cfg.p, cfg.q, cfg.n0, n2, quad)
    return RateReport(value, "closed_form", cfg, {"alpha": alpha})


def mi_u_m1(p, q, n1, alpha) -> float:
    """I(U;M1) in bits."""
    return 0.5 * math.log2((p + alpha * alpha * (q + n1)) / p)


def mi_u_y_m2(p, q, n0, n1, n2, alpha) -> float:
    """I(U;Y,M2) in bits, as Var(U)*det Cov(Y,M2) / det Cov(U,Y,M2)."""
    var_u = p + alpha * alpha * (q + n1)
    det_ym = (p + q + n0) * (q + n2) - q * q
    cuy = p + alpha * q
    cum = alpha * q
    vy = p + q + n0
    vm = q + n2
    det_uym = (
        var_u * (vy * vm - q * q)
        - cuy * (cuy * vm - q * cum)
        + cum * (cuy * q - vy * cum)
    )
    return 0.5 * math.log2(var_u * det_ym / det_uym)


def optimal_alpha_closed_form(p, q, n0, n1, n2) -> AlphaOptimum:
    a, b, _ = alpha_quadratic(p, q, n0, n1, n2)
    alpha = 0.0 if q == 0 or a == 0 else b / a
    cfg = ChannelConfig(p, q, n0, (n1,), (n2,))
    return AlphaOptimum(alpha, achievable_rate(cfg, alpha).value, "closed_form")


def golden_section_min(f, lo, hi, tol=1e-6, max_iter=500):
    """Minimize a unimodal ``f`` on [lo, hi]; returns the final bracket."""
    x1 = hi - INV_PHI * (hi - lo)
    x2 = lo + INV_PHI * (hi - lo)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - INV_PHI * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + INV_PHI * (hi - lo)
            f2 = f(x2)
    return lo, hi


def _parabolic_vertex(f, lo, hi):
    mid = 0.5 * (lo + hi)
    fl, fm, fh = f(lo), f(mid), f(hi)
    curv = fl - 2.0 * fm + fh
    if not curv > 0:
        return mid
    # vertex of the parabola through three equally spaced points
    return mid + 0.5 * (hi - lo) * 0.5 * (fl - fh) / curv


def optimal_alpha_numeric(p, q, n0, n1, n2, tol=1e-9, bracket=(-10.0, 10.0)) -> AlphaOptimum:
    """Locate alpha* by derivative-free minimization of the alpha-quadratic.

    Golden-section search narrows the bracket; once it is narrow enough for
    the curvature to dominate rounding, a three-point parabolic step lands
    on the vertex. Comparing function values alone cannot resolve the
    minimizer of a flat quadratic much below sqrt(machine epsilon).
    """
    if q == 0:
        alpha = 0.0
    else:
        a, b, c = alpha_quadratic(p, q, n0, n1, n2)

        def f(x):
            return (x * x * a - 2.0 * x * b + c) / c

        lo0, hi0 = bracket
        lo, hi = golden_section_min(f, lo0, hi0, tol=1e-3)
        if lo <= lo0 or hi >= hi0:
            raise BracketFailure(f"minimum not interior to [{lo0}, {hi0}]")
        half = 0.5 * (hi - lo)
        alpha = _parabolic_vertex(f, lo, hi)
        for _ in range(8):
            refined = _parabolic_vertex(f, alpha - half, alpha + half)
            done = abs(refined - alpha) <= tol
            alpha = refined
            if done:
                break
    cfg = ChannelConfig(p, q, n0, (n1,), (n2,))
    return AlphaOptimum(alpha, achievable_rate(cfg, alpha).value, "numeric")


def fuse_observations(noise_variances: Sequence[float]) -> FusionResult:
    """ML estimate of S from independent observations S + Z_l.

    The weights are proportional to 1/N_l and the estimation error has
    variance 1 / sum(1/N_l). An exact observation (N_l = 0) takes all the
    weight.
    """
    noises = [float(v) for v in noise_variances]
    if not noises:
        raise EmptyObservationList("need at least one observation to fuse")
    if any(v < 0 for v in noises):
        raise ValueError("noise variances must be >= 0")
    if 0.0 in noises:
        first = noises.index(0.0)
        return FusionResult(tuple(1.0 if i == first else 0.0 for i in range(len(noises))), 0.0)
    precision = [1.0 / v for v in noises]
    total = math.fsum(precision)
    return FusionResult(tuple(w / total for w in precision), 1.0 / total)


def reduce_config(cfg: ChannelConfig) -> ChannelConfig:
    """Replace each side's observations with its single fused estimate."""
    tx = (fuse_observations(cfg.tx_noise).effective_variance,) if cfg.tx_noise else ()
    rx = (fuse_observations(cfg.rx_noise).effective_variance,) if cfg.rx_noise else ()
    return cfg.with_(tx_noise=tx, rx_noise=rx)


def capacity_via_determinants(cfg: ChannelConfig) -> RateReport:
    """I(X; Y, M1..Mk) evaluated from log-determinants of the joint law.

    Raises SingularMatrix when the joint covariance is degenerate (e.g. an
    observation with zero noise); use ``capacity`` for those.
    """
    spec = build_joint_spec(cfg)
    value = gaussian_mi(spec, "X", ("Y",) + cfg.tx_labels + cfg.rx_labels)
    return RateReport(value, "determinant", cfg)
