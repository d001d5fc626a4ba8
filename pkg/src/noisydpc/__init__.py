"""Capacity and achievability tools for the Gaussian channel Y = X + S + Z0
with noisy observations of the interference S at the transmitter and/or
receiver."""

from .capacity_engine import (
    AlphaOptimum,
    FusionResult,
    RateReport,
    achievable_rate,
    capacity,
    capacity_rx_only,
    capacity_tx_only,
    capacity_via_determinants,
    fuse_observations,
    optimal_alpha_closed_form,
    optimal_alpha_numeric,
    reduce_config,
    residual_fraction,
)
from .channel import ChannelConfig
from .gaussian import (
    JointGaussianSpec,
    SampleBatch,
    build_joint_spec,
    gaussian_conditional_mi,
    gaussian_mi,
    log_det,
    sample,
)
from .mc import McEstimate, estimate_mi, estimate_rate_gap, verify_tightness

__version__ = "0.1.0"
