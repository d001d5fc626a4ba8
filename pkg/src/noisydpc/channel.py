"""Channel parameters for Y = X + S + Z0 with noisy observations of S."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace


def _as_variances(values, what):
    out = tuple(float(v) for v in values)
    for v in out:
        if not math.isfinite(v) or v < 0:
            raise ValueError(f"{what} entries must be finite and >= 0, got {v!r}")
    return out


@dataclass(frozen=True)
class ChannelConfig:
    """Powers and variances of the channel.

    Parameters
    ----------
    p : float
        Transmit power constraint P (> 0).
    q : float
        Interference power Q (>= 0).
    n0 : float
        Channel noise variance N0 (>= 0).
    tx_noise, rx_noise : sequence of float
        Noise variances of the observations M_l = S + Z_l held by the
        transmitter and the receiver. A missing observation is simply
        absent from the list.
    """

    p: float
    q: float
    n0: float
    tx_noise: tuple[float, ...] = field(default=())
    rx_noise: tuple[float, ...] = field(default=())

    def __post_init__(self):
        for name in ("p", "q", "n0"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v!r}")
            object.__setattr__(self, name, v)
        if self.p <= 0:
            raise ValueError(f"p must be > 0, got {self.p}")
        if self.q < 0:
            raise ValueError(f"q must be >= 0, got {self.q}")
        if self.n0 < 0:
            raise ValueError(f"n0 must be >= 0, got {self.n0}")
        object.__setattr__(self, "tx_noise", _as_variances(self.tx_noise, "tx_noise"))
        object.__setattr__(self, "rx_noise", _as_variances(self.rx_noise, "rx_noise"))

    @property
    def noises(self) -> tuple[float, ...]:
        """All observation variances, transmitter side first."""
        return self.tx_noise + self.rx_noise

    @property
    def tx_labels(self) -> tuple[str, ...]:
        return tuple(f"M{i + 1}" for i in range(len(self.tx_noise)))

    @property
    def rx_labels(self) -> tuple[str, ...]:
        k = len(self.tx_noise)
        return tuple(f"M{k + i + 1}" for i in range(len(self.rx_noise)))

    def with_(self, **changes) -> "ChannelConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "q": self.q,
            "n0": self.n0,
            "tx_noise": list(self.tx_noise),
            "rx_noise": list(self.rx_noise),
        }
