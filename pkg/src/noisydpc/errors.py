"""Exception types shared across the package."""

import numpy as np


class SingularMatrix(np.linalg.LinAlgError):
    """A covariance failed the positive-definite pivot test."""

    def __init__(self, pivot_index, pivot_value, message=None):
        self.pivot_index = pivot_index
        self.pivot_value = pivot_value
        super().__init__(
            message
            or f"matrix is singular or indefinite: pivot {pivot_index} = {pivot_value:.3e}"
        )


class SingularSampleCovariance(SingularMatrix):
    pass


class DisjointnessViolation(ValueError):
    pass


class EmptyObservationList(ValueError):
    pass


class DegenerateDenominator(ArithmeticError):
    pass


class BracketFailure(RuntimeError):
    pass


class SizeOverflow(RuntimeError):
    """Requested codebook exceeds the memory or exponent guardrail."""


class EncodeFailure(RuntimeError):
    """Encoder could not produce an admissible codeword.

    ``reason`` is ``"atypical"`` when no word in the bin passed the typicality
    threshold and ``"power"`` when the selected word violates the power budget.
    """

    def __init__(self, reason, tx_power=None):
        self.reason = reason
        self.tx_power = tx_power
        super().__init__(f"encode failed ({reason})")


class DecodeFailure(RuntimeError):
    pass


class ConfigError(ValueError):
    pass
