"""
Error hierarchy for bandwidth selection and RD estimation
Every error can carry the pipeline stage and side that produced it
"""

from typing import Any, Optional


class RDBandwidthError(Exception):
    """Base class for all estimation and selection failures"""

    def __init__(self, message: str, stage: Optional[str] = None, side: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.stage = stage
        self.side = side

    def tag(self, stage: Optional[str] = None, side: Optional[str] = None) -> "RDBandwidthError":
        """Fill in stage/side if not already set; returns self for re-raising"""
        if stage is not None and self.stage is None:
            self.stage = stage
        if side is not None and self.side is None:
            self.side = side
        return self

    @property
    def location(self) -> str:
        parts = [p for p in (self.stage, self.side) if p]
        return "/".join(parts)

    def __str__(self) -> str:
        if self.location:
            return f"[{self.location}] {self.message}"
        return self.message


class InvalidSample(RDBandwidthError):
    """Sample arrays are malformed (length mismatch, non-finite values)"""


class InsufficientData(RDBandwidthError):
    """Too few observations in a window or on a side"""


class SingularDesign(RDBandwidthError):
    """Weighted design matrix is rank deficient or badly conditioned"""


class DegenerateSample(RDBandwidthError):
    """Assignment variable has zero sample variance"""


class ZeroFourthDerivative(RDBandwidthError):
    """Pilot bandwidth rule undefined because the quartic term vanished"""


class ZeroSecondDerivative(RDBandwidthError):
    """A selector needs nonzero second derivatives on both sides"""


class BiasCancellation(RDBandwidthError):
    """Second-order bias gap vanishes so the positive-case closed form is undefined"""


class OptimizerFailure(RDBandwidthError):
    """No multi-start run converged; best grid point is attached as fallback"""

    def __init__(self, message: str, fallback: Any = None, **kwargs):
        super().__init__(message, **kwargs)
        self.fallback = fallback


class ConfigInvalid(RDBandwidthError):
    """Configuration failed validation"""


class SimulationAborted(RDBandwidthError):
    """Too many replications failed for at least one selector"""

    def __init__(self, message: str, summary: Any = None, **kwargs):
        super().__init__(message, **kwargs)
        self.summary = summary
