"""
Pilot estimation for plug-in bandwidth selection
Density and its derivative at the cutoff, global quartic fits for pilot
bandwidths, cubic local fits for curvature and conditional variance
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import numpy as np

from .exceptions import (
    DegenerateSample,
    InsufficientData,
    RDBandwidthError,
    ZeroFourthDerivative,
)
from .kernels import KernelConstants, KernelKind, kernel_constants, kernel_eval
from .lpr import RegressionSample, Side, SidePair, fit_one_sided, polynomial_wls

logger = logging.getLogger(__name__)

# Normal-scale constants for cubic fits with the uniform kernel
PILOT_CONSTANTS = {2: 5.2088, 3: 4.8227}
DENSITY_SCALE = 2.34
MIN_PILOT_WINDOW = 5


@dataclass
class PilotEstimates:
    """Plug-in quantities entering the MMSE objective"""
    f_c: float
    f1_c: float
    m2: SidePair
    m3: SidePair
    sigma2: SidePair
    b2: SidePair
    n_side: SidePair
    kernel: KernelKind = KernelKind.TRIANGULAR
    pilot_h2: Optional[SidePair] = None
    pilot_h3: Optional[SidePair] = None
    capped: Dict[str, bool] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return int(self.n_side.right + self.n_side.left)

    def to_dict(self) -> Dict[str, Any]:
        data = {
            "f_c": self.f_c,
            "f1_c": self.f1_c,
            "kernel": self.kernel.value,
            "capped": dict(self.capped),
        }
        for name in ("m2", "m3", "sigma2", "b2", "n_side", "pilot_h2", "pilot_h3"):
            pair = getattr(self, name)
            data[name] = list(pair) if pair is not None else None
        return data


def _scale(x: np.ndarray) -> float:
    if x.size < 2:
        raise InsufficientData(f"need at least 2 observations, got {x.size}")
    sigma = float(np.std(x, ddof=1))
    if sigma <= 0:
        raise DegenerateSample("assignment variable has zero sample variance")
    return sigma


def density_at_cutoff(x: np.ndarray, c: float) -> float:
    """Epanechnikov kernel density at c with a normal-scale bandwidth"""
    x = np.asarray(x, dtype=float)
    n = x.size
    h = DENSITY_SCALE * _scale(x) * n ** (-1 / 5)
    return float(np.sum(kernel_eval(KernelKind.EPANECHNIKOV, (x - c) / h)) / (n * h))


def density_derivative_at_cutoff(x: np.ndarray, c: float) -> float:
    """First derivative of the density at c using the Jones derivative kernel"""
    x = np.asarray(x, dtype=float)
    n = x.size
    h = _scale(x) * (112 * math.sqrt(math.pi) / n) ** (1 / 7)
    return float(np.sum(kernel_eval(KernelKind.JONES_DERIVATIVE, (c - x) / h)) / (n * h ** 2))


def quartic_pilot(sample: RegressionSample, side: Side) -> Tuple[float, float]:
    """
    Global quartic OLS on one side of the cutoff

    Returns:
        (fourth derivative estimate 24*gamma_4, residual variance with n-5 denominator)
    """
    side = Side(side)
    xs, ys = sample.side_data(side)
    if xs.size < 6:
        raise InsufficientData(f"quartic pilot needs 6 observations, got {xs.size}", side=side.value)

    dx = xs - sample.c
    scale = float(np.max(np.abs(dx))) or 1.0
    coeffs, fitted, _ = polynomial_wls(dx, ys, np.ones_like(dx), 4, scale)
    s2 = float(np.sum((ys - fitted) ** 2) / (xs.size - 5))
    return 24.0 * float(coeffs[4]), s2


def pilot_bandwidth(
    nu: int,
    s2: float,
    f_c: float,
    m4_hat: float,
    n_side: int,
    max_bandwidth: Optional[float] = None,
) -> float:
    """
    Rule-of-thumb bandwidth for estimating the nu-th derivative with a cubic fit

    Args:
        nu: Derivative order, 2 or 3
        s2: Residual variance of the quartic pilot
        f_c: Density at the cutoff
        m4_hat: Fourth-derivative estimate
        n_side: Observations on the side
        max_bandwidth: Optional cap (the side's data range)
    """
    if nu not in PILOT_CONSTANTS:
        raise ValueError(f"pilot bandwidths exist for nu in (2, 3), got {nu}")
    if m4_hat == 0:
        raise ZeroFourthDerivative("quartic pilot fourth derivative is exactly zero")
    if f_c <= 0:
        raise DegenerateSample(f"density at cutoff must be positive, got {f_c}")
    if n_side < 1:
        raise InsufficientData("no observations on this side")

    h = PILOT_CONSTANTS[nu] * (s2 / (f_c * m4_hat ** 2 * n_side)) ** (1 / 9)
    if max_bandwidth is not None and h > max_bandwidth:
        logger.warning(f"Pilot bandwidth h{nu}={h:.4g} capped at data range {max_bandwidth:.4g}")
        return float(max_bandwidth)
    return float(h)


def _widen_to_minimum(sample: RegressionSample, side: Side, h: float) -> float:
    """Grow h until the uniform window [c, c+h) holds MIN_PILOT_WINDOW points"""
    xs, _ = sample.side_data(side)
    dist = np.sort(np.abs(xs - sample.c))
    if dist.size < MIN_PILOT_WINDOW:
        raise InsufficientData(
            f"{dist.size} observations on side, pilot windows need {MIN_PILOT_WINDOW}", side=side.value
        )
    if np.count_nonzero(dist < h) >= MIN_PILOT_WINDOW:
        return h
    widened = float(dist[MIN_PILOT_WINDOW - 1]) * (1 + 1e-9)
    logger.warning(f"Pilot window on {side.value} side widened from {h:.4g} to {widened:.4g}")
    return widened


def curvature_and_variance(
    sample: RegressionSample,
    side: Side,
    h2: float,
    h3: float,
) -> Tuple[float, float, float]:
    """
    Second and third derivatives plus conditional variance from cubic uniform-kernel fits

    Returns:
        (m2_hat, m3_hat, sigma2_hat); sigma2 comes from the h2 fit with n_window-4 denominator
    """
    side = Side(side)
    h2 = _widen_to_minimum(sample, side, h2)
    h3 = _widen_to_minimum(sample, side, h3)

    fit2 = fit_one_sided(sample, side, h2, order=3, kernel=KernelKind.UNIFORM)
    fit3 = fit_one_sided(sample, side, h3, order=3, kernel=KernelKind.UNIFORM)
    return fit2.derivative(2), fit3.derivative(3), fit2.residual_variance


def second_order_bias_coeff(
    side: Side,
    m2: float,
    m3: float,
    f_c: float,
    f1_c: float,
    constants: KernelConstants,
) -> float:
    """Second-order bias coefficient b_2 for one side"""
    if f_c <= 0:
        raise DegenerateSample(f"density at cutoff must be positive, got {f_c}")
    density_term = m2 * f1_c / (2 * f_c)
    bracket = constants.xi1 * (density_term + m3 / 6) - constants.xi2 * density_term
    return Side(side).sign * bracket


class PilotEstimator:
    """
    Runs the pilot steps in order:
    1. density and density derivative at c
    2. quartic fits and pilot bandwidths per side
    3. cubic fits for curvature and variance per side
    """

    def __init__(self, kernel: KernelKind = KernelKind.TRIANGULAR):
        self.kernel = KernelKind(kernel)
        self.constants = kernel_constants(self.kernel)
        self.logger = logging.getLogger(self.__class__.__name__)

    def estimate(self, sample: RegressionSample) -> PilotEstimates:
        try:
            f_c = density_at_cutoff(sample.x, sample.c)
            f1_c = density_derivative_at_cutoff(sample.x, sample.c)
        except RDBandwidthError as e:
            raise e.tag(stage="pilot step 1")
        if f_c <= 0:
            raise DegenerateSample("estimated density at cutoff is zero", stage="pilot step 1")
        self.logger.debug(f"Step 1: f(c)={f_c:.5g}, f'(c)={f1_c:.5g}")

        n_side = sample.side_counts()
        h2, h3, capped = {}, {}, {}
        for side in Side:
            try:
                m4, s2 = quartic_pilot(sample, side)
                limit = sample.side_range(side)
                h2[side] = pilot_bandwidth(2, s2, f_c, m4, n_side.get(side), max_bandwidth=limit)
                h3[side] = pilot_bandwidth(3, s2, f_c, m4, n_side.get(side), max_bandwidth=limit)
                capped[side.value] = h2[side] >= limit or h3[side] >= limit
            except RDBandwidthError as e:
                raise e.tag(stage="pilot step 2", side=side.value)

        m2, m3, sigma2 = {}, {}, {}
        for side in Side:
            try:
                m2[side], m3[side], sigma2[side] = curvature_and_variance(sample, side, h2[side], h3[side])
            except RDBandwidthError as e:
                raise e.tag(stage="pilot step 3", side=side.value)

        b2 = {
            side: second_order_bias_coeff(side, m2[side], m3[side], f_c, f1_c, self.constants)
            for side in Side
        }

        pilots = PilotEstimates(
            f_c=f_c,
            f1_c=f1_c,
            m2=SidePair(m2[Side.RIGHT], m2[Side.LEFT]),
            m3=SidePair(m3[Side.RIGHT], m3[Side.LEFT]),
            sigma2=SidePair(sigma2[Side.RIGHT], sigma2[Side.LEFT]),
            b2=SidePair(b2[Side.RIGHT], b2[Side.LEFT]),
            n_side=n_side,
            kernel=self.kernel,
            pilot_h2=SidePair(h2[Side.RIGHT], h2[Side.LEFT]),
            pilot_h3=SidePair(h3[Side.RIGHT], h3[Side.LEFT]),
            capped=capped,
        )
        self.logger.debug(f"Pilots assembled: m2={tuple(pilots.m2)}, sigma2={tuple(pilots.sigma2)}")
        return pilots


def assemble_pilots(sample: RegressionSample, kernel: KernelKind = KernelKind.TRIANGULAR) -> PilotEstimates:
    """Convenience wrapper around PilotEstimator"""
    return PilotEstimator(kernel).estimate(sample)
