"""
One-sided local polynomial regression at the cutoff
Used for the RD point estimate and for every pilot derivative
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Any, Dict, NamedTuple, Tuple

import numpy as np
from scipy import linalg

from .exceptions import InsufficientData, InvalidSample, SingularDesign
from .kernels import KernelKind, kernel_eval

if TYPE_CHECKING:
    from .bandwidth import BandwidthPair

logger = logging.getLogger(__name__)

MAX_CONDITION_NUMBER = 1e12


class Side(str, Enum):
    RIGHT = "right"
    LEFT = "left"

    @property
    def sign(self) -> int:
        """(-1)^(j+1) with j = 1 on the right and j = 0 on the left"""
        return 1 if self is Side.RIGHT else -1


class SidePair(NamedTuple):
    """A (right, left) pair of per-side values"""
    right: float
    left: float

    def get(self, side: Side) -> float:
        return self.right if Side(side) is Side.RIGHT else self.left


@dataclass
class RegressionSample:
    """Paired outcome/assignment observations with a cutoff"""
    x: np.ndarray
    y: np.ndarray
    c: float = 0.0

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float).ravel()
        self.y = np.asarray(self.y, dtype=float).ravel()
        self.c = float(self.c)
        if self.x.shape != self.y.shape:
            raise InvalidSample(f"x has {self.x.size} values but y has {self.y.size}")
        if self.x.size < 1:
            raise InvalidSample("sample is empty")
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.y)) and np.isfinite(self.c)):
            raise InvalidSample("sample contains non-finite values")

    @property
    def n(self) -> int:
        return int(self.x.size)

    def side_mask(self, side: Side) -> np.ndarray:
        # ties at the cutoff belong to the treated side
        if Side(side) is Side.RIGHT:
            return self.x >= self.c
        return self.x < self.c

    def side_data(self, side: Side) -> Tuple[np.ndarray, np.ndarray]:
        mask = self.side_mask(side)
        return self.x[mask], self.y[mask]

    def side_counts(self) -> SidePair:
        right = int(np.count_nonzero(self.side_mask(Side.RIGHT)))
        return SidePair(right, self.n - right)

    def side_range(self, side: Side) -> float:
        """Largest distance |x - c| on one side, 0 when the side is empty"""
        xs, _ = self.side_data(side)
        if xs.size == 0:
            return 0.0
        return float(np.max(np.abs(xs - self.c)))


@dataclass
class LocalFit:
    """Result of one boundary polynomial fit"""
    side: Side
    order: int
    bandwidth: float
    coeffs: np.ndarray
    n_effective: int
    residual_variance: float
    kernel: KernelKind = KernelKind.TRIANGULAR
    condition_number: float = field(default=float("nan"), repr=False)

    @property
    def intercept(self) -> float:
        return float(self.coeffs[0])

    def derivative(self, k: int) -> float:
        """k-th derivative of the regression function at c"""
        return float(math.factorial(k) * self.coeffs[k])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "side": self.side.value,
            "order": self.order,
            "bandwidth": self.bandwidth,
            "coeffs": [float(b) for b in self.coeffs],
            "n_effective": self.n_effective,
            "residual_variance": self.residual_variance,
            "kernel": self.kernel.value,
        }


def polynomial_wls(
    dx: np.ndarray,
    y: np.ndarray,
    weights: np.ndarray,
    order: int,
    scale: float,
) -> Tuple[np.ndarray, np.ndarray, float]:
    """
    Weighted least squares of y on powers of dx via QR of the weighted design

    Columns are built on dx/scale so high powers stay well conditioned;
    coefficients are mapped back to powers of dx.

    Returns:
        (coefficients on dx^k, fitted values, condition number)
    """
    u = dx / scale
    design = np.vander(u, order + 1, increasing=True)
    root_w = np.sqrt(weights)

    q, r = linalg.qr(design * root_w[:, None], mode="economic")
    condition = float(np.linalg.cond(r))
    if not np.isfinite(condition) or condition > MAX_CONDITION_NUMBER:
        raise SingularDesign(f"weighted design condition number {condition:.3g} exceeds {MAX_CONDITION_NUMBER:.0e}")

    gamma = linalg.solve_triangular(r, q.T @ (y * root_w))
    fitted = design @ gamma
    coeffs = gamma / scale ** np.arange(order + 1)
    return coeffs, fitted, condition


def fit_one_sided(
    sample: RegressionSample,
    side: Side,
    h: float,
    order: int = 1,
    kernel: KernelKind = KernelKind.TRIANGULAR,
) -> LocalFit:
    """
    Kernel-weighted polynomial fit of order p using only one side of the cutoff

    Args:
        sample: Observations and cutoff
        side: Side.RIGHT (x >= c) or Side.LEFT (x < c)
        h: Bandwidth in x units
        order: Polynomial order p >= 1
        kernel: Weight kernel

    Returns:
        LocalFit whose coeffs[k] estimates m^(k)(c)/k!
    """
    side = Side(side)
    if not h > 0 or not np.isfinite(h):
        raise InsufficientData(f"bandwidth must be positive and finite, got {h}", side=side.value)
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")

    xs, ys = sample.side_data(side)
    dx = xs - sample.c
    weights = kernel_eval(kernel, dx / h) if dx.size else np.empty(0)
    in_window = weights > 0

    n_window = int(np.count_nonzero(in_window))
    if n_window < order + 1:
        raise InsufficientData(
            f"{n_window} in-window observations at h={h:.4g}, need {order + 1}", side=side.value
        )

    dx, ys, weights = dx[in_window], ys[in_window], weights[in_window]
    if np.unique(dx).size < order + 1:
        raise SingularDesign(f"fewer than {order + 1} distinct x values in window", side=side.value)

    try:
        coeffs, fitted, condition = polynomial_wls(dx, ys, weights, order, h)
    except SingularDesign as e:
        raise e.tag(side=side.value)

    dof = n_window - order - 1
    residual_variance = float(np.sum((ys - fitted) ** 2) / dof) if dof > 0 else float("nan")

    return LocalFit(
        side=side,
        order=order,
        bandwidth=float(h),
        coeffs=coeffs,
        n_effective=n_window,
        residual_variance=residual_variance,
        kernel=KernelKind(kernel),
        condition_number=condition,
    )


def fit_both_sides(
    sample: RegressionSample,
    h: "BandwidthPair",
    kernel: KernelKind = KernelKind.TRIANGULAR,
) -> Tuple[LocalFit, LocalFit]:
    """Local linear fits at h1 on the right and h0 on the left"""
    right = fit_one_sided(sample, Side.RIGHT, h.h1, order=1, kernel=kernel)
    left = fit_one_sided(sample, Side.LEFT, h.h0, order=1, kernel=kernel)
    return right, left


class PointEstimate(NamedTuple):
    m1_hat: float
    m0_hat: float
    tau_hat: float


def rd_point_estimate(
    sample: RegressionSample,
    h: "BandwidthPair",
    kernel: KernelKind = KernelKind.TRIANGULAR,
) -> PointEstimate:
    """Sharp RD estimate: right intercept minus left intercept"""
    right, left = fit_both_sides(sample, h, kernel)
    m1_hat = right.intercept
    m0_hat = left.intercept
    return PointEstimate(m1_hat, m0_hat, m1_hat - m0_hat)
