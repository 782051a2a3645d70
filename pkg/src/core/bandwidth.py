"""
Bandwidth selectors for the sharp RD estimator
MMSE plug-in minimizer, AFO closed forms, IND and IK comparators
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, field_validator
from scipy import optimize

from .exceptions import (
    BiasCancellation,
    DegenerateSample,
    InsufficientData,
    OptimizerFailure,
    ZeroSecondDerivative,
)
from .kernels import KernelConstants, KernelKind
from .lpr import RegressionSample, Side, SidePair
from .pilot import PilotEstimates

logger = logging.getLogger(__name__)

ZERO_CURVATURE_TOL = 1e-8
IK_PILOT_CONSTANT = 3.56
IK_REGULARIZATION = 2160.0


class Selector(str, Enum):
    MMSE = "mmse"
    AFO = "afo"
    IND = "ind"
    IK = "ik"
    MANUAL = "manual"


@dataclass
class BandwidthPair:
    """Right (h1) and left (h0) bandwidths with the rule that produced them"""
    h1: float
    h0: float
    selector: Selector
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.h1 = float(self.h1)
        self.h0 = float(self.h0)
        self.selector = Selector(self.selector)
        if not (self.h1 > 0 and self.h0 > 0):
            raise ValueError(f"bandwidths must be positive, got ({self.h1}, {self.h0})")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "h1": self.h1,
            "h0": self.h0,
            "selector": self.selector.value,
            "diagnostics": dict(self.diagnostics),
        }


@dataclass
class TrueQuantities:
    """Population counterparts of PilotEstimates plus one-sided masses"""
    f_c: float
    f1_c: float
    m2: SidePair
    m3: SidePair
    sigma2: SidePair
    b2: SidePair
    p1: float
    p0: float
    kernel: KernelKind = KernelKind.TRIANGULAR
    cutoff: float = 0.0
    cdf: Optional[Callable[[float], float]] = field(default=None, repr=False, compare=False)

    def window_mass(self, side: Side, h: float) -> float:
        """P(c <= X <= c+h) on the right or P(c-h <= X < c) on the left"""
        if self.cdf is None:
            # local approximation when no law is attached
            mass = self.f_c * h
        elif Side(side) is Side.RIGHT:
            mass = self.cdf(self.cutoff + h) - self.cdf(self.cutoff)
        else:
            mass = self.cdf(self.cutoff) - self.cdf(self.cutoff - h)
        cap = self.p1 if Side(side) is Side.RIGHT else self.p0
        return float(min(mass, cap))

    def to_dict(self) -> Dict[str, Any]:
        data = {"f_c": self.f_c, "f1_c": self.f1_c, "p1": self.p1, "p0": self.p0,
                "kernel": self.kernel.value, "cutoff": self.cutoff}
        for name in ("m2", "m3", "sigma2", "b2"):
            data[name] = list(getattr(self, name))
        return data


Quantities = Union[PilotEstimates, TrueQuantities]


class SearchConfig(BaseModel):
    """Compact region and start grid for the MMSE minimization"""
    h1_bounds: Tuple[float, float] = Field(..., description="(min, max) bandwidth right of the cutoff")
    h0_bounds: Tuple[float, float] = Field(..., description="(min, max) bandwidth left of the cutoff")
    starts_per_axis: int = Field(default=8, ge=1, le=50, description="Log-spaced starts per axis")

    @field_validator("h1_bounds", "h0_bounds")
    @classmethod
    def check_bounds(cls, v: Tuple[float, float]) -> Tuple[float, float]:
        lo, hi = v
        if not (0 < lo < hi and math.isfinite(hi)):
            raise ValueError(f"bounds must satisfy 0 < min < max < inf, got {v}")
        return v


def _side_limits(distances: np.ndarray, side_range: float) -> Tuple[float, float]:
    if distances.size == 0 or side_range <= 0:
        raise InsufficientData("no spread of observations on this side")
    ordered = np.sort(distances)
    smallest_window = float(ordered[min(4, ordered.size) - 1]) * (1 + 1e-9)
    h_min = max(1e-4 * side_range, smallest_window)
    h_max = max(side_range, h_min * (1 + 1e-6))
    return h_min, h_max


def search_config_default(
    sample_range: Union[SidePair, RegressionSample],
    starts_per_axis: int = 8,
) -> SearchConfig:
    """
    Default search region

    With a sample: lower bound is the smallest window holding 4 points (or
    1e-4 of the range), upper bound is the side's data range. With a plain
    (right, left) range pair the lower bound is 1e-4 of the range.
    """
    if isinstance(sample_range, RegressionSample):
        sample = sample_range
        bounds = []
        for side in Side:
            xs, _ = sample.side_data(side)
            try:
                bounds.append(_side_limits(np.abs(xs - sample.c), sample.side_range(side)))
            except InsufficientData as e:
                raise e.tag(stage="search region", side=side.value)
        return SearchConfig(h1_bounds=bounds[0], h0_bounds=bounds[1], starts_per_axis=starts_per_axis)

    right, left = sample_range
    if right <= 0 or left <= 0:
        raise InsufficientData(f"data ranges must be positive, got ({right}, {left})")
    return SearchConfig(
        h1_bounds=(1e-4 * right, float(right)),
        h0_bounds=(1e-4 * left, float(left)),
        starts_per_axis=starts_per_axis,
    )


# Objective pieces; every function broadcasts over arrays of h1, h0

def first_order_bias(h1, h0, q: Quantities, k: KernelConstants):
    return 0.5 * k.b1 * (q.m2.right * h1 ** 2 - q.m2.left * h0 ** 2)


def second_order_bias(h1, h0, q: Quantities):
    return q.b2.right * h1 ** 3 - q.b2.left * h0 ** 3


def variance_term(h1, h0, q: Quantities, k: KernelConstants, n: float):
    return k.v / (n * q.f_c) * (q.sigma2.right / h1 + q.sigma2.left / h0)


def amse1(h: Sequence, q: Quantities, k: KernelConstants, n: float):
    """Squared first-order bias plus variance"""
    h1, h0 = h
    return first_order_bias(h1, h0, q, k) ** 2 + variance_term(h1, h0, q, k, n)


def amse2(h: Sequence, q: Quantities, k: KernelConstants, n: float):
    """Squared second-order bias plus variance"""
    h1, h0 = h
    return second_order_bias(h1, h0, q) ** 2 + variance_term(h1, h0, q, k, n)


def mmse_objective(h: Sequence, q: Quantities, k: KernelConstants, n: float):
    """Both squared bias terms plus variance, all evaluated at the cutoff"""
    h1, h0 = h
    return (
        first_order_bias(h1, h0, q, k) ** 2
        + second_order_bias(h1, h0, q) ** 2
        + variance_term(h1, h0, q, k, n)
    )


def _check_quantities(q: Quantities) -> None:
    if not q.f_c > 0:
        raise DegenerateSample(f"density at cutoff must be positive, got {q.f_c}")
    if not (q.sigma2.right > 0 and q.sigma2.left > 0):
        raise DegenerateSample(f"conditional variances must be positive, got {tuple(q.sigma2)}")


def _curvature_sign(q: Quantities) -> int:
    """Sign of m1''*m0'', raising when either side is numerically zero"""
    right, left = q.m2
    scale = max(abs(right), abs(left))
    if scale == 0 or min(abs(right), abs(left)) < ZERO_CURVATURE_TOL * scale:
        raise ZeroSecondDerivative(f"second derivatives ({right:.4g}, {left:.4g}) include a zero")
    return 1 if right * left > 0 else -1


def afo_bandwidths(q: Quantities, k: KernelConstants, n: float) -> BandwidthPair:
    """
    Closed-form asymptotically first-order optimal bandwidths

    Negative product of second derivatives: first-order bias terms trade off
    and h ~ n^(-1/5). Positive product: first-order bias cancels along
    h0 = lambda*h1 and the second-order term sets h ~ n^(-1/7).
    """
    _check_quantities(q)
    sign = _curvature_sign(q)
    m1, m0 = q.m2
    s1, s0 = q.sigma2

    if sign < 0:
        lam = (-s0 * m1 / (s1 * m0)) ** (1 / 3)
        theta = (k.v * s1 / (k.b1 ** 2 * q.f_c * m1 * (m1 - lam ** 2 * m0))) ** (1 / 5)
        h1 = theta * n ** (-1 / 5)
        case = "negative"
    else:
        lam = math.sqrt(m1 / m0)
        b21, b20 = q.b2
        gap = b21 - lam ** 3 * b20
        if gap == 0 or abs(gap) < 1e-12 * (abs(b21) + lam ** 3 * abs(b20)):
            raise BiasCancellation("second-order bias gap vanishes along the cancellation line")
        theta = (k.v * (s1 + s0 / lam) / (6 * q.f_c * gap ** 2)) ** (1 / 7)
        h1 = theta * n ** (-1 / 7)
        case = "positive"

    return BandwidthPair(
        h1=h1,
        h0=lam * h1,
        selector=Selector.AFO,
        diagnostics={"case": case, "theta": theta, "lambda": lam, "m2_product_sign": sign},
    )


def ind_bandwidths(q: Quantities, k: KernelConstants, n: float) -> BandwidthPair:
    """Each side's AMSE-optimal bandwidth chosen independently"""
    _check_quantities(q)
    scale = max(abs(q.m2.right), abs(q.m2.left))
    values = []
    for side in Side:
        m2 = q.m2.get(side)
        if scale == 0 or abs(m2) < ZERO_CURVATURE_TOL * scale:
            raise ZeroSecondDerivative(f"second derivative is zero on the {side.value} side", side=side.value)
        values.append((k.v * q.sigma2.get(side) / (k.b1 ** 2 * q.f_c * m2 ** 2)) ** (1 / 5) * n ** (-1 / 5))
    return BandwidthPair(h1=values[0], h0=values[1], selector=Selector.IND)


def ik_bandwidth(
    q: Quantities,
    k: KernelConstants,
    n: float,
    sample: Optional[RegressionSample] = None,
) -> BandwidthPair:
    """
    Common bandwidth with regularized squared bias

    Counts come from the sample when one is given, otherwise from the
    population masses attached to TrueQuantities.
    """
    _check_quantities(q)

    if sample is not None:
        counts = sample.side_counts()
        dist = {side: np.abs(sample.side_data(side)[0] - sample.c) for side in Side}
    elif isinstance(q, TrueQuantities):
        counts = SidePair(n * q.p1, n * q.p0)
        dist = None
    else:
        raise InsufficientData("IK bandwidth needs a sample or population quantities", stage="ik")

    reg = {}
    h2 = {}
    for side in Side:
        sigma2, m3 = q.sigma2.get(side), q.m3.get(side)
        n_side = counts.get(side)
        if n_side <= 0:
            raise InsufficientData("no observations on this side", stage="ik", side=side.value)
        if m3 == 0:
            h2[side], reg[side] = math.inf, 0.0
            continue
        h2[side] = IK_PILOT_CONSTANT * (sigma2 / (q.f_c * m3 ** 2)) ** (1 / 7) * n_side ** (-1 / 7)
        if dist is not None:
            n2 = float(np.count_nonzero(dist[side] <= h2[side]))
        else:
            n2 = n * q.window_mass(side, h2[side])
        if n2 <= 0:
            raise InsufficientData(f"empty IK pilot window h2={h2[side]:.4g}", stage="ik", side=side.value)
        reg[side] = IK_REGULARIZATION * sigma2 / (n2 * h2[side] ** 4)

    denominator = (q.m2.right - q.m2.left) ** 2 + reg[Side.RIGHT] + reg[Side.LEFT]
    if denominator <= 0:
        raise BiasCancellation("IK denominator is zero with no regularization", stage="ik")

    h = (k.v * (q.sigma2.right + q.sigma2.left) / (k.b1 ** 2 * q.f_c * denominator)) ** (1 / 5) * n ** (-1 / 5)
    return BandwidthPair(
        h1=h,
        h0=h,
        selector=Selector.IK,
        diagnostics={
            "r_plus": reg[Side.RIGHT],
            "r_minus": reg[Side.LEFT],
            "h2_plus": h2[Side.RIGHT],
            "h2_minus": h2[Side.LEFT],
        },
    )


class BandwidthSelector:
    """Multi-start minimizer of the MMSE objective over a compact region"""

    def __init__(self, search: SearchConfig, xatol: float = 1e-9, fatol: float = 1e-13, maxiter: int = 2000):
        self.search = search
        self.xatol = xatol
        self.fatol = fatol
        self.maxiter = maxiter
        self.logger = logging.getLogger(self.__class__.__name__)

    def start_grid(self) -> Tuple[np.ndarray, np.ndarray]:
        count = self.search.starts_per_axis
        return np.geomspace(*self.search.h1_bounds, count), np.geomspace(*self.search.h0_bounds, count)

    def _initial_simplex(self, z: np.ndarray, bounds: List[Tuple[float, float]]) -> np.ndarray:
        simplex = [z.copy()]
        for axis, (lo, hi) in enumerate(bounds):
            vertex = z.copy()
            step = 0.1 if z[axis] + 0.1 <= hi else -0.1
            vertex[axis] = np.clip(z[axis] + step, lo, hi)
            simplex.append(vertex)
        return np.array(simplex)

    def minimize(self, q: Quantities, k: KernelConstants, n: float) -> BandwidthPair:
        _check_quantities(q)
        grid1, grid0 = self.start_grid()
        mesh1, mesh0 = np.meshgrid(grid1, grid0, indexing="ij")
        grid_values = mmse_objective((mesh1, mesh0), q, k, n)
        best_idx = np.unravel_index(np.argmin(grid_values), grid_values.shape)
        scale = float(grid_values[best_idx])
        grid_best = (scale, float(mesh1[best_idx]), float(mesh0[best_idx]))

        log_bounds = [tuple(np.log(self.search.h1_bounds)), tuple(np.log(self.search.h0_bounds))]

        def scaled(z: np.ndarray) -> float:
            h1, h0 = np.exp(z)
            return float(mmse_objective((h1, h0), q, k, n)) / scale

        candidates = []
        for h1_start in grid1:
            for h0_start in grid0:
                z0 = np.log([h1_start, h0_start])
                result = optimize.minimize(
                    scaled,
                    z0,
                    method="Nelder-Mead",
                    bounds=log_bounds,
                    options={
                        "xatol": self.xatol,
                        "fatol": self.fatol,
                        "maxiter": self.maxiter,
                        "initial_simplex": self._initial_simplex(z0, log_bounds),
                    },
                )
                if result.success:
                    h1, h0 = np.exp(result.x)
                    candidates.append((float(result.fun) * scale, float(h1), float(h0)))
                else:
                    self.logger.debug(f"Start ({h1_start:.4g}, {h0_start:.4g}) did not converge: {result.message}")

        restarts = grid1.size * grid0.size
        if not candidates:
            fallback = BandwidthPair(grid_best[1], grid_best[2], Selector.MMSE,
                                     diagnostics={"objective": grid_best[0], "restarts": restarts})
            raise OptimizerFailure("no multi-start run converged", fallback=fallback, stage="mmse")

        objective, h1, h0 = min(candidates + [grid_best])
        self.logger.debug(f"MMSE minimum {objective:.6g} at ({h1:.5g}, {h0:.5g}) from {len(candidates)}/{restarts} starts")
        return BandwidthPair(
            h1=h1,
            h0=h0,
            selector=Selector.MMSE,
            diagnostics={
                "objective": objective,
                "restarts": restarts,
                "converged": len(candidates),
                "m2_product_sign": int(np.sign(q.m2.right * q.m2.left)),
            },
        )


def select_mmse(q: Quantities, k: KernelConstants, n: float, search: SearchConfig) -> BandwidthPair:
    """Global minimizer of the MMSE objective within the search region"""
    return BandwidthSelector(search).minimize(q, k, n)


def select_bandwidths(
    selector: Selector,
    q: Quantities,
    k: KernelConstants,
    n: float,
    search: Optional[SearchConfig] = None,
    sample: Optional[RegressionSample] = None,
) -> BandwidthPair:
    """Dispatch to one selector"""
    selector = Selector(selector)
    if selector is Selector.MMSE:
        if search is None:
            raise ValueError("MMSE selection needs a SearchConfig")
        return select_mmse(q, k, n, search)
    if selector is Selector.AFO:
        return afo_bandwidths(q, k, n)
    if selector is Selector.IND:
        return ind_bandwidths(q, k, n)
    if selector is Selector.IK:
        return ik_bandwidth(q, k, n, sample=sample)
    raise ValueError("manual bandwidths are passed as overrides, not selected")
