"""
Theoretical calculators: RMSE* from true objectives, efficiency surfaces,
IK constants and the bias-cancellation sequence for same-sign curvature
"""

import logging
import math
from enum import Enum
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from numpy.polynomial import polynomial as P
from scipy import special

from src.core.bandwidth import (
    BandwidthPair,
    SearchConfig,
    Selector,
    TrueQuantities,
    amse1,
    first_order_bias,
    search_config_default,
    second_order_bias,
    select_bandwidths,
)
from src.core.exceptions import ZeroSecondDerivative
from src.core.kernels import KernelConstants, KernelKind, kernel_constants
from src.simulation.designs import Design, design_truth

logger = logging.getLogger(__name__)

COMPARED_SELECTORS = (Selector.MMSE, Selector.IND, Selector.IK)


class EfficiencyCase(str, Enum):
    NEGATIVE = "negative"
    EQUAL = "equal"


def true_bandwidths(
    design: Design,
    n: float,
    selector: Selector,
    kernel: KernelKind = KernelKind.TRIANGULAR,
    search: Optional[SearchConfig] = None,
) -> BandwidthPair:
    """Bandwidths a selector picks when fed the design's population quantities"""
    q = design_truth(design, kernel)
    k = kernel_constants(kernel)
    if search is None:
        search = search_config_default(design.support_ranges())
    return select_bandwidths(selector, q, k, n, search=search)


def rmse_star(
    design: Design,
    n: float,
    selector: Selector,
    kernel: KernelKind = KernelKind.TRIANGULAR,
    search: Optional[SearchConfig] = None,
) -> float:
    """Root of the first-order AMSE at the selector's population bandwidths"""
    h = true_bandwidths(design, n, selector, kernel, search)
    q = design_truth(design, kernel)
    return math.sqrt(float(amse1((h.h1, h.h0), q, kernel_constants(kernel), n)))


def rmse_star_table(
    design: Design,
    n: float,
    selectors: Sequence[Selector] = COMPARED_SELECTORS,
    kernel: KernelKind = KernelKind.TRIANGULAR,
    search: Optional[SearchConfig] = None,
) -> pd.DataFrame:
    """RMSE* and Eff* for one (design, n) cell"""
    q = design_truth(design, kernel)
    k = kernel_constants(kernel)
    rows = []
    for selector in selectors:
        h = true_bandwidths(design, n, selector, kernel, search)
        rows.append({
            "design": design.id,
            "n": n,
            "selector": Selector(selector).value,
            "h1": h.h1,
            "h0": h.h0,
            "rmse_star": math.sqrt(float(amse1((h.h1, h.h0), q, k, n))),
        })
    table = pd.DataFrame(rows)
    table["eff_star"] = table["rmse_star"].min() / table["rmse_star"]
    return table


def rate_table(
    design: Design,
    ns: Iterable[float],
    selectors: Sequence[Selector] = COMPARED_SELECTORS,
    kernel: KernelKind = KernelKind.TRIANGULAR,
) -> pd.DataFrame:
    """RMSE* across sample sizes with n^(2/5) and n^(3/7) scalings"""
    frames = [rmse_star_table(design, n, selectors, kernel) for n in ns]
    table = pd.concat(frames, ignore_index=True)
    table["scaled_2_5"] = table["rmse_star"] * table["n"] ** (2 / 5)
    table["scaled_3_7"] = table["rmse_star"] * table["n"] ** (3 / 7)
    return table


def theta_ik(q: TrueQuantities, k: KernelConstants) -> float:
    """
    IK constant when second derivatives coincide: h_IK = theta_IK * n^(-1/7)

    Uses the local window mass N2 ~ n f h2.
    """
    c_ik = (3.56 ** 5 * k.v / (2160 * k.b1 ** 2 * q.f_c ** (5 / 7))) ** (1 / 5)
    s1, s0 = q.sigma2
    denominator = s1 ** (2 / 7) * (q.p1 * q.m3.right ** 2) ** (5 / 7) + s0 ** (2 / 7) * (q.p0 * q.m3.left ** 2) ** (5 / 7)
    return c_ik * ((s1 + s0) / denominator) ** (1 / 5)


def negative_case_amse(gamma1, gamma2) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    AMSE of AFO, IK and IND bandwidths when m1''*m0'' < 0

    gamma1 = -m1''/m0'', gamma2 = sigma1^2/sigma0^2. Values share one
    normalization so their ratios are the relative efficiencies.
    """
    g1 = np.asarray(gamma1, dtype=float)
    g2 = np.asarray(gamma2, dtype=float)
    t = g1 * g2 ** 2
    afo = (t ** (1 / 3) + 1) ** (6 / 5)
    ik = (g1 + 1) ** (2 / 5) * (g2 + 1) ** (4 / 5)
    ind = ((t ** (1 / 5) + 1) ** 2 + 4 * (t ** (2 / 5) + 1)) / 5
    return afo, ik, ind


def equal_curvature_ratio(gamma):
    """AMSE(AFO)/AMSE(IK) with equal second derivatives, gamma = theta_IK/theta_AFO"""
    g = np.asarray(gamma, dtype=float)
    return 1.0 / (g ** 6 / 7 + 6 / (7 * g))


def efficiency_surface(
    case: EfficiencyCase,
    gamma1: Optional[Sequence[float]] = None,
    gamma2: Optional[Sequence[float]] = None,
    gamma: Optional[Sequence[float]] = None,
) -> pd.DataFrame:
    """
    Efficiency ratios on a grid

    Negative case: columns gamma1, gamma2, afo_ik, afo_ind.
    Equal case: columns gamma, ratio.
    """
    case = EfficiencyCase(case)
    if case is EfficiencyCase.EQUAL:
        grid = np.asarray(gamma if gamma is not None else np.linspace(0.1, 3.0, 59), dtype=float)
        if np.any(grid <= 0):
            raise ValueError("gamma must be positive")
        return pd.DataFrame({"gamma": grid, "ratio": equal_curvature_ratio(grid)})

    g1 = np.asarray(gamma1 if gamma1 is not None else np.geomspace(0.1, 10, 50), dtype=float)
    g2 = np.asarray(gamma2 if gamma2 is not None else np.geomspace(0.1, 10, 50), dtype=float)
    if np.any(g1 <= 0) or np.any(g2 <= 0):
        raise ValueError("gamma1 and gamma2 must be positive")
    mesh1, mesh2 = np.meshgrid(g1, g2, indexing="ij")
    afo, ik, ind = negative_case_amse(mesh1, mesh2)
    return pd.DataFrame({
        "gamma1": mesh1.ravel(),
        "gamma2": mesh2.ravel(),
        "afo_ik": (afo / ik).ravel(),
        "afo_ind": (afo / ind).ravel(),
    })


def _truncate(series: np.ndarray, degree: int) -> np.ndarray:
    out = np.zeros(degree + 1)
    series = np.atleast_1d(series)
    out[: min(series.size, degree + 1)] = series[: degree + 1]
    return out


def _bias_series(coeffs: np.ndarray, q: TrueQuantities, k: KernelConstants, degree: int) -> np.ndarray:
    """Power series in h1 of the combined bias divided by h1^2 when h0^2 = C(h1) h1^2"""
    a = k.b1 / 2
    c0 = coeffs[0]
    relative = _truncate(coeffs / c0, degree)
    relative[0] = 0.0

    # C^(3/2) = C0^(3/2) * sum_i binom(3/2, i) * eps^i
    power = np.zeros(degree + 1)
    term = _truncate(np.array([1.0]), degree)
    for i in range(degree + 1):
        power += special.binom(1.5, i) * term
        term = _truncate(P.polymul(term, relative), degree)
    power *= c0 ** 1.5

    first = -a * q.m2.left * _truncate(coeffs, degree)
    first[0] += a * q.m2.right
    inner = -q.b2.left * power
    inner[0] += q.b2.right
    second = _truncate(P.polymulx(inner), degree)
    return first + second


def degenerate_bias_path(
    q: TrueQuantities,
    k: KernelConstants,
    order: int,
    h1: float,
) -> Tuple[np.ndarray, float]:
    """
    Build C(h1, k) = C0 + C1 h1 + ... + Ck h1^k so that h0 = sqrt(C) h1
    cancels the combined bias through order h1^(k+2)

    Returns:
        (coefficients C0..Ck, remaining combined bias at h1), the bias being O(h1^(k+3))
    """
    m1, m0 = q.m2
    if m1 * m0 <= 0:
        raise ZeroSecondDerivative("bias cancellation needs second derivatives of the same sign")

    a = k.b1 / 2
    coeffs = np.array([m1 / m0])
    for j in range(1, order + 1):
        series = _bias_series(coeffs, q, k, j)
        coeffs = np.append(coeffs, series[j] / (a * m0))

    c_value = float(P.polyval(h1, coeffs))
    if c_value <= 0:
        raise ZeroSecondDerivative(f"C(h1, {order}) = {c_value:.4g} is not positive at h1 = {h1}")
    h0 = math.sqrt(c_value) * h1
    bias = float(first_order_bias(h1, h0, q, k) + second_order_bias(h1, h0, q))
    return coeffs, bias
