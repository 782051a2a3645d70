"""
Kernel functions and one-sided moment constants
"""

import logging
from dataclasses import dataclass, asdict
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from typing import Any, Dict, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


class KernelKind(str, Enum):
    TRIANGULAR = "triangular"
    EPANECHNIKOV = "epanechnikov"
    UNIFORM = "uniform"
    JONES_DERIVATIVE = "jones_derivative"


@dataclass(frozen=True)
class KernelConstants:
    """One-sided moments mu_j (j=0..4), nu_j (j=0..2) and the derived AMSE constants"""
    kind: KernelKind
    mu: Tuple[float, ...]
    nu: Tuple[float, ...]
    b1: float
    v: float
    xi1: float
    xi2: float

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["kind"] = self.kind.value
        return data


def kernel_eval(kind: KernelKind, u: ArrayLike) -> ArrayLike:
    """
    Evaluate a kernel (or the Jones derivative kernel) at u

    Args:
        kind: Kernel to evaluate
        u: Scalar or array of standardized distances

    Returns:
        K(u), exactly zero for |u| >= 1
    """
    kind = KernelKind(kind)
    arr = np.asarray(u, dtype=float)
    inside = np.abs(arr) < 1.0

    if kind is KernelKind.TRIANGULAR:
        values = 1.0 - np.abs(arr)
    elif kind is KernelKind.EPANECHNIKOV:
        values = 0.75 * (1.0 - arr ** 2)
    elif kind is KernelKind.UNIFORM:
        values = np.full_like(arr, 0.5)
    else:
        values = -15.0 * arr * (1.0 - arr ** 2) / 4.0

    out = np.where(inside, values, 0.0)
    if np.ndim(u) == 0:
        return float(out)
    return out


def _exact_moments(kind: KernelKind) -> Tuple[Tuple[Fraction, ...], Tuple[Fraction, ...]]:
    """Closed-form one-sided moments as rationals"""
    if kind is KernelKind.TRIANGULAR:
        # int_0^1 u^j (1-u) du and int_0^1 u^j (1-u)^2 du
        mu = tuple(Fraction(1, (j + 1) * (j + 2)) for j in range(5))
        nu = tuple(Fraction(2, (j + 1) * (j + 2) * (j + 3)) for j in range(3))
    elif kind is KernelKind.EPANECHNIKOV:
        mu = tuple(Fraction(3, 2) / ((j + 1) * (j + 3)) for j in range(5))
        nu = tuple(
            Fraction(9, 16) * (Fraction(1, j + 1) - Fraction(2, j + 3) + Fraction(1, j + 5))
            for j in range(3)
        )
    elif kind is KernelKind.UNIFORM:
        mu = tuple(Fraction(1, 2 * (j + 1)) for j in range(5))
        nu = tuple(Fraction(1, 4 * (j + 1)) for j in range(3))
    else:
        raise ValueError(f"{kind.value} is a derivative kernel and has no weight moments")
    return mu, nu


def constants_from_moments(kind: KernelKind, mu, nu) -> KernelConstants:
    """Derive b1, v, xi1, xi2 from moment sequences (rational or float)"""
    m0, m1, m2, m3, m4 = mu
    n0, n1, n2 = nu
    det = m0 * m2 - m1 ** 2

    b1 = (m2 ** 2 - m1 * m3) / det
    v = (m2 ** 2 * n0 - 2 * m1 * m2 * n1 + m1 ** 2 * n2) / det ** 2
    xi1 = (m2 * m3 - m1 * m4) / det
    xi2 = (m2 ** 2 - m1 * m3) * (m0 * m3 - m1 * m2) / det ** 2

    return KernelConstants(
        kind=kind,
        mu=tuple(float(x) for x in mu),
        nu=tuple(float(x) for x in nu),
        b1=float(b1),
        v=float(v),
        xi1=float(xi1),
        xi2=float(xi2),
    )


@lru_cache(maxsize=None)
def kernel_constants(kind: KernelKind) -> KernelConstants:
    """
    Moment constants of a symmetric weight kernel

    Raises:
        ValueError: for the Jones derivative kernel
    """
    kind = KernelKind(kind)
    mu, nu = _exact_moments(kind)
    constants = constants_from_moments(kind, mu, nu)
    logger.debug(f"Kernel constants for {kind.value}: b1={constants.b1}, v={constants.v}")
    return constants
