"""
Simulation designs: polynomial conditional means, Beta-based assignment law,
Gaussian noise, and exact population quantities at the cutoff
"""

import logging
from functools import lru_cache
from pathlib import Path
from typing import List, Literal, Union

import numpy as np
import yaml
from numpy.polynomial import Polynomial
from pydantic import BaseModel, Field, ValidationError
from scipy import special, stats

from src.core.bandwidth import TrueQuantities
from src.core.exceptions import ConfigInvalid
from src.core.kernels import KernelKind, kernel_constants
from src.core.lpr import RegressionSample, Side, SidePair
from src.core.pilot import second_order_bias_coeff

logger = logging.getLogger(__name__)

DESIGNS_DIR = Path(__file__).parent.parent.parent / "designs"

SeedLike = Union[int, np.random.SeedSequence, np.random.Generator]


class BetaLaw(BaseModel):
    """X = scale * Z + shift with Z ~ Beta(alpha, beta)"""
    family: Literal["beta"] = "beta"
    alpha: float = Field(..., gt=0)
    beta: float = Field(..., gt=0)
    scale: float = Field(default=1.0, gt=0)
    shift: float = 0.0

    def _z(self, x):
        return (np.asarray(x, dtype=float) - self.shift) / self.scale

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        # Beta as a ratio of two Gamma draws
        g1 = rng.gamma(self.alpha, size=n)
        g2 = rng.gamma(self.beta, size=n)
        return self.scale * g1 / (g1 + g2) + self.shift

    def pdf(self, x) -> float:
        return float(stats.beta.pdf(self._z(x), self.alpha, self.beta) / self.scale)

    def pdf_derivative(self, x) -> float:
        z = np.float64(self._z(x))
        if z < 0.0 or z > 1.0:
            return 0.0
        a, b = self.alpha, self.beta
        # product form stays finite at the support edges whenever the limit is
        slope = 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            if a != 1:
                slope += (a - 1) * z ** (a - 2) * (1 - z) ** (b - 1)
            if b != 1:
                slope -= (b - 1) * z ** (a - 1) * (1 - z) ** (b - 2)
        return float(slope / special.beta(a, b) / self.scale ** 2)

    def cdf(self, x) -> float:
        return float(stats.beta.cdf(self._z(x), self.alpha, self.beta))

    def mean(self) -> float:
        return self.scale * self.alpha / (self.alpha + self.beta) + self.shift


class Design(BaseModel):
    """One simulation design"""
    id: int = Field(..., ge=1)
    name: str = ""
    cutoff: float = 0.0
    noise_sd: float = Field(default=0.1295, ge=0)
    m1_coeffs: List[float] = Field(..., min_length=1, description="Right-side polynomial, constant first")
    m0_coeffs: List[float] = Field(..., min_length=1, description="Left-side polynomial, constant first")
    x_law: BetaLaw

    @property
    def m1(self) -> Polynomial:
        return Polynomial(self.m1_coeffs)

    @property
    def m0(self) -> Polynomial:
        return Polynomial(self.m0_coeffs)

    def mean_function(self, side: Side) -> Polynomial:
        return self.m1 if Side(side) is Side.RIGHT else self.m0

    @property
    def tau(self) -> float:
        return float(self.m1(self.cutoff) - self.m0(self.cutoff))

    def support_ranges(self) -> SidePair:
        """Distance from the cutoff to each end of the assignment support"""
        low = self.x_law.shift
        high = self.x_law.shift + self.x_law.scale
        return SidePair(max(high - self.cutoff, 0.0), max(self.cutoff - low, 0.0))

    def with_noise(self, noise_sd: float) -> "Design":
        return self.model_copy(update={"noise_sd": noise_sd})


def load_design(path: Union[str, Path]) -> Design:
    """Load a design from a YAML file with a top-level 'design' mapping"""
    path = Path(path)
    try:
        with open(path, "r") as f:
            data = yaml.safe_load(f)
    except (OSError, yaml.YAMLError) as e:
        raise ConfigInvalid(f"cannot read design file {path}: {e}", stage="designs")

    if not isinstance(data, dict) or "design" not in data:
        raise ConfigInvalid(f"{path} has no 'design' section", stage="designs")
    try:
        design = Design(**data["design"])
    except ValidationError as e:
        raise ConfigInvalid(f"invalid design in {path}: {e}", stage="designs")

    logger.debug(f"Loaded design {design.id} from {path}")
    return design


@lru_cache(maxsize=None)
def get_design(design_id: int) -> Design:
    """Bundled design by id"""
    path = DESIGNS_DIR / f"design{int(design_id)}.yaml"
    if not path.exists():
        raise ConfigInvalid(f"unknown design id {design_id}", stage="designs")
    return load_design(path)


def available_designs() -> List[int]:
    return sorted(int(p.stem.replace("design", "")) for p in DESIGNS_DIR.glob("design*.yaml"))


def replication_seed(seed: int, replication: int) -> np.random.SeedSequence:
    """Independent substream per replication, identical however work is scheduled"""
    return np.random.SeedSequence(seed, spawn_key=(replication,))


def eval_mean(design: Design, x):
    """Conditional mean: m1 for x >= cutoff, m0 below"""
    arr = np.asarray(x, dtype=float)
    values = np.where(arr >= design.cutoff, design.m1(arr), design.m0(arr))
    if np.ndim(x) == 0:
        return float(values)
    return values


def sample_design(design: Design, n: int, seed: SeedLike = 0) -> RegressionSample:
    """
    Draw n observations from a design

    Args:
        design: Design to sample
        n: Sample size
        seed: Integer seed, SeedSequence or Generator

    Returns:
        RegressionSample with cutoff set from the design
    """
    if n < 1:
        raise ConfigInvalid(f"sample size must be >= 1, got {n}", stage="designs")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    x = design.x_law.sample(rng, n)
    noise = rng.normal(0.0, design.noise_sd, size=n)
    return RegressionSample(x=x, y=eval_mean(design, x) + noise, c=design.cutoff)


def design_law_cdf(design: Design, x):
    """P(X <= x) under the design's assignment law"""
    return design.x_law.cdf(x)


def design_truth(design: Design, kernel: KernelKind = KernelKind.TRIANGULAR) -> TrueQuantities:
    """Exact population quantities at the cutoff"""
    constants = kernel_constants(kernel)
    c = design.cutoff
    law = design.x_law
    f_c = law.pdf(c)
    f1_c = law.pdf_derivative(c)
    p0 = design_law_cdf(design, c)

    m2, m3, b2 = {}, {}, {}
    for side in Side:
        poly = design.mean_function(side)
        m2[side] = float(poly.deriv(2)(c))
        m3[side] = float(poly.deriv(3)(c))
        b2[side] = second_order_bias_coeff(side, m2[side], m3[side], f_c, f1_c, constants)

    sigma2 = design.noise_sd ** 2
    return TrueQuantities(
        f_c=f_c,
        f1_c=f1_c,
        m2=SidePair(m2[Side.RIGHT], m2[Side.LEFT]),
        m3=SidePair(m3[Side.RIGHT], m3[Side.LEFT]),
        sigma2=SidePair(sigma2, sigma2),
        b2=SidePair(b2[Side.RIGHT], b2[Side.LEFT]),
        p1=1.0 - p0,
        p0=p0,
        kernel=KernelKind(kernel),
        cutoff=c,
        cdf=law.cdf,
    )
