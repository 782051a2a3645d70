"""
Sharp RD estimation pipeline: pilots -> selector -> local linear fits
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Optional

from .bandwidth import (
    BandwidthPair,
    SearchConfig,
    Selector,
    search_config_default,
    select_bandwidths,
)
from .exceptions import InsufficientData, RDBandwidthError
from .kernels import KernelKind, kernel_constants
from .lpr import RegressionSample, SidePair, fit_both_sides
from .pilot import PilotEstimates, PilotEstimator

logger = logging.getLogger(__name__)


@dataclass
class RdEstimate:
    """Point estimate with bandwidths, standard error and the pilots used"""
    tau_hat: float
    m1_hat: float
    m0_hat: float
    bandwidths: BandwidthPair
    se: Optional[float]
    n_effective: SidePair
    pilots: Optional[PilotEstimates]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "tau_hat": self.tau_hat,
            "m1_hat": self.m1_hat,
            "m0_hat": self.m0_hat,
            "bandwidths": self.bandwidths.to_dict(),
            "se": self.se,
            "n_effective": list(self.n_effective),
            "pilots": self.pilots.to_dict() if self.pilots is not None else None,
        }


class SharpRDEstimator:
    """
    End-to-end estimator for the jump in the conditional mean at the cutoff
    """

    def __init__(
        self,
        selector: Selector = Selector.MMSE,
        kernel: KernelKind = KernelKind.TRIANGULAR,
        search: Optional[SearchConfig] = None,
    ):
        self.selector = Selector(selector)
        self.kernel = KernelKind(kernel)
        self.constants = kernel_constants(self.kernel)
        self.search = search
        self.pilot_estimator = PilotEstimator(self.kernel)
        self.logger = logging.getLogger(self.__class__.__name__)

    def estimate(
        self,
        sample: RegressionSample,
        overrides: Optional[BandwidthPair] = None,
        pilots: Optional[PilotEstimates] = None,
    ) -> RdEstimate:
        """
        Estimate tau(c) = m1(c) - m0(c)

        Args:
            sample: Observations and cutoff
            overrides: Manual bandwidths used verbatim instead of a selector
            pilots: Precomputed pilot estimates to reuse

        Returns:
            RdEstimate; se is None when manual bandwidths are used and pilots cannot be formed
        """
        counts = sample.side_counts()
        if min(counts) < 2:
            raise InsufficientData(f"need at least 2 observations per side, got {tuple(counts)}", stage="input")

        if overrides is not None:
            bandwidths = BandwidthPair(overrides.h1, overrides.h0, Selector.MANUAL)
            if pilots is None:
                try:
                    pilots = self.pilot_estimator.estimate(sample)
                except RDBandwidthError as e:
                    self.logger.warning(f"Pilots unavailable for manual bandwidths, standard error omitted: {e}")
        else:
            if pilots is None:
                pilots = self.pilot_estimator.estimate(sample)
            bandwidths = self._select(sample, pilots)

        try:
            right, left = fit_both_sides(sample, bandwidths, self.kernel)
        except RDBandwidthError as e:
            raise e.tag(stage="point estimate")

        se = self.standard_error(pilots, bandwidths, sample.n) if pilots is not None else None
        result = RdEstimate(
            tau_hat=right.intercept - left.intercept,
            m1_hat=right.intercept,
            m0_hat=left.intercept,
            bandwidths=bandwidths,
            se=se,
            n_effective=SidePair(right.n_effective, left.n_effective),
            pilots=pilots,
        )
        self.logger.info(
            f"tau_hat={result.tau_hat:.5g} with {bandwidths.selector.value} bandwidths "
            f"<{bandwidths.h1:.4g}, {bandwidths.h0:.4g}>"
        )
        return result

    def _select(self, sample: RegressionSample, pilots: PilotEstimates) -> BandwidthPair:
        stage = f"selector {self.selector.value}"
        try:
            search = self.search
            if self.selector is Selector.MMSE and search is None:
                search = search_config_default(sample)
            return select_bandwidths(self.selector, pilots, self.constants, sample.n, search=search, sample=sample)
        except RDBandwidthError as e:
            raise e.tag(stage=stage)

    def standard_error(self, pilots: PilotEstimates, h: BandwidthPair, n: int) -> float:
        """Plug-in asymptotic standard error"""
        variance = self.constants.v / (n * pilots.f_c) * (pilots.sigma2.right / h.h1 + pilots.sigma2.left / h.h0)
        return math.sqrt(max(variance, 0.0))


def estimate_sharp_rd(
    sample: RegressionSample,
    selector: Selector = Selector.MMSE,
    kernel: KernelKind = KernelKind.TRIANGULAR,
    overrides: Optional[BandwidthPair] = None,
    search: Optional[SearchConfig] = None,
) -> RdEstimate:
    """Functional wrapper around SharpRDEstimator"""
    return SharpRDEstimator(selector, kernel, search).estimate(sample, overrides=overrides)
