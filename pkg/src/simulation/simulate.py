"""
Monte-Carlo harness for comparing bandwidth selectors
Replications run in a process pool; aggregation happens in replication order
so results do not depend on the number of workers
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, ValidationError
from tqdm import tqdm

from src.core.bandwidth import Selector
from src.core.estimator import SharpRDEstimator
from src.core.exceptions import ConfigInvalid, RDBandwidthError, SimulationAborted
from src.core.kernels import KernelKind
from src.core.pilot import PilotEstimator
from src.simulation.designs import Design, get_design, replication_seed, sample_design
from src.simulation.theory import rmse_star_table

logger = logging.getLogger(__name__)

MAX_FAILURE_SHARE = 0.05


class TrimMode(str, Enum):
    ABSOLUTE = "absolute"
    TAILS = "tails"


class SimulationConfig(BaseModel):
    """One Monte-Carlo cell"""
    design_id: int = Field(default=1, ge=1, description="Bundled design id")
    design: Optional[Design] = Field(default=None, description="Custom design overriding design_id")
    n: int = Field(..., ge=1, description="Sample size per replication")
    reps: int = Field(..., ge=1, description="Number of replications")
    selectors: List[Selector] = Field(default_factory=lambda: [Selector.MMSE, Selector.IND, Selector.IK], min_length=1)
    trim: float = Field(default=0.05, ge=0.0, lt=0.5, description="Share of replications trimmed")
    trim_mode: TrimMode = TrimMode.ABSOLUTE
    seed: int = Field(default=0, ge=0)
    jobs: int = Field(default=1, ge=1)
    kernel: KernelKind = KernelKind.TRIANGULAR
    progress: bool = False

    def resolve_design(self) -> Design:
        return self.design if self.design is not None else get_design(self.design_id)

    @classmethod
    def build(cls, **kwargs) -> "SimulationConfig":
        try:
            return cls(**kwargs)
        except ValidationError as e:
            raise ConfigInvalid(f"invalid simulation config: {e}", stage="simulate")


@dataclass
class SelectorSummary:
    selector: Selector
    mean_h1: float
    sd_h1: float
    mean_h0: float
    sd_h0: float
    trimmed_bias: float
    trimmed_rmse: float
    eff: float
    rmse_star: float
    eff_star: float
    median_abs_error: float
    failures: int
    n_used: int

    def to_dict(self) -> Dict[str, Any]:
        data = {k: v for k, v in self.__dict__.items()}
        data["selector"] = self.selector.value
        return data


@dataclass
class SimulationSummary:
    config: SimulationConfig
    tau: float
    selectors: Dict[str, SelectorSummary]
    records: pd.DataFrame = field(repr=False)

    def to_frame(self) -> pd.DataFrame:
        rows = [s.to_dict() for s in self.selectors.values()]
        frame = pd.DataFrame(rows)
        frame.insert(0, "design", self.config.resolve_design().id)
        frame.insert(1, "n", self.config.n)
        return frame

    def to_dict(self) -> Dict[str, Any]:
        return {
            "config": self.config.model_dump(mode="json", exclude={"progress", "jobs"}),
            "tau": self.tau,
            "selectors": {name: s.to_dict() for name, s in self.selectors.items()},
        }


def _trim_keep(errors: np.ndarray, trim: float, mode: TrimMode) -> np.ndarray:
    """Boolean mask of retained replications"""
    count = errors.size
    keep = np.ones(count, dtype=bool)
    if trim <= 0 or count == 0:
        return keep
    if TrimMode(mode) is TrimMode.ABSOLUTE:
        drop = math.ceil(trim * count - 1e-9)
        if drop:
            order = np.argsort(-np.abs(errors), kind="stable")
            keep[order[:drop]] = False
    else:
        drop = math.ceil(trim * count / 2 - 1e-9)
        if drop:
            order = np.argsort(errors, kind="stable")
            keep[order[:drop]] = False
            keep[order[count - drop:]] = False
    return keep


def trimmed_moments(
    errors: Sequence[float],
    trim: float = 0.05,
    mode: TrimMode = TrimMode.ABSOLUTE,
) -> Tuple[float, float]:
    """
    Bias and RMSE after trimming

    Absolute mode drops ceil(trim*N) errors with the largest magnitude;
    tails mode drops ceil(trim*N/2) from each tail of the signed errors.
    """
    e = np.asarray(errors, dtype=float)
    if e.size == 0:
        raise ValueError("trimmed_moments needs at least one error")
    kept = e[_trim_keep(e, trim, mode)]
    bias = math.fsum(kept) / kept.size
    rmse = math.sqrt(math.fsum(kept ** 2) / kept.size)
    return bias, rmse


def _mean_sd(values: np.ndarray) -> Tuple[float, float]:
    if values.size == 0:
        return float("nan"), float("nan")
    mean = math.fsum(values) / values.size
    if values.size < 2:
        return mean, 0.0
    return mean, math.sqrt(math.fsum((values - mean) ** 2) / (values.size - 1))


def _run_chunk(
    design: Design,
    n: int,
    selectors: List[Selector],
    kernel: KernelKind,
    seed: int,
    replications: List[int],
) -> List[Dict[str, Any]]:
    """Worker: run a block of replications and return flat records"""
    pilot_estimator = PilotEstimator(kernel)
    estimators = {s: SharpRDEstimator(s, kernel) for s in selectors}
    records = []

    for rep in replications:
        sample = sample_design(design, n, replication_seed(seed, rep))
        pilots, pilot_error = None, None
        try:
            pilots = pilot_estimator.estimate(sample)
        except RDBandwidthError as e:
            pilot_error = str(e)

        for selector in selectors:
            record = {"rep": rep, "selector": selector.value, "tau_hat": np.nan, "m1_hat": np.nan,
                      "m0_hat": np.nan, "h1": np.nan, "h0": np.nan, "error": pilot_error}
            if pilots is not None:
                try:
                    result = estimators[selector].estimate(sample, pilots=pilots)
                    record.update(tau_hat=result.tau_hat, m1_hat=result.m1_hat, m0_hat=result.m0_hat,
                                  h1=result.bandwidths.h1, h0=result.bandwidths.h0)
                except RDBandwidthError as e:
                    record["error"] = str(e)
            records.append(record)
    return records


class MonteCarloRunner:
    """Runs replications, in parallel when jobs > 1, and aggregates them"""

    def __init__(self, config: SimulationConfig):
        self.config = config
        self.design = config.resolve_design()
        self.logger = logging.getLogger(self.__class__.__name__)
        self.stats = {"processed_reps": 0, "failed_records": 0}

    def _chunks(self) -> List[List[int]]:
        reps = self.config.reps
        size = max(1, math.ceil(reps / (self.config.jobs * 4)))
        return [list(range(start, min(start + size, reps))) for start in range(0, reps, size)]

    def collect_records(self) -> pd.DataFrame:
        cfg = self.config
        args = (self.design, cfg.n, list(cfg.selectors), cfg.kernel, cfg.seed)
        chunks = self._chunks()
        records: List[Dict[str, Any]] = []
        self.logger.info(
            f"Running design {self.design.id}, n={cfg.n}, reps={cfg.reps}, "
            f"selectors={[s.value for s in cfg.selectors]} on {cfg.jobs} worker(s)"
        )

        with tqdm(total=cfg.reps, desc=f"design {self.design.id} n={cfg.n}", disable=not cfg.progress) as bar:
            if cfg.jobs == 1:
                for chunk in chunks:
                    records.extend(_run_chunk(*args, chunk))
                    bar.update(len(chunk))
            else:
                with ProcessPoolExecutor(max_workers=cfg.jobs) as executor:
                    future_to_chunk = {executor.submit(_run_chunk, *args, chunk): chunk for chunk in chunks}
                    for future in as_completed(future_to_chunk):
                        records.extend(future.result())
                        bar.update(len(future_to_chunk[future]))

        frame = pd.DataFrame(records)
        selector_rank = {s.value: i for i, s in enumerate(cfg.selectors)}
        frame["_rank"] = frame["selector"].map(selector_rank)
        frame = frame.sort_values(["rep", "_rank"], kind="stable").drop(columns="_rank").reset_index(drop=True)

        self.stats["processed_reps"] = cfg.reps
        self.stats["failed_records"] = int(frame["error"].notna().sum())
        return frame

    def summarize(self, records: pd.DataFrame) -> SimulationSummary:
        cfg = self.config
        tau = self.design.tau

        try:
            star = rmse_star_table(self.design, cfg.n, cfg.selectors, cfg.kernel).set_index("selector")
        except RDBandwidthError as e:
            self.logger.warning(f"RMSE* unavailable for design {self.design.id}: {e}")
            star = None

        partial = {}
        for selector in cfg.selectors:
            rows = records[records["selector"] == selector.value]
            ok = rows[rows["error"].isna()]
            errors = ok["tau_hat"].to_numpy() - tau
            failures = len(rows) - len(ok)

            if errors.size:
                bias, rmse = trimmed_moments(errors, cfg.trim, cfg.trim_mode)
                n_used = int(_trim_keep(errors, cfg.trim, cfg.trim_mode).sum())
                median_abs = float(np.median(np.abs(errors)))
            else:
                bias = rmse = median_abs = float("nan")
                n_used = 0
            mean_h1, sd_h1 = _mean_sd(ok["h1"].to_numpy())
            mean_h0, sd_h0 = _mean_sd(ok["h0"].to_numpy())

            partial[selector.value] = dict(
                selector=selector, mean_h1=mean_h1, sd_h1=sd_h1, mean_h0=mean_h0, sd_h0=sd_h0,
                trimmed_bias=bias, trimmed_rmse=rmse, median_abs_error=median_abs,
                failures=failures, n_used=n_used,
                rmse_star=float(star.loc[selector.value, "rmse_star"]) if star is not None else float("nan"),
                eff_star=float(star.loc[selector.value, "eff_star"]) if star is not None else float("nan"),
            )

        best = min((p["trimmed_rmse"] for p in partial.values() if not math.isnan(p["trimmed_rmse"])), default=float("nan"))
        summaries = {}
        for name, p in partial.items():
            eff = best / p["trimmed_rmse"] if p["trimmed_rmse"] > 0 else (1.0 if best == 0 else float("nan"))
            summaries[name] = SelectorSummary(eff=eff, **p)

        summary = SimulationSummary(config=cfg, tau=tau, selectors=summaries, records=records)

        worst = max(summaries.values(), key=lambda s: s.failures)
        if worst.failures > MAX_FAILURE_SHARE * cfg.reps:
            raise SimulationAborted(
                f"{worst.failures}/{cfg.reps} replications failed for {worst.selector.value}",
                summary=summary,
                stage="simulate",
            )
        return summary

    def run(self) -> SimulationSummary:
        records = self.collect_records()
        summary = self.summarize(records)
        self.logger.info(f"Simulation finished: {self.stats['processed_reps']} replications, "
                         f"{self.stats['failed_records']} failed selector runs")
        return summary


SimulationInput = Union[SimulationConfig, SimulationSummary]


def run_simulation(config: SimulationConfig) -> SimulationSummary:
    return MonteCarloRunner(config).run()


def _as_summary(source: SimulationInput) -> SimulationSummary:
    if isinstance(source, SimulationSummary):
        return source
    return run_simulation(source)


def error_cdf(source: SimulationInput, grid: Optional[Sequence[float]] = None, points: int = 201) -> pd.DataFrame:
    """
    Empirical CDF of |tau_hat - tau| per selector on a shared grid

    The default grid ends at the largest absolute error so the last row is 1.
    """
    summary = _as_summary(source)
    records = summary.records[summary.records["error"].isna()]
    abs_errors = {
        s.value: np.sort(np.abs(records.loc[records["selector"] == s.value, "tau_hat"].to_numpy() - summary.tau))
        for s in summary.config.selectors
    }
    if grid is None:
        top = max((e[-1] for e in abs_errors.values() if e.size), default=0.0)
        grid = np.linspace(0.0, top, points)
    grid = np.asarray(grid, dtype=float)

    table = pd.DataFrame({"t": grid})
    for name, errors in abs_errors.items():
        if errors.size:
            table[name] = np.searchsorted(errors, grid, side="right") / errors.size
        else:
            table[name] = np.nan
    return table


def mean_function_errors(source: SimulationInput) -> pd.DataFrame:
    """Trimmed bias and RMSE of the one-sided limits m1_hat and m0_hat"""
    summary = _as_summary(source)
    cfg = summary.config
    design = cfg.resolve_design()
    truth = {"m1": float(design.m1(design.cutoff)), "m0": float(design.m0(design.cutoff))}
    records = summary.records[summary.records["error"].isna()]

    rows = []
    for selector in cfg.selectors:
        ok = records[records["selector"] == selector.value]
        row: Dict[str, Any] = {"selector": selector.value}
        for name, true_value in truth.items():
            errors = ok[f"{name}_hat"].to_numpy() - true_value
            if errors.size:
                row[f"{name}_bias"], row[f"{name}_rmse"] = trimmed_moments(errors, cfg.trim, cfg.trim_mode)
            else:
                row[f"{name}_bias"] = row[f"{name}_rmse"] = float("nan")
        rows.append(row)
    return pd.DataFrame(rows)
