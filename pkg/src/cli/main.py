"""
Command-line interface for RD bandwidth selection
Subcommands: estimate, simulate, rmse-star, efficiency, truth, sample
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Literal, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, ValidationError, model_validator

from src.core.bandwidth import BandwidthPair, SearchConfig, Selector, search_config_default
from src.core.estimator import SharpRDEstimator
from src.core.exceptions import ConfigInvalid, RDBandwidthError, SimulationAborted
from src.core.kernels import KernelKind
from src.core.lpr import RegressionSample
from src.core.settings import configure_logging, load_settings
from src.simulation.designs import design_truth, get_design, load_design, sample_design
from src.simulation.reporting import ResultExporter, format_estimate, format_summary_table
from src.simulation.simulate import (
    SimulationConfig,
    TrimMode,
    error_cdf,
    mean_function_errors,
    run_simulation,
)
from src.simulation.theory import EfficiencyCase, efficiency_surface, rmse_star_table

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_COMPUTATION = 3

WEIGHT_KERNELS = [k.value for k in KernelKind if k is not KernelKind.JONES_DERIVATIVE]


class CliConfig(BaseModel):
    """Validated command-line options"""
    subcommand: Literal["estimate", "simulate", "rmse-star", "efficiency", "truth", "sample"]
    input: Optional[Path] = None
    output: Optional[Path] = None
    format: Literal["text", "json", "csv"] = "text"
    selector: Selector = Selector.MMSE
    selectors: List[Selector] = Field(default_factory=lambda: [Selector.MMSE, Selector.IND, Selector.IK])
    cutoff: float = 0.0
    kernel: KernelKind = KernelKind.TRIANGULAR
    seed: int = Field(default=0, ge=0)
    reps: Optional[int] = Field(default=None, ge=1)
    n: List[int] = Field(default_factory=list)
    design_id: int = Field(default=1, ge=1)
    design_file: Optional[Path] = None
    h1: Optional[float] = Field(default=None, gt=0)
    h0: Optional[float] = Field(default=None, gt=0)
    h_min: Optional[float] = Field(default=None, gt=0)
    h_max: Optional[float] = Field(default=None, gt=0)
    starts: int = Field(default=8, ge=1, le=50)
    trim: float = Field(default=0.05, ge=0.0, lt=0.5)
    trim_mode: TrimMode = TrimMode.ABSOLUTE
    jobs: int = Field(default=1, ge=1)
    cdf: bool = False
    mean_functions: bool = False
    case: EfficiencyCase = EfficiencyCase.NEGATIVE
    gamma: Optional[List[float]] = None
    gamma1: Optional[List[float]] = None
    gamma2: Optional[List[float]] = None
    progress: bool = True

    @model_validator(mode="after")
    def check_required(self) -> "CliConfig":
        cmd = self.subcommand
        if cmd == "estimate":
            if self.input is None:
                raise ValueError("estimate requires --input")
            if self.selector is Selector.MANUAL and (self.h1 is None or self.h0 is None):
                raise ValueError("--selector manual requires --h1 and --h0")
            if self.kernel is KernelKind.JONES_DERIVATIVE:
                raise ValueError("estimation needs a weight kernel")
        if cmd in ("simulate", "rmse-star", "sample") and not self.n:
            raise ValueError(f"{cmd} requires --n")
        if any(v < 1 for v in self.n):
            raise ValueError("--n values must be >= 1")
        if Selector.MANUAL in self.selectors:
            raise ValueError("manual is not a selector for simulations or RMSE*")
        if cmd == "simulate" and self.reps is None:
            raise ValueError("simulate requires --reps")
        if cmd == "sample" and self.output is None:
            raise ValueError("sample requires --output")
        if (self.h_min is None) != (self.h_max is None):
            raise ValueError("--h-min and --h-max go together")
        if self.h_min is not None and self.h_min >= self.h_max:
            raise ValueError("--h-min must be below --h-max")
        return self


def _csv_list(value: str) -> List[str]:
    return [part.strip() for part in value.split(",") if part.strip()]


def build_parser(settings=None) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rdbw", description="Two-sided bandwidth selection for sharp RD designs")
    parser.add_argument("--log-level", default=settings.log_level if settings else "INFO")
    parser.add_argument("--quiet", action="store_true", help="Disable progress bars")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--output", type=Path, help="Output file (estimate/theory) or directory (simulate)")
        p.add_argument("--format", choices=["text", "json", "csv"], default="text")
        p.add_argument("--kernel", choices=WEIGHT_KERNELS, default=KernelKind.TRIANGULAR.value)

    def design_options(p: argparse.ArgumentParser) -> None:
        p.add_argument("--design", dest="design_id", type=int, default=1)
        p.add_argument("--design-file", type=Path, help="Custom design YAML")

    p = sub.add_parser("estimate", help="Estimate the jump at the cutoff from a CSV with columns y,x")
    common(p)
    p.add_argument("--input", type=Path)
    p.add_argument("--cutoff", type=float, default=0.0)
    p.add_argument("--selector", choices=[s.value for s in Selector], default=Selector.MMSE.value)
    p.add_argument("--h1", type=float)
    p.add_argument("--h0", type=float)
    p.add_argument("--h-min", type=float)
    p.add_argument("--h-max", type=float)
    p.add_argument("--starts", type=int, default=8)

    p = sub.add_parser("simulate", help="Monte-Carlo comparison of selectors")
    common(p)
    design_options(p)
    p.add_argument("--n", type=int, nargs="+")
    p.add_argument("--reps", type=int)
    p.add_argument("--selectors", type=_csv_list, default=["mmse", "ind", "ik"])
    p.add_argument("--trim", type=float, default=0.05)
    p.add_argument("--trim-mode", choices=[m.value for m in TrimMode], default=TrimMode.ABSOLUTE.value)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=settings.jobs if settings else 1)
    p.add_argument("--cdf", action="store_true", help="Also write the |error| CDF table")
    p.add_argument("--mean-functions", action="store_true", help="Also write one-sided limit errors")

    p = sub.add_parser("rmse-star", help="Theoretical RMSE* and Eff* from true quantities")
    common(p)
    design_options(p)
    p.add_argument("--n", type=int, nargs="+")
    p.add_argument("--selectors", type=_csv_list, default=["mmse", "ind", "ik"])

    p = sub.add_parser("efficiency", help="Efficiency ratio surfaces")
    common(p)
    p.add_argument("--case", choices=[c.value for c in EfficiencyCase], default=EfficiencyCase.NEGATIVE.value)
    p.add_argument("--gamma", type=float, nargs="+")
    p.add_argument("--gamma1", type=float, nargs="+")
    p.add_argument("--gamma2", type=float, nargs="+")

    p = sub.add_parser("truth", help="Population quantities of a design")
    common(p)
    design_options(p)

    p = sub.add_parser("sample", help="Export a simulated design sample as CSV")
    common(p)
    design_options(p)
    p.add_argument("--n", type=int, nargs=1)
    p.add_argument("--seed", type=int, default=0)
    return parser


def to_cli_config(args: argparse.Namespace) -> CliConfig:
    values = {k: v for k, v in vars(args).items() if v is not None and k not in ("log_level", "quiet")}
    if "selectors" in values:
        values["selectors"] = [s.lower() for s in values["selectors"]]
    values["progress"] = not args.quiet
    try:
        return CliConfig(**values)
    except ValidationError as e:
        raise ConfigInvalid(str(e), stage="arguments")


def read_sample_csv(path: Path, cutoff: float) -> RegressionSample:
    """Read columns y,x; report the first unparseable line"""
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except FileNotFoundError:
        raise ConfigInvalid(f"input file not found: {path}", stage="input")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise ConfigInvalid(f"cannot parse {path}: {e}", stage="input")

    frame.columns = [str(c).strip() for c in frame.columns]
    for column in ("y", "x"):
        if column not in frame.columns:
            raise ConfigInvalid(f"missing column {column} in {path}", stage="input")
    if frame.empty:
        raise ConfigInvalid(f"no observations in {path}", stage="input")

    for column in ("y", "x"):
        values = pd.to_numeric(frame[column], errors="coerce").astype(float)
        bad = np.flatnonzero(~np.isfinite(values.to_numpy()))
        if bad.size:
            # header is line 1
            raise ConfigInvalid(f"line {int(bad[0]) + 2}: column {column} value {frame[column].iloc[bad[0]]!r} is not a number",
                                stage="input")
        frame[column] = values

    return RegressionSample(x=frame["x"].to_numpy(), y=frame["y"].to_numpy(), c=cutoff)


def _emit(text: str, output: Optional[Path]) -> None:
    if output is None:
        print(text)
    else:
        output.parent.mkdir(parents=True, exist_ok=True)
        output.write_text(text + "\n")
        logger.info(f"Wrote {output}")


def _emit_table(table: pd.DataFrame, cfg: CliConfig) -> None:
    if cfg.format == "json":
        _emit(json.dumps(table.to_dict(orient="records"), indent=2, default=str), cfg.output)
    elif cfg.format == "csv":
        _emit(table.to_csv(index=False).rstrip("\n"), cfg.output)
    else:
        _emit(table.to_string(index=False), cfg.output)


def _design(cfg: CliConfig):
    return load_design(cfg.design_file) if cfg.design_file is not None else get_design(cfg.design_id)


def cmd_estimate(cfg: CliConfig) -> int:
    sample = read_sample_csv(cfg.input, cfg.cutoff)
    search: Optional[SearchConfig] = None
    if cfg.h_min is not None:
        search = SearchConfig(h1_bounds=(cfg.h_min, cfg.h_max), h0_bounds=(cfg.h_min, cfg.h_max), starts_per_axis=cfg.starts)
    elif cfg.selector is Selector.MMSE and cfg.starts != 8:
        search = search_config_default(sample, starts_per_axis=cfg.starts)

    overrides = None
    if cfg.selector is Selector.MANUAL:
        overrides = BandwidthPair(cfg.h1, cfg.h0, Selector.MANUAL)

    selector = Selector.MMSE if cfg.selector is Selector.MANUAL else cfg.selector
    result = SharpRDEstimator(selector, cfg.kernel, search).estimate(sample, overrides=overrides)

    if cfg.format == "json":
        _emit(json.dumps(result.to_dict(), indent=2, default=str), cfg.output)
    elif cfg.format == "csv":
        row = {"tau_hat": result.tau_hat, "m1_hat": result.m1_hat, "m0_hat": result.m0_hat,
               "h1": result.bandwidths.h1, "h0": result.bandwidths.h0, "selector": result.bandwidths.selector.value,
               "se": result.se, "n_effective_right": result.n_effective.right,
               "n_effective_left": result.n_effective.left}
        _emit(pd.DataFrame([row]).to_csv(index=False).rstrip("\n"), cfg.output)
    else:
        _emit(format_estimate(result), cfg.output)
    return EXIT_OK


def cmd_simulate(cfg: CliConfig) -> int:
    design = _design(cfg)
    output_dir = cfg.output or Path("results")
    exporter = ResultExporter(output_dir)
    status = EXIT_OK

    for n in cfg.n:
        config = SimulationConfig.build(
            design_id=design.id, design=design, n=n, reps=cfg.reps, selectors=cfg.selectors,
            trim=cfg.trim, trim_mode=cfg.trim_mode, seed=cfg.seed, jobs=cfg.jobs,
            kernel=cfg.kernel, progress=cfg.progress,
        )
        try:
            summary = run_simulation(config)
        except SimulationAborted as e:
            if e.summary is None:
                raise
            logger.error(str(e))
            summary, status = e.summary, EXIT_COMPUTATION

        name = f"design{design.id}_n{n}"
        cdf = error_cdf(summary) if cfg.cdf else None
        exporter.export_summary(summary, name, cdf=cdf)
        if cfg.mean_functions:
            exporter.export_table(mean_function_errors(summary), f"{name}_mean_functions")
        print(format_summary_table(summary))
        if status != EXIT_OK:
            print(f"error [simulate]: replication failure share above threshold for n={n}", file=sys.stderr)
            return status
    return status


def cmd_rmse_star(cfg: CliConfig) -> int:
    design = _design(cfg)
    table = pd.concat([rmse_star_table(design, n, cfg.selectors, cfg.kernel) for n in cfg.n], ignore_index=True)
    _emit_table(table, cfg)
    return EXIT_OK


def cmd_efficiency(cfg: CliConfig) -> int:
    table = efficiency_surface(cfg.case, gamma1=cfg.gamma1, gamma2=cfg.gamma2, gamma=cfg.gamma)
    _emit_table(table, cfg)
    return EXIT_OK


def cmd_truth(cfg: CliConfig) -> int:
    design = _design(cfg)
    truth = design_truth(design, cfg.kernel).to_dict()
    truth["design"] = design.id
    truth["tau"] = design.tau
    if cfg.format == "text":
        lines = [f"design {design.id}: {design.name}"]
        for key in ("tau", "f_c", "f1_c", "p1", "p0"):
            lines.append(f"{key} = {truth[key]:.6g}")
        for key in ("m2", "m3", "sigma2", "b2"):
            right, left = truth[key]
            lines.append(f"{key} = ({right:.6g}, {left:.6g})")
        _emit("\n".join(lines), cfg.output)
    elif cfg.format == "json":
        _emit(json.dumps(truth, indent=2), cfg.output)
    else:
        flat = {k: v for k, v in truth.items() if not isinstance(v, list)}
        for key in ("m2", "m3", "sigma2", "b2"):
            flat[f"{key}_right"], flat[f"{key}_left"] = truth[key]
        _emit(pd.DataFrame([flat]).to_csv(index=False).rstrip("\n"), cfg.output)
    return EXIT_OK


def cmd_sample(cfg: CliConfig) -> int:
    design = _design(cfg)
    sample = sample_design(design, cfg.n[0], cfg.seed)
    cfg.output.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame({"y": sample.y, "x": sample.x}).to_csv(cfg.output, index=False)
    logger.info(f"Wrote {sample.n} observations of design {design.id} to {cfg.output}")
    return EXIT_OK


COMMANDS = {
    "estimate": cmd_estimate,
    "simulate": cmd_simulate,
    "rmse-star": cmd_rmse_star,
    "efficiency": cmd_efficiency,
    "truth": cmd_truth,
    "sample": cmd_sample,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        settings = load_settings()
    except ConfigInvalid as e:
        print(f"error [{e.location}]: {e.message}", file=sys.stderr)
        return EXIT_USAGE

    parser = build_parser(settings)
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else EXIT_OK

    configure_logging(args.log_level)
    if not settings.progress:
        args.quiet = True

    try:
        cfg = to_cli_config(args)
        return COMMANDS[cfg.subcommand](cfg)
    except ConfigInvalid as e:
        print(f"error [{e.location or 'config'}]: {e.message}", file=sys.stderr)
        return EXIT_USAGE
    except RDBandwidthError as e:
        print(f"error [{e.location or 'computation'}]: {e.message}", file=sys.stderr)
        return EXIT_COMPUTATION


if __name__ == "__main__":
    sys.exit(main())
