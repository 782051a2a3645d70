"""
Writes simulation summaries and theory tables to CSV/JSON and renders text tables
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

import pandas as pd

from src.core.estimator import RdEstimate
from src.simulation.simulate import SimulationSummary

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = [
    ("mean_h1", "Mean h1"), ("sd_h1", "SD h1"), ("mean_h0", "Mean h0"), ("sd_h0", "SD h0"),
    ("trimmed_bias", "Bias"), ("trimmed_rmse", "RMSE"), ("eff", "Eff"),
    ("rmse_star", "RMSE*"), ("eff_star", "Eff*"),
]


class ResultExporter:
    """
    Exports results to an output directory
    """

    def __init__(self, output_dir: Path):
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.logger = logging.getLogger(self.__class__.__name__)

    def export_table(self, table: pd.DataFrame, name: str) -> Path:
        csv_file = self.output_dir / f"{name}.csv"
        table.to_csv(csv_file, index=False)
        self.logger.info(f"Exported {len(table)} rows to {csv_file}")
        return csv_file

    def export_json(self, payload: Dict[str, Any], name: str) -> Path:
        json_file = self.output_dir / f"{name}.json"
        with open(json_file, "w") as f:
            json.dump(payload, f, indent=2, default=str)
        self.logger.info(f"Exported {name} to {json_file}")
        return json_file

    def export_summary(self, summary: SimulationSummary, name: str,
                       cdf: Optional[pd.DataFrame] = None) -> List[Path]:
        """Summary CSV + JSON, and the error CDF when given"""
        written = [
            self.export_table(summary.to_frame(), f"{name}_summary"),
            self.export_json(summary.to_dict(), f"{name}_summary"),
        ]
        if cdf is not None:
            written.append(self.export_table(cdf, f"{name}_cdf"))
        return written


def format_summary_table(summary: SimulationSummary) -> str:
    """Plain-text table with one row per selector"""
    design = summary.config.resolve_design()
    header = f"{'Selector':<9}" + "".join(f"{label:>9}" for _, label in SUMMARY_COLUMNS) + f"{'Fail':>6}"
    lines = [f"Design {design.id}, n = {summary.config.n}, reps = {summary.config.reps}", header, "-" * len(header)]
    for name, s in summary.selectors.items():
        values = s.to_dict()
        row = f"{name.upper():<9}" + "".join(f"{values[key]:>9.3f}" for key, _ in SUMMARY_COLUMNS)
        lines.append(row + f"{s.failures:>6d}")
    return "\n".join(lines)


def format_estimate(result: RdEstimate) -> str:
    h = result.bandwidths
    se = f"({result.se:.4f})" if result.se is not None else "(n/a)"
    return "\n".join([
        f"tau_hat = {result.tau_hat:.6f} {se}",
        f"bandwidths <{h.h1:.4f}, {h.h0:.4f}> [{h.selector.value}]",
        f"n_effective [{result.n_effective.right}, {result.n_effective.left}]",
        f"m1_hat = {result.m1_hat:.6f}, m0_hat = {result.m0_hat:.6f}",
    ])
