#!/usr/bin/env python3
"""
Reproduction pipeline for the selector comparison tables
Writes RMSE* tables, efficiency surfaces and (optionally) Monte-Carlo summaries
"""

import sys
from pathlib import Path

# Add src to path
sys.path.append(str(Path(__file__).parent.parent))

import argparse
import logging

import pandas as pd

from src.core.settings import configure_logging, load_settings
from src.simulation.designs import available_designs, get_design
from src.simulation.reporting import ResultExporter, format_summary_table
from src.simulation.simulate import SimulationConfig, error_cdf, mean_function_errors, run_simulation
from src.simulation.theory import EfficiencyCase, efficiency_surface, rate_table, rmse_star_table

logger = logging.getLogger(__name__)

SAMPLE_SIZES = (500, 2000, 5000)


def main():
    """Run the complete reproduction pipeline"""
    settings = load_settings()
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--output", type=Path, default=Path("results"))
    parser.add_argument("--reps", type=int, default=0, help="Monte-Carlo replications per cell (0 skips simulations)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--jobs", type=int, default=settings.jobs)
    args = parser.parse_args()

    configure_logging(settings.log_level)
    exporter = ResultExporter(args.output)

    # Step 1: theoretical RMSE* for every design and sample size
    logger.info("Step 1: computing RMSE* tables...")
    cells = [rmse_star_table(get_design(d), n) for d in available_designs() for n in SAMPLE_SIZES]
    exporter.export_table(pd.concat(cells, ignore_index=True), "rmse_star")

    # Step 2: efficiency surfaces and rate tables
    logger.info("Step 2: computing efficiency surfaces...")
    exporter.export_table(efficiency_surface(EfficiencyCase.NEGATIVE), "efficiency_negative")
    exporter.export_table(efficiency_surface(EfficiencyCase.EQUAL), "efficiency_equal")
    exporter.export_table(rate_table(get_design(4), [10 ** k for k in range(3, 10)]), "rates_design4")

    # Step 3: Monte-Carlo cells
    if args.reps <= 0:
        logger.info("Skipping simulations (--reps 0)")
        return

    logger.info("Step 3: running simulations...")
    for design_id in available_designs():
        for n in SAMPLE_SIZES:
            config = SimulationConfig.build(design_id=design_id, n=n, reps=args.reps, seed=args.seed,
                                            jobs=args.jobs, progress=settings.progress)
            summary = run_simulation(config)
            name = f"design{design_id}_n{n}"
            exporter.export_summary(summary, name, cdf=error_cdf(summary))
            exporter.export_table(mean_function_errors(summary), f"{name}_mean_functions")
            print(format_summary_table(summary))

    logger.info("Reproduction pipeline completed successfully!")


if __name__ == "__main__":
    main()
