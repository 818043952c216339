"""Real-time R-value estimation from daily case counts, with alternative-data ingestion and charts."""

from ._core import (
    DataError,
    RtEstimate,
    RtRecord,
    SourceError,
    UsageError,
    chart_overlay,
    estimate_chart,
    estimate_rt,
    expected_rate,
    figure_names,
    highest_density_interval,
    log_poisson_pmf,
    parse_mobility,
    parse_owid,
    parse_oxcgrt,
    parse_trends,
    run_cli,
    scenario_names,
    simulate,
    simulate_trajectory,
)

__all__ = [
    "DataError",
    "RtEstimate",
    "RtRecord",
    "SourceError",
    "UsageError",
    "chart_overlay",
    "estimate_chart",
    "estimate_rt",
    "expected_rate",
    "figure_names",
    "highest_density_interval",
    "log_poisson_pmf",
    "parse_mobility",
    "parse_owid",
    "parse_oxcgrt",
    "parse_trends",
    "run_cli",
    "scenario_names",
    "simulate",
    "simulate_trajectory",
]
