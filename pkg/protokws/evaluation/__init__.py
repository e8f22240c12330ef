from protokws.evaluation.metrics import (
    OutcomeCounts,
    Rates,
    compute_score,
    pool_counts,
    tally_outcomes,
)
from protokws.evaluation.report import (
    EvalReport,
    evaluate_predictions,
    read_report,
    report_json,
    write_report,
)

__all__ = [
    "OutcomeCounts",
    "Rates",
    "compute_score",
    "pool_counts",
    "tally_outcomes",
    "EvalReport",
    "evaluate_predictions",
    "read_report",
    "report_json",
    "write_report",
]
