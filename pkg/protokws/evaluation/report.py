import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Sequence, Union

from loguru import logger

from protokws.classify.methods import Prediction
from protokws.errors import IoFailure, MalformedRecord
from protokws.evaluation.metrics import OutcomeCounts, compute_score, tally_outcomes

PathLike = Union[str, Path]


@dataclass(frozen=True)
class EvalReport:
    method: str
    checkpoint: str
    counts: OutcomeCounts
    far: float
    frr: float
    score: float

    @classmethod
    def from_counts(
        cls, counts: OutcomeCounts, method: str = "", checkpoint: str = ""
    ) -> "EvalReport":
        rates = compute_score(counts)
        return cls(
            method=method,
            checkpoint=checkpoint,
            counts=counts,
            far=rates.far,
            frr=rates.frr,
            score=rates.score,
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "method": self.method,
            "checkpoint": self.checkpoint,
            "n_wake": self.counts.n_wake,
            "n_non_wake": self.counts.n_non_wake,
            "n_fr": self.counts.n_fr,
            "n_fa": self.counts.n_fa,
            "n_confused": self.counts.n_confused,
            "far": self.far,
            "frr": self.frr,
            "score": self.score,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "EvalReport":
        try:
            counts = OutcomeCounts(
                n_wake=int(data["n_wake"]),
                n_non_wake=int(data["n_non_wake"]),
                n_fr=int(data["n_fr"]),
                n_fa=int(data["n_fa"]),
                n_confused=int(data.get("n_confused", 0)),
            )
            return cls(
                method=str(data["method"]),
                checkpoint=str(data["checkpoint"]),
                counts=counts,
                far=float(data["far"]),
                frr=float(data["frr"]),
                score=float(data["score"]),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise MalformedRecord("Invalid evaluation report", developer_message=str(e)) from e


def evaluate_predictions(
    predictions: Sequence[Union[Prediction, int]],
    gold: Sequence[int],
    method: str = "",
    checkpoint: str = "",
) -> EvalReport:
    report = EvalReport.from_counts(tally_outcomes(predictions, gold), method, checkpoint)
    logger.info(
        f"{method or 'predictions'}: FAR {report.far:.4f} FRR {report.frr:.4f} "
        f"Score {report.score:.4f}"
    )
    return report


def report_json(report: EvalReport) -> str:
    return json.dumps(report.to_dict(), indent=2) + "\n"


def write_report(report: EvalReport, path: PathLike) -> None:
    """Write the report as JSON; floats are stored at full precision."""
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(report_json(report), encoding="utf-8")
    except OSError as e:
        raise IoFailure(f"Cannot write report {target}", str(e)) from e


def read_report(path: PathLike) -> EvalReport:
    source = Path(path)
    try:
        text = source.read_text(encoding="utf-8")
    except OSError as e:
        raise IoFailure(f"Cannot read report {source}", str(e)) from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise MalformedRecord(f"Report {source} is not JSON", developer_message=str(e)) from e
    if not isinstance(data, dict):
        raise MalformedRecord(f"Report {source} is not a JSON object")
    return EvalReport.from_dict(data)
