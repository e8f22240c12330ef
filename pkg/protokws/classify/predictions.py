import csv
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Union

from protokws.classify.methods import Prediction
from protokws.datamodel.models import validate_label
from protokws.errors import IoFailure, LengthMismatch, MalformedRecord

PathLike = Union[str, Path]
_COLUMNS = ["utt_id", "predicted_label", "top_score"]


@dataclass(frozen=True)
class PredictionRow:
    utt_id: str
    predicted_label: int
    top_score: float


def prediction_rows(
    utt_ids: Sequence[str], predictions: Sequence[Prediction]
) -> List[PredictionRow]:
    if len(utt_ids) != len(predictions):
        raise LengthMismatch(f"{len(predictions)} predictions for {len(utt_ids)} utterances")
    return [
        PredictionRow(utt_id=u, predicted_label=p.label, top_score=p.top_score)
        for u, p in zip(utt_ids, predictions)
    ]


def write_predictions(rows: Sequence[PredictionRow], path: PathLike) -> None:
    """Write a tab-separated predictions file with a header row."""
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        with open(target, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, delimiter="\t", lineterminator="\n")
            writer.writerow(_COLUMNS)
            for row in rows:
                writer.writerow([row.utt_id, row.predicted_label, repr(row.top_score)])
    except OSError as e:
        raise IoFailure(f"Cannot write predictions {target}", str(e)) from e


def read_predictions(path: PathLike) -> List[PredictionRow]:
    """
    Raises:
        MalformedRecord: If the header or a row does not parse.
    """
    source = Path(path)
    try:
        with open(source, newline="", encoding="utf-8") as handle:
            rows = list(csv.reader(handle, delimiter="\t"))
    except OSError as e:
        raise IoFailure(f"Cannot read predictions {source}", str(e)) from e
    if not rows or rows[0] != _COLUMNS:
        raise MalformedRecord(f"Predictions file {source} lacks the header {_COLUMNS}", 1)

    parsed = []
    for line_number, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        try:
            utt_id, label, score = row
            parsed.append(
                PredictionRow(
                    utt_id=utt_id,
                    predicted_label=validate_label(int(label)),
                    top_score=float(score),
                )
            )
        except ValueError as e:
            raise MalformedRecord(
                f"Predictions file {source} line {line_number} is malformed", line_number, str(e)
            ) from e
    return parsed
