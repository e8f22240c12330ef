"""
Challenge metric: Score = FAR + FRR.

FRR = N_FR / N_wake, where a keyword sample counts as falsely rejected
whenever it is not predicted as its own keyword (non-keyword or a
different keyword). FAR = N_FA / N_non-wake, where a non-keyword sample
predicted as any keyword is a false acceptance.
"""

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence, Union

from protokws.classify.methods import Prediction
from protokws.datamodel.models import is_keyword, validate_label
from protokws.errors import EmptyStratum, LengthMismatch, MalformedRecord


@dataclass(frozen=True)
class OutcomeCounts:
    n_wake: int
    n_non_wake: int
    n_fr: int
    n_fa: int
    n_confused: int = 0

    def __post_init__(self) -> None:
        if not (
            0 <= self.n_fr <= self.n_wake
            and 0 <= self.n_fa <= self.n_non_wake
            and 0 <= self.n_confused <= self.n_fr
        ):
            raise MalformedRecord(f"Inconsistent outcome counts {self}")

    def __add__(self, other: "OutcomeCounts") -> "OutcomeCounts":
        return OutcomeCounts(
            n_wake=self.n_wake + other.n_wake,
            n_non_wake=self.n_non_wake + other.n_non_wake,
            n_fr=self.n_fr + other.n_fr,
            n_fa=self.n_fa + other.n_fa,
            n_confused=self.n_confused + other.n_confused,
        )


@dataclass(frozen=True)
class Rates:
    far: float
    frr: float
    score: float


def _label(prediction: Union[Prediction, int]) -> int:
    if isinstance(prediction, Prediction):
        return prediction.label
    return validate_label(prediction)


def tally_outcomes(
    predictions: Sequence[Union[Prediction, int]], gold: Sequence[int]
) -> OutcomeCounts:
    """
    Count wake/non-wake samples and their errors.

    Raises:
        LengthMismatch: If predictions and gold differ in length.
    """
    if len(predictions) != len(gold):
        raise LengthMismatch(
            f"Got {len(predictions)} predictions for {len(gold)} gold labels"
        )
    n_wake = n_non_wake = n_fr = n_fa = n_confused = 0
    for prediction, truth in zip(predictions, gold):
        predicted = _label(prediction)
        if is_keyword(validate_label(truth)):
            n_wake += 1
            if predicted != truth:
                n_fr += 1
                if is_keyword(predicted):
                    n_confused += 1
        else:
            n_non_wake += 1
            if is_keyword(predicted):
                n_fa += 1
    return OutcomeCounts(
        n_wake=n_wake, n_non_wake=n_non_wake, n_fr=n_fr, n_fa=n_fa, n_confused=n_confused
    )


def pool_counts(parts: Iterable[OutcomeCounts]) -> OutcomeCounts:
    """Sum counts from several evaluation sets into one pool."""
    total = OutcomeCounts(n_wake=0, n_non_wake=0, n_fr=0, n_fa=0)
    for part in parts:
        total = total + part
    return total


def compute_score(counts: OutcomeCounts) -> Rates:
    """
    FAR, FRR and their sum, each the correctly rounded float of the exact ratio.

    Raises:
        EmptyStratum: If there are no keyword or no non-keyword samples.
    """
    if counts.n_wake == 0 or counts.n_non_wake == 0:
        raise EmptyStratum(
            "Evaluation needs both keyword and non-keyword samples",
            f"n_wake={counts.n_wake} n_non_wake={counts.n_non_wake}",
        )
    frr = Fraction(counts.n_fr, counts.n_wake)
    far = Fraction(counts.n_fa, counts.n_non_wake)
    # The exact sum is rounded once, so score can differ from the float far + frr
    # in the last bit (80/20/2/1 gives 0.075, the float sum 0.07500000000000001).
    return Rates(far=float(far), frr=float(frr), score=float(far + frr))
