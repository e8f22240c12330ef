from enum import Enum
from typing import Tuple

from protokws.errors import InvalidLabel

NON_KEYWORD = -1
KEYWORD_IDS: Tuple[int, ...] = tuple(range(10))
# Tie-break order: lowest keyword first, non-keyword last.
CLASS_IDS: Tuple[int, ...] = KEYWORD_IDS + (NON_KEYWORD,)
N_CLASSES = len(CLASS_IDS)


# Models and enums shared across the package
class Role(str, Enum):
    """
    Dataset roles of the challenge corpora.
    """
    CONTROL = "control"
    UNCONTROL = "uncontrol"
    TARGET_ENROLL = "target_enroll"
    TARGET_EVAL = "target_eval"

    @property
    def dysarthric(self) -> bool:
        return self is not Role.CONTROL


class Split(str, Enum):
    TRAIN = "train"
    VALID = "valid"
    TEST = "test"


class Stage(str, Enum):
    """
    Products of the staged fine-tuning, in creation order.
    """
    PRETRAIN = "pretrain"
    SIC = "SIC"
    SID = "SID"
    SDD = "SDD"

    @property
    def code(self) -> int:
        return list(Stage).index(self)

    @classmethod
    def from_code(cls, code: int) -> "Stage":
        return list(cls)[code]


class Method(str, Enum):
    PBC = "pbc"
    KNN = "knn"
    MODEL = "model"


class Head(str, Enum):
    CE = "ce"
    CTC = "ctc"


class FeatureMode(str, Enum):
    """
    How an utterance's embedding sequence is reduced to one vector.
    """
    FIRST_FRAME = "first_frame"
    MEAN = "mean"


def validate_label(value: object) -> int:
    """
    Check that value is a class id in {-1, 0..9} and return it as an int.

    Raises:
        InvalidLabel: For anything else, including booleans and floats.
    """
    if isinstance(value, bool) or not isinstance(value, int) or value not in CLASS_IDS:
        raise InvalidLabel(f"Invalid label {value!r}; expected -1 or 0..9")
    return value


def class_index(label: int) -> int:
    """Map a label to its row in an 11-way output (-1 -> 10)."""
    return CLASS_IDS.index(validate_label(label))


def label_from_index(index: int) -> int:
    return CLASS_IDS[index]


def is_keyword(label: int) -> bool:
    return label != NON_KEYWORD
