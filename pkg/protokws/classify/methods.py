"""
The three classification settings: prototype cosine (PB-C), nearest
enrollment neighbours (KNN-C) and the encoder's own output head.

Ties between classes resolve to the lowest keyword id, non-keyword last.
"""

from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import partial
from typing import Callable, Dict, List, Optional, Union

import numpy as np
from loguru import logger
from scipy.special import log_softmax

from protokws.classify.prototypes import (
    EnrollmentData,
    EnrollmentIndex,
    PrototypeSet,
    build_enrollment_index,
    cosine_similarity,
    embed_utterance,
)
from protokws.datamodel.features import FeatureDataset
from protokws.datamodel.models import (
    CLASS_IDS,
    NON_KEYWORD,
    FeatureMode,
    Head,
    Method,
    class_index,
    is_keyword,
)
from protokws.encoder.checkpoint import EncoderCheckpoint
from protokws.encoder.network import forward, label_token, token_label
from protokws.errors import InvalidConfig


@dataclass(frozen=True)
class Prediction:
    label: int
    scores: Dict[int, float]
    method: Method

    @property
    def top_score(self) -> float:
        return self.scores[self.label]


def _argmax_label(scores: Dict[int, float]) -> int:
    # max() keeps the first maximal element, and CLASS_IDS is the tie-break order.
    return max((c for c in CLASS_IDS if c in scores), key=lambda c: scores[c])


def pbc_from_embedding(embedding: np.ndarray, protos: PrototypeSet) -> Prediction:
    scores = {c: cosine_similarity(embedding, protos[c]) for c in CLASS_IDS}
    return Prediction(label=_argmax_label(scores), scores=scores, method=Method.PBC)


def pbc_classify(
    test_feats: np.ndarray, ckpt: EncoderCheckpoint, protos: PrototypeSet
) -> Prediction:
    """
    Pick the class whose prototype is most cosine-similar to the test embedding.

    The test embedding is reduced the same way the prototypes were.
    """
    embedding = embed_utterance(ckpt, test_feats, protos.feature_mode)
    return pbc_from_embedding(embedding, protos)


def knn_from_embedding(embedding: np.ndarray, index: EnrollmentIndex, k: int = 1) -> Prediction:
    """
    Majority vote over the k most similar enrollment embeddings.

    With k = 1 each label scores its best cosine similarity. With k > 1 a
    label scores its vote count plus (best similarity + 1) / 4, which stays
    below one vote, so the most voted label wins and vote ties go to the
    label holding the closest neighbour.
    """
    if k < 1:
        raise InvalidConfig(f"k must be >= 1, got {k}")
    sims = [cosine_similarity(embedding, e) for e in index.embeddings]
    ranked = sorted(
        range(len(sims)), key=lambda i: (-sims[i], class_index(index.labels[i]), i)
    )
    best: Dict[int, float] = {}
    for i in ranked:
        best.setdefault(index.labels[i], sims[i])

    scores = best
    if k > 1:
        votes = Counter(index.labels[i] for i in ranked[:k])
        scores = {label: votes[label] + (sim + 1.0) / 4.0 for label, sim in best.items()}
    return Prediction(label=_argmax_label(scores), scores=scores, method=Method.KNN)


def knn_classify(
    test_feats: np.ndarray,
    ckpt: EncoderCheckpoint,
    enroll: Union[EnrollmentData, EnrollmentIndex],
    k: int = 1,
    mode: FeatureMode = FeatureMode.FIRST_FRAME,
) -> Prediction:
    """
    Majority label among the k most cosine-similar enrollment utterances.

    Raises:
        EmptyEnrollment: If there is nothing to compare against.
    """
    index = enroll if isinstance(enroll, EnrollmentIndex) else build_enrollment_index(
        enroll, ckpt, mode
    )
    embedding = embed_utterance(ckpt, test_feats, index.feature_mode)
    return knn_from_embedding(embedding, index, k)


def ctc_greedy_decode(ctc_logits: np.ndarray) -> int:
    """
    Best-path decode: per-frame argmax, collapse repeats, drop blank and
    special tokens. Returns the first surviving keyword, else non-keyword.
    """
    best = np.argmax(ctc_logits, axis=1)
    collapsed = [int(t) for i, t in enumerate(best) if i == 0 or t != best[i - 1]]
    labels = [token_label(t) for t in collapsed]
    keywords = [label for label in labels if label is not None and is_keyword(label)]
    return keywords[0] if keywords else NON_KEYWORD


def model_predict(
    test_feats: np.ndarray, ckpt: EncoderCheckpoint, head: Head = Head.CE
) -> Prediction:
    """
    Classify with the encoder's own output layer.

    CE scores are the 11 logits. CTC scores are, per class, the best
    per-frame log-probability of the class token.
    """
    output = forward(ckpt.params, test_feats)
    if head is Head.CE:
        scores = {c: float(output.ce_logits[class_index(c)]) for c in CLASS_IDS}
        return Prediction(label=_argmax_label(scores), scores=scores, method=Method.MODEL)

    log_probs = log_softmax(output.ctc_logits, axis=1)
    scores = {c: float(log_probs[:, label_token(c)].max()) for c in CLASS_IDS}
    label = ctc_greedy_decode(output.ctc_logits)
    return Prediction(label=label, scores=scores, method=Method.MODEL)


def classify_dataset(
    dataset: FeatureDataset,
    ckpt: EncoderCheckpoint,
    method: Method,
    protos: Optional[PrototypeSet] = None,
    enroll: Optional[Union[EnrollmentData, EnrollmentIndex]] = None,
    k: int = 1,
    head: Head = Head.CE,
    mode: FeatureMode = FeatureMode.FIRST_FRAME,
    threads: int = 1,
) -> List[Prediction]:
    """
    Classify every utterance of a dataset.

    Work is spread over at most `threads` workers; every item is computed
    independently, so the result does not depend on the thread count and is
    returned in dataset order.
    """
    classify_one: Callable[[np.ndarray], Prediction]
    if method is Method.PBC:
        if protos is None:
            raise InvalidConfig("PB-C classification needs a prototype set")
        classify_one = partial(pbc_classify, ckpt=ckpt, protos=protos)
    elif method is Method.KNN:
        if enroll is None:
            raise InvalidConfig("KNN-C classification needs an enrollment set")
        index = enroll if isinstance(enroll, EnrollmentIndex) else build_enrollment_index(
            enroll, ckpt, mode
        )
        classify_one = partial(knn_classify, ckpt=ckpt, enroll=index, k=k)
    else:
        classify_one = partial(model_predict, ckpt=ckpt, head=head)

    if threads < 1:
        raise InvalidConfig(f"threads must be >= 1, got {threads}")
    if threads == 1:
        predictions = [classify_one(feats) for feats in dataset.features]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            predictions = list(pool.map(classify_one, dataset.features))
    logger.debug(f"Classified {len(predictions)} utterances with {method.value}")
    return predictions
