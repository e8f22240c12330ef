from protokws.classify.methods import (
    Prediction,
    classify_dataset,
    ctc_greedy_decode,
    knn_classify,
    knn_from_embedding,
    model_predict,
    pbc_classify,
    pbc_from_embedding,
)
from protokws.classify.predictions import (
    PredictionRow,
    prediction_rows,
    read_predictions,
    write_predictions,
)
from protokws.classify.prototypes import (
    EnrollmentIndex,
    PrototypeSet,
    build_enrollment_index,
    build_prototypes,
    cosine_similarity,
    embed_utterance,
    load_prototypes,
    prototypes_from_json,
    prototypes_to_json,
    save_prototypes,
)

__all__ = [
    "Prediction",
    "classify_dataset",
    "ctc_greedy_decode",
    "knn_classify",
    "knn_from_embedding",
    "model_predict",
    "pbc_classify",
    "pbc_from_embedding",
    "PredictionRow",
    "prediction_rows",
    "read_predictions",
    "write_predictions",
    "EnrollmentIndex",
    "PrototypeSet",
    "build_enrollment_index",
    "build_prototypes",
    "cosine_similarity",
    "embed_utterance",
    "load_prototypes",
    "prototypes_from_json",
    "prototypes_to_json",
    "save_prototypes",
]
