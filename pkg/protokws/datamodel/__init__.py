from protokws.datamodel.models import (
    CLASS_IDS,
    KEYWORD_IDS,
    N_CLASSES,
    NON_KEYWORD,
    FeatureMode,
    Head,
    Method,
    Role,
    Split,
    Stage,
    class_index,
    is_keyword,
    label_from_index,
    validate_label,
)
from protokws.datamodel.manifest import (
    Manifest,
    Utterance,
    load_manifest,
    manifest_digest,
    merge_datasets,
    split_enrollment,
    write_manifest,
)
from protokws.datamodel.features import (
    FeatureDataset,
    load_dataset,
    peek_feature_dim,
    read_features,
    write_features,
)

__all__ = [
    "CLASS_IDS",
    "KEYWORD_IDS",
    "N_CLASSES",
    "NON_KEYWORD",
    "FeatureMode",
    "Head",
    "Method",
    "Role",
    "Split",
    "Stage",
    "class_index",
    "is_keyword",
    "label_from_index",
    "validate_label",
    "Manifest",
    "Utterance",
    "load_manifest",
    "manifest_digest",
    "merge_datasets",
    "split_enrollment",
    "write_manifest",
    "FeatureDataset",
    "load_dataset",
    "peek_feature_dim",
    "read_features",
    "write_features",
]
