import numpy as np
import pytest

from conftest import projection_checkpoint
from protokws.classify import PrototypeSet, build_prototypes, classify_dataset
from protokws.datamodel import CLASS_IDS, KEYWORD_IDS, Method, Role, load_dataset, merge_datasets
from protokws.errors import InvalidConfig
from protokws.evaluation import compute_score, tally_outcomes
from protokws.synthcorpus import (
    TTS_PREFIX,
    CorpusConfig,
    class_centroids,
    generate_augment_keywords,
    generate_corpus,
)


def test_corpus_size_and_balance(tmp_path):
    config = CorpusConfig(samples_per_class=3)

    manifest = generate_corpus(config, Role.CONTROL, ["C01", "C02"], tmp_path)

    assert len(manifest) == 66
    assert manifest.class_histogram() == {c: 6 for c in CLASS_IDS}
    assert manifest.speakers == ["C01", "C02"]
    assert all(manifest.resolve(r).exists() for r in manifest)


def test_frames_stay_in_range(tmp_path):
    config = CorpusConfig(samples_per_class=2, frames_range=(3, 5), feature_dim=10)

    dataset = load_dataset(generate_corpus(config, Role.UNCONTROL, ["U01"], tmp_path))

    assert all(3 <= f.shape[0] <= 5 for f in dataset.features)
    assert dataset.feature_dim == 10


def test_generation_is_bitwise_deterministic(tmp_path):
    config = CorpusConfig(samples_per_class=2, seed=11)

    first = generate_corpus(config, Role.TARGET_ENROLL, ["T01"], tmp_path / "a")
    second = generate_corpus(config, Role.TARGET_ENROLL, ["T01"], tmp_path / "b")

    assert first.utt_ids == second.utt_ids
    for a, b in zip(first, second):
        assert first.resolve(a).read_bytes() == second.resolve(b).read_bytes()


def test_enrollment_and_evaluation_share_speaker_traits(tmp_path):
    config = CorpusConfig(samples_per_class=1)

    enroll = generate_corpus(config, Role.TARGET_ENROLL, ["T01"], tmp_path)
    evaluation = generate_corpus(config, Role.TARGET_EVAL, ["T01"], tmp_path)

    assert set(enroll.utt_ids).isdisjoint(evaluation.utt_ids)


def test_rejects_duplicate_speakers(tmp_path):
    with pytest.raises(InvalidConfig):
        generate_corpus(CorpusConfig(), Role.CONTROL, ["C01", "C01"], tmp_path)
    with pytest.raises(InvalidConfig):
        generate_corpus(CorpusConfig(), Role.CONTROL, [], tmp_path)


def test_invalid_corpus_config_raises_invalid_config():
    with pytest.raises(InvalidConfig):
        CorpusConfig(frames_range=(5, 2))
    with pytest.raises(InvalidConfig):
        CorpusConfig(feature_dim=1)
    with pytest.raises(InvalidConfig):
        CorpusConfig().updated(frames_range=(0, 3))

    resized = CorpusConfig(seed=4).updated(samples_per_class=9)
    assert (resized.samples_per_class, resized.seed) == (9, 4)


def test_centroids_are_equidistant():
    config = CorpusConfig(class_separation=10.0)

    centroids = class_centroids(config)

    distances = [
        np.linalg.norm(centroids[i] - centroids[j])
        for i in range(len(CLASS_IDS))
        for j in range(i + 1, len(CLASS_IDS))
    ]
    assert np.allclose(distances, 10.0)
    assert np.all(centroids[:, config.content_dim :] == 0.0)


def test_augment_keywords_only(tmp_path):
    config = CorpusConfig()

    augment = generate_augment_keywords(config, 5, tmp_path)

    assert len(augment) == 50
    assert -1 not in {r.label for r in augment}
    assert all(r.speaker_id.startswith(TTS_PREFIX) for r in augment)


def test_merged_histogram_adds_augment_counts(tmp_path):
    config = CorpusConfig(samples_per_class=2)
    control = generate_corpus(config, Role.CONTROL, ["C01"], tmp_path)
    augment = generate_augment_keywords(config, 5, tmp_path)

    merged = merge_datasets([control, augment])

    histogram = merged.class_histogram()
    assert all(histogram[k] == 2 + 5 for k in KEYWORD_IDS)
    assert histogram[-1] == 2


def _content_protos(config):
    centroids = class_centroids(config)
    return PrototypeSet(
        prototypes={c: centroids[i, : config.content_dim] for i, c in enumerate(CLASS_IDS)}
    )


def test_clean_speech_is_separable_by_prototypes(tmp_path):
    config = CorpusConfig(
        dysarthria_severity=0.0, speaker_offset_scale=0.0, class_separation=50.0
    )
    ckpt = projection_checkpoint(config.feature_dim, config.content_dim)
    enroll = generate_corpus(config, Role.TARGET_ENROLL, ["T01"], tmp_path)
    evaluation = load_dataset(generate_corpus(config, Role.TARGET_EVAL, ["T01"], tmp_path))

    protos = build_prototypes(enroll, ckpt)
    preds = classify_dataset(evaluation, ckpt, Method.PBC, protos=protos)

    assert compute_score(tally_outcomes(preds, evaluation.labels)).score == 0.0


def test_score_does_not_improve_with_severity(tmp_path):
    scores = []
    for severity in (0.0, 1.0, 2.0):
        config = CorpusConfig(
            dysarthria_severity=severity,
            speaker_offset_scale=0.0,
            drift_scale=0.0,
            class_separation=4.0,
            samples_per_class=18,
        )
        ckpt = projection_checkpoint(config.feature_dim, config.content_dim)
        evaluation = load_dataset(
            generate_corpus(config, Role.TARGET_EVAL, ["T01"], tmp_path / str(severity))
        )
        preds = classify_dataset(evaluation, ckpt, Method.PBC, protos=_content_protos(config))
        scores.append(compute_score(tally_outcomes(preds, evaluation.labels)).score)

    assert scores[0] <= scores[1] <= scores[2]
    assert scores[2] > scores[0]
