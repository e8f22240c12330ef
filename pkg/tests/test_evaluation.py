import json
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import make_dataset, projection_checkpoint
from protokws.classify import build_prototypes, classify_dataset
from protokws.datamodel import CLASS_IDS, Method
from protokws.errors import EmptyStratum, LengthMismatch, MalformedRecord
from protokws.evaluation import (
    EvalReport,
    OutcomeCounts,
    compute_score,
    evaluate_predictions,
    pool_counts,
    read_report,
    tally_outcomes,
    write_report,
)

labels = st.sampled_from(CLASS_IDS)


def test_tally_outcomes_counts_each_error_kind():
    gold = [0, 0, 1, -1, -1, -1]
    predicted = [0, -1, 2, -1, 5, -1]

    counts = tally_outcomes(predicted, gold)

    assert counts == OutcomeCounts(n_wake=3, n_non_wake=3, n_fr=2, n_fa=1, n_confused=1)


def test_tally_outcomes_rejects_misaligned_input():
    with pytest.raises(LengthMismatch):
        tally_outcomes([0, 1], [0])


def test_reference_score_is_exact():
    rates = compute_score(OutcomeCounts(n_wake=80, n_non_wake=20, n_fr=2, n_fa=1))

    assert rates.frr == 0.025
    assert rates.far == 0.05
    assert rates.score == 0.075
    assert rates.score == float(Fraction(2, 80) + Fraction(1, 20))
    assert abs(rates.score - (rates.far + rates.frr)) < 1e-15


def test_perfect_and_worst_scores():
    assert compute_score(OutcomeCounts(n_wake=5, n_non_wake=5, n_fr=0, n_fa=0)).score == 0.0
    assert compute_score(OutcomeCounts(n_wake=5, n_non_wake=5, n_fr=5, n_fa=5)).score == 2.0


def test_empty_strata_are_rejected():
    with pytest.raises(EmptyStratum):
        compute_score(tally_outcomes([0, 1], [0, 1]))
    with pytest.raises(EmptyStratum):
        compute_score(tally_outcomes([-1], [-1]))


def test_inconsistent_counts_are_rejected():
    with pytest.raises(MalformedRecord):
        OutcomeCounts(n_wake=1, n_non_wake=1, n_fr=2, n_fa=0)


@given(st.lists(st.tuples(labels, labels), min_size=1, max_size=60))
def test_score_stays_in_range(pairs):
    gold = [g for g, _ in pairs] + [0, -1]
    predicted = [p for _, p in pairs] + [0, -1]

    rates = compute_score(tally_outcomes(predicted, gold))

    assert 0.0 <= rates.far <= 1.0
    assert 0.0 <= rates.frr <= 1.0
    assert 0.0 <= rates.score <= 2.0


@given(st.lists(labels, min_size=1, max_size=40), st.data())
def test_breaking_a_correct_keyword_raises_frr(gold, data):
    gold = gold + [3, -1]
    predicted = list(gold)
    keyword_positions = [i for i, g in enumerate(gold) if g != -1]
    position = data.draw(st.sampled_from(keyword_positions))

    before = compute_score(tally_outcomes(predicted, gold))
    predicted[position] = -1
    after = compute_score(tally_outcomes(predicted, gold))

    n_wake = len(keyword_positions)
    assert after.frr - before.frr == pytest.approx(1 / n_wake, abs=1e-12)
    assert after.far == before.far


def test_pooling_adds_counts():
    a = OutcomeCounts(n_wake=4, n_non_wake=2, n_fr=1, n_fa=0)
    b = OutcomeCounts(n_wake=6, n_non_wake=3, n_fr=2, n_fa=1, n_confused=1)

    pooled = pool_counts([a, b])

    assert pooled == OutcomeCounts(n_wake=10, n_non_wake=5, n_fr=3, n_fa=1, n_confused=1)
    assert compute_score(pooled).score == pytest.approx(0.3 + 0.2)


def test_report_json_and_round_trip(tmp_path):
    report = evaluate_predictions(
        [0] * 78 + [-1, -1] + [-1] * 19 + [4], [0] * 80 + [-1] * 20, method="SDD-pbc"
    )
    path = tmp_path / "report.json"

    write_report(report, path)
    text = path.read_text()

    assert '"score": 0.075' in text
    assert list(json.loads(text)) == [
        "method",
        "checkpoint",
        "n_wake",
        "n_non_wake",
        "n_fr",
        "n_fa",
        "n_confused",
        "far",
        "frr",
        "score",
    ]
    assert read_report(path) == report


def test_report_rejects_missing_fields():
    with pytest.raises(MalformedRecord):
        EvalReport.from_dict({"method": "x"})


def test_methods_share_denominators_on_one_eval_set(rng):
    ckpt = projection_checkpoint(3)
    enroll = make_dataset(rng.standard_normal((22, 3)), list(CLASS_IDS) * 2)
    evaluation = make_dataset(rng.standard_normal((30, 3)), ([0, 1, -1] * 10))
    protos = build_prototypes(enroll, ckpt)

    pbc = evaluate_predictions(
        classify_dataset(evaluation, ckpt, Method.PBC, protos=protos),
        evaluation.labels,
        method="pbc",
    )
    knn = evaluate_predictions(
        classify_dataset(evaluation, ckpt, Method.KNN, enroll=enroll, k=3),
        evaluation.labels,
        method="knn",
    )

    assert (pbc.method, knn.method) == ("pbc", "knn")
    assert pbc.counts.n_wake == knn.counts.n_wake == 20
    assert pbc.counts.n_non_wake == knn.counts.n_non_wake == 10
