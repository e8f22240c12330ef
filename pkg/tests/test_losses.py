import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import log_softmax

from conftest import central_difference, relative_error
from protokws.encoder import N_TOKENS, EncoderOutput, label_token
from protokws.errors import (
    BatchTooSmall,
    DimMismatch,
    InvalidConfig,
    InvalidLabel,
    NonFiniteLogits,
    NonFiniteLoss,
    TargetTooLong,
    ZeroEmbedding,
)
from protokws.losses import (
    LossBase,
    LossSetting,
    SclConfig,
    ce_loss,
    combined_loss,
    ctc_loss,
    scl_loss,
)


def _scl_reference(x, labels, tau):
    z = x / np.linalg.norm(x, axis=1, keepdims=True)
    total = 0.0
    for i in range(len(labels)):
        positives = [p for p in range(len(labels)) if p != i and labels[p] == labels[i]]
        if not positives:
            continue
        denom = sum(math.exp(z[i] @ z[a] / tau) for a in range(len(labels)) if a != i)
        total -= sum(math.log(math.exp(z[i] @ z[p] / tau) / denom) for p in positives) / len(
            positives
        )
    return total


def _collapse(path, blank=0):
    merged = [t for i, t in enumerate(path) if i == 0 or t != path[i - 1]]
    return [t for t in merged if t != blank]


def _ctc_reference(logits, target):
    log_probs = log_softmax(logits, axis=1)
    n_frames, n_tokens = logits.shape
    total = -np.inf
    for path in itertools.product(range(n_tokens), repeat=n_frames):
        if _collapse(path) == list(target):
            total = np.logaddexp(total, sum(log_probs[t, s] for t, s in enumerate(path)))
    return -total


# Cross-entropy


def test_ce_uniform_logits():
    loss, _ = ce_loss(np.zeros(11), 4)
    assert loss == pytest.approx(math.log(11), abs=1e-12)


def test_ce_single_peak():
    logits = np.zeros(11)
    logits[0] = 1.0
    loss, _ = ce_loss(logits, 0)
    assert loss == pytest.approx(math.log((math.e + 10) / math.e), abs=1e-12)


def test_ce_saturated_logits_stay_finite():
    logits = np.full(11, -1000.0)
    logits[10] = 1000.0
    loss, grad = ce_loss(logits, -1)
    assert loss == pytest.approx(0.0, abs=1e-12)
    assert np.all(np.isfinite(grad))
    wrong, _ = ce_loss(logits, 3)
    assert wrong == pytest.approx(2000.0)


def test_ce_gradient_is_softmax_minus_onehot(rng):
    logits = rng.standard_normal(11)
    _, grad = ce_loss(logits, -1)
    assert grad.sum() == pytest.approx(0.0, abs=1e-12)
    assert grad[10] < 0
    numeric = central_difference(lambda z: ce_loss(z, -1)[0], logits)
    assert relative_error(grad, numeric) < 1e-4


def test_ce_rejects_bad_input():
    with pytest.raises(DimMismatch):
        ce_loss(np.zeros(10), 0)
    with pytest.raises(NonFiniteLogits):
        ce_loss(np.full(11, np.nan), 0)


# Supervised contrastive


def test_scl_two_same_label_samples_is_zero():
    loss, _ = scl_loss(np.array([[1.0, 2.0], [-3.0, 0.5]]), [4, 4], SclConfig(temperature=1.0))
    assert loss == 0.0


def test_scl_worked_example():
    x = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    loss, _ = scl_loss(x, ["A", "A", "B"], SclConfig(temperature=1.0))
    assert loss == pytest.approx(2 * math.log(1 + math.exp(-1)), abs=1e-12)


def test_scl_without_positives_is_zero():
    loss, grad = scl_loss(np.eye(3), [0, 1, 2])
    assert loss == 0.0
    assert not np.any(grad)


@pytest.mark.parametrize("seed", range(100))
def test_scl_matches_pairwise_reference(seed):
    rng = np.random.default_rng(seed)
    batch = int(rng.integers(2, 9))
    x = rng.standard_normal((batch, 4))
    labels = list(rng.integers(0, 3, size=batch))
    tau = float(rng.choice([0.07, 0.5, 1.0]))

    loss, _ = scl_loss(x, labels, SclConfig(temperature=tau))

    assert loss == pytest.approx(_scl_reference(x, labels, tau), abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(
    seed=st.integers(min_value=0, max_value=10_000),
    scales=st.lists(st.floats(min_value=1e-3, max_value=1e3), min_size=6, max_size=6),
)
def test_scl_is_scale_invariant(seed, scales):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((6, 3))
    labels = [0, 0, 1, 1, 2, 0]

    loss, _ = scl_loss(x, labels)
    scaled, _ = scl_loss(x * np.array(scales)[:, None], labels)

    assert scaled == pytest.approx(loss, abs=1e-9)


def test_scl_is_permutation_symmetric(rng):
    x = rng.standard_normal((6, 3))
    labels = [0, 1, 1, 2, 0, 2]
    order = rng.permutation(6)

    loss, grad = scl_loss(x, labels)
    shuffled, shuffled_grad = scl_loss(x[order], [labels[i] for i in order])

    assert shuffled == pytest.approx(loss, abs=1e-12)
    assert np.allclose(shuffled_grad, grad[order], rtol=0, atol=1e-12)


@pytest.mark.parametrize("tau", [0.07, 1.0])
@pytest.mark.parametrize("seed", range(25))
def test_scl_gradient_matches_finite_differences(tau, seed):
    rng = np.random.default_rng(seed)
    batch = int(rng.integers(2, 7))
    x = rng.standard_normal((batch, 3))
    labels = list(rng.integers(0, 2, size=batch))
    config = SclConfig(temperature=tau)

    _, grad = scl_loss(x, labels, config)
    numeric = central_difference(lambda v: scl_loss(v, labels, config)[0], x)

    assert relative_error(grad, numeric) < 1e-4


def test_scl_rejects_degenerate_batches():
    with pytest.raises(BatchTooSmall):
        scl_loss(np.ones((1, 3)), [0])
    with pytest.raises(ZeroEmbedding):
        scl_loss(np.array([[1.0, 0.0], [0.0, 0.0]]), [0, 0])


# CTC


def test_ctc_single_uniform_frame():
    loss, _ = ctc_loss(np.zeros((1, N_TOKENS)), [label_token(3)])
    assert loss == pytest.approx(math.log(N_TOKENS), abs=1e-9)


def test_ctc_two_frames_three_tokens():
    loss, _ = ctc_loss(np.zeros((2, 3)), [1])
    assert loss == pytest.approx(math.log(3), abs=1e-12)


def test_ctc_impossible_target_is_non_finite():
    logits = np.zeros((3, 4))
    logits[:, 2] = -np.inf
    with pytest.raises(NonFiniteLoss):
        ctc_loss(logits, [2])


def test_ctc_target_too_long():
    with pytest.raises(TargetTooLong):
        ctc_loss(np.zeros((1, 5)), [1, 1])
    with pytest.raises(TargetTooLong):
        ctc_loss(np.zeros((2, 5)), [1, 2, 3])


def test_ctc_rejects_blank_and_nan():
    with pytest.raises(InvalidLabel):
        ctc_loss(np.zeros((2, 5)), [0])
    logits = np.zeros((2, 5))
    logits[1, 1] = np.nan
    with pytest.raises(NonFiniteLogits):
        ctc_loss(logits, [1])


@pytest.mark.parametrize("seed", range(100))
def test_ctc_matches_alignment_enumeration(seed):
    rng = np.random.default_rng(seed)
    n_frames = int(rng.integers(1, 7))
    n_tokens = int(rng.integers(2, 6))
    while True:
        length = int(rng.integers(0, 3))
        target = [int(t) for t in rng.integers(1, n_tokens, size=length)]
        repeats = sum(1 for a, b in zip(target, target[1:]) if a == b)
        if length + repeats <= n_frames:
            break
    logits = rng.standard_normal((n_frames, n_tokens)) * 2.0

    loss, _ = ctc_loss(logits, target)

    assert loss == pytest.approx(_ctc_reference(logits, target), abs=1e-6)


@pytest.mark.parametrize("seed", range(25))
def test_ctc_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    n_frames = int(rng.integers(2, 6))
    logits = rng.standard_normal((n_frames, N_TOKENS))
    target = [label_token(int(rng.integers(-1, 10)))]

    _, grad = ctc_loss(logits, target)
    numeric = central_difference(lambda y: ctc_loss(y, target)[0], logits)

    assert relative_error(grad, numeric) < 1e-4
    assert np.allclose(grad.sum(axis=1), 0.0, atol=1e-12)


# Combined


def _outputs(rng, n, d_emb=4, n_frames=3):
    return [
        EncoderOutput(
            embeddings=rng.standard_normal((n_frames, d_emb)),
            ce_logits=rng.standard_normal(11),
            ctc_logits=rng.standard_normal((n_frames, N_TOKENS)),
        )
        for _ in range(n)
    ]


def test_loss_setting_parse():
    assert LossSetting.parse("ce") == LossSetting()
    assert LossSetting.parse("ctc+scl") == LossSetting(base=LossBase.CTC, add_scl=True)
    assert LossSetting.parse("ce+scl").tag == "ce+scl"
    with pytest.raises(InvalidConfig):
        LossSetting.parse("mse")
    with pytest.raises(InvalidConfig):
        LossSetting.parse("ce+kl")


def test_combined_without_scl_is_the_base_sum(rng):
    outputs = _outputs(rng, 4)
    labels = [0, 3, -1, 3]

    ce = combined_loss(LossSetting.parse("ce"), outputs, labels)
    ctc = combined_loss(LossSetting.parse("ctc"), outputs, labels)

    assert ce.total == pytest.approx(
        sum(ce_loss(o.ce_logits, y)[0] for o, y in zip(outputs, labels))
    )
    assert ctc.total == pytest.approx(
        sum(ctc_loss(o.ctc_logits, [label_token(y)])[0] for o, y in zip(outputs, labels))
    )
    assert ce.scl == 0.0


def test_combined_adds_scl_on_first_frames(rng):
    outputs = _outputs(rng, 5)
    labels = [1, 1, 2, 2, -1]

    result = combined_loss(LossSetting.parse("ce+scl"), outputs, labels)

    firsts = np.stack([o.embeddings[0] for o in outputs])
    expected_scl, expected_grad = scl_loss(firsts, labels)
    assert result.scl == pytest.approx(expected_scl, abs=1e-12)
    assert result.total == pytest.approx(result.base + expected_scl, abs=1e-12)
    for i, grads in enumerate(result.grads):
        assert np.allclose(grads.embeddings[0], expected_grad[i])
        assert not np.any(grads.embeddings[1:])


def test_combined_scl_vanishes_for_same_label_pair(rng):
    outputs = _outputs(rng, 2)

    plain = combined_loss(LossSetting.parse("ce"), outputs, [6, 6])
    with_scl = combined_loss(LossSetting.parse("ce+scl"), outputs, [6, 6])

    assert with_scl.total == plain.total


def test_combined_rejects_label_count_mismatch(rng):
    with pytest.raises(InvalidConfig):
        combined_loss(LossSetting(), _outputs(rng, 2), [0])
