"""Testes do voto majoritário e do modelo de data programming."""

import numpy as np
import pytest

from app.exceptions import FitError, NotFittedError
from app.models.labeling import AnchorSet, DataProgrammingModel, LabelMatrix
from app.models.schemas import WeakLabel
from app.services.label_model import (
    augment_with_anchors,
    fit_data_programming,
    fit_phase_wise_dp,
    predict_majority_vote,
    predict_phase_wise_dp,
    predict_posterior,
)
from tests.conftest import make_gold, synthetic_votes


def matrix(rows, names=None):
    rows = np.array(rows)
    names = names or tuple(f"lf_{j}" for j in range(rows.shape[1]))
    return LabelMatrix(tuple(f"NCT{i}" for i in range(rows.shape[0])), names, rows)


# ============================================================================
# Voto majoritário
# ============================================================================


def test_majority_vote_fraction_and_ties():
    labels = predict_majority_vote(matrix([[1, 1, 0], [1, 0, -1], [-1, -1, -1], [0, 0, 1]]))
    assert [p.p_success for p in labels] == pytest.approx([2 / 3, 0.5, 0.5, 1 / 3])
    assert [p.hard_label for p in labels] == [
        WeakLabel.SUCCESS,
        WeakLabel.FAILURE,
        WeakLabel.FAILURE,
        WeakLabel.FAILURE,
    ]
    assert [p.undecided for p in labels] == [False, True, True, False]


def test_majority_vote_undecided_default():
    (label,) = predict_majority_vote(matrix([[1, 0]]), WeakLabel.SUCCESS)
    assert label.hard_label == WeakLabel.SUCCESS
    assert label.undecided


# ============================================================================
# Data programming
# ============================================================================


def _suite(seed):
    rng = np.random.default_rng(1000 + seed)
    accuracies = rng.uniform(0.6, 0.9, size=8)
    coverages = rng.uniform(0.3, 0.9, size=8)
    votes, y = synthetic_votes(10_000, accuracies, coverages, 0.5, seed)
    return votes, y, accuracies


def test_dp_recovers_accuracies_on_synthetic_suite():
    recovered = 0
    for seed in range(20):
        votes, _, accuracies = _suite(seed)
        model = fit_data_programming(votes, class_balance=0.5)
        if np.max(np.abs(np.array(model.mu) - accuracies)) <= 0.05:
            recovered += 1
    assert recovered >= 18


def test_dp_at_least_as_accurate_as_majority_vote():
    wins = 0
    for seed in range(20):
        votes, y, _ = _suite(seed)
        dp = predict_posterior(fit_data_programming(votes), votes)
        mv = predict_majority_vote(votes)
        dp_acc = np.mean([int(p.hard_label) == t for p, t in zip(dp, y)])
        mv_acc = np.mean([int(p.hard_label) == t for p, t in zip(mv, y)])
        if dp_acc >= mv_acc:
            wins += 1
    assert wins >= 18


def test_posterior_matches_product_form():
    rng = np.random.default_rng(5)
    mu = rng.uniform(0.05, 0.95, size=6)
    model = DataProgrammingModel(lf_names=[f"lf_{j}" for j in range(6)], mu=list(mu), class_balance=0.3)
    values = rng.integers(-1, 2, size=(1000, 6))
    votes = matrix(values)
    posteriors = predict_posterior(model, votes)
    for row, label in zip(values, posteriors):
        p1, p0 = 0.3, 0.7
        for vote, accuracy in zip(row, mu):
            if vote == 1:
                p1 *= accuracy
                p0 *= 1 - accuracy
            elif vote == 0:
                p1 *= 1 - accuracy
                p0 *= accuracy
        expected = p1 / (p1 + p0)
        assert label.p_success == pytest.approx(expected, rel=1e-10)
        assert label.hard_label == (WeakLabel.SUCCESS if label.p_success >= 0.5 else WeakLabel.FAILURE)


def test_posterior_all_abstain_returns_class_balance():
    model = DataProgrammingModel(lf_names=["a", "b"], mu=[0.8, 0.7], class_balance=0.4)
    (label,) = predict_posterior(model, matrix([[-1, -1]], ("a", "b")))
    assert label.p_success == pytest.approx(0.4)


def test_posterior_rejects_unknown_columns():
    model = DataProgrammingModel(lf_names=["a"], mu=[0.8], class_balance=0.5)
    with pytest.raises(NotFittedError):
        predict_posterior(model, matrix([[1, 1]], ("a", "z")))


def test_dp_requires_three_covered_lfs():
    votes, _ = synthetic_votes(500, [0.8, 0.7], [0.9, 0.9])
    with pytest.raises(FitError):
        fit_data_programming(votes)


def test_dp_singular_covariance_uses_ridge(caplog):
    votes, _ = synthetic_votes(3000, [0.85, 0.75, 0.7], [0.9, 0.8, 0.9], seed=2)
    duplicated = votes.with_columns(["copy"], votes.column("lf_0"))
    model = fit_data_programming(duplicated)
    assert model.ridge_used
    assert "singular" in caplog.text
    assert all(0.0 < m < 1.0 for m in model.mu)


def test_dp_uncovered_lf_gets_half():
    votes, _ = synthetic_votes(3000, [0.85, 0.75, 0.7, 0.8], [0.9, 0.8, 0.9, 0.0], seed=4)
    model = fit_data_programming(votes)
    assert model.accuracies["lf_3"] == 0.5


def test_dp_sign_prefers_better_than_random():
    votes, _ = synthetic_votes(5000, [0.85, 0.8, 0.75, 0.7], [0.9, 0.9, 0.9, 0.9], seed=9)
    model = fit_data_programming(votes)
    assert all(m > 0.5 for m in model.mu)


def test_dp_with_anchors_adds_shared_columns():
    votes, y = synthetic_votes(3000, [0.8, 0.75, 0.7], [0.9, 0.8, 0.9], seed=6)
    gold = make_gold({nct_id: int(label) for nct_id, label in list(zip(votes.trial_ids, y))[:300]})
    anchors = AnchorSet(gold=gold, factor=3)
    model = fit_data_programming(votes, anchors=anchors)
    assert model.lf_names[-3:] == ["anchor_1", "anchor_2", "anchor_3"]
    assert model.anchor_columns == ["anchor_1", "anchor_2", "anchor_3"]
    assert len(set(model.mu[-3:])) == 1
    assert model.mu[-1] > 0.9

    # sem colunas de âncora na predição: ausentes contam como abstenção
    plain = predict_posterior(model, votes)
    stripped = DataProgrammingModel(
        lf_names=model.lf_names[:3], mu=model.mu[:3], class_balance=model.class_balance
    )
    assert [p.p_success for p in plain] == pytest.approx([p.p_success for p in predict_posterior(stripped, votes)])

    augmented = augment_with_anchors(votes, anchors)
    assert augmented.lf_names[-3:] == ("anchor_1", "anchor_2", "anchor_3")
    assert (augmented.column("anchor_1") == augmented.column("anchor_3")).all()


def test_phase_wise_dp_falls_back_to_pooled_model(caplog):
    votes, _ = synthetic_votes(2000, [0.85, 0.8, 0.75], [0.9, 0.9, 0.9], seed=1)
    groups = {nct_id: ("2" if i < 1990 else "3") for i, nct_id in enumerate(votes.trial_ids)}
    # grupo "3" com votos constantes não pode ser ajustado
    values = np.array(votes.values)
    values[1990:] = 1
    votes = LabelMatrix(votes.trial_ids, votes.lf_names, values)

    ensemble = fit_phase_wise_dp(votes, groups, phase_wise=True)
    assert set(ensemble.models) == {"all", "2"}
    assert "grupo de fase 3" in caplog.text
    labels = predict_phase_wise_dp(ensemble, votes, groups)
    assert [p.nct_id for p in labels] == list(votes.trial_ids)

    pooled = fit_phase_wise_dp(votes, groups, phase_wise=False)
    assert set(pooled.models) == {"all"}


# ============================================================================
# Invariâncias
# ============================================================================


def _reordered(votes: LabelMatrix, order) -> LabelMatrix:
    return LabelMatrix(votes.trial_ids, tuple(votes.lf_names[j] for j in order), votes.values[:, order])


def _flipped(votes: LabelMatrix) -> LabelMatrix:
    values = np.array(votes.values)
    flipped = np.where(values == WeakLabel.SUCCESS, int(WeakLabel.FAILURE), values)
    flipped = np.where(values == WeakLabel.FAILURE, int(WeakLabel.SUCCESS), flipped)
    return LabelMatrix(votes.trial_ids, votes.lf_names, flipped)


def test_column_order_does_not_change_labels():
    votes, _ = synthetic_votes(2000, [0.9, 0.75, 0.65, 0.8], [0.8, 0.6, 0.7, 0.5], seed=4)
    order = [2, 0, 3, 1]
    shuffled = _reordered(votes, order)

    mv = [p.p_success for p in predict_majority_vote(votes)]
    assert [p.p_success for p in predict_majority_vote(shuffled)] == mv

    model = fit_data_programming(votes)
    refit = fit_data_programming(shuffled)
    assert refit.lf_names == [model.lf_names[j] for j in order]
    assert refit.mu == pytest.approx([model.mu[j] for j in order], abs=1e-6)

    permuted_model = DataProgrammingModel(
        lf_names=[model.lf_names[j] for j in order],
        mu=[model.mu[j] for j in order],
        class_balance=model.class_balance,
    )
    expected = [p.p_success for p in predict_posterior(model, votes)]
    assert [p.p_success for p in predict_posterior(permuted_model, shuffled)] == pytest.approx(expected, abs=1e-12)


def test_silent_column_changes_nothing():
    votes, _ = synthetic_votes(2000, [0.9, 0.75, 0.65, 0.8], [0.8, 0.6, 0.7, 0.5], seed=4)
    silent = votes.with_columns(["silent"], np.full(len(votes.trial_ids), int(WeakLabel.ABSTAIN)))

    assert [p.p_success for p in predict_majority_vote(silent)] == [
        p.p_success for p in predict_majority_vote(votes)
    ]

    model = fit_data_programming(votes)
    widened = fit_data_programming(silent)
    assert widened.accuracies["silent"] == 0.5
    assert widened.mu[:4] == pytest.approx(model.mu, abs=1e-9)
    assert [p.p_success for p in predict_posterior(widened, silent)] == pytest.approx(
        [p.p_success for p in predict_posterior(model, votes)], abs=1e-9
    )


def test_swapping_success_and_failure_flips_labels():
    votes, _ = synthetic_votes(2000, [0.9, 0.75, 0.65, 0.8], [0.8, 0.6, 0.7, 0.5], seed=4)
    flipped = _flipped(votes)

    for original, mirrored in zip(predict_majority_vote(votes), predict_majority_vote(flipped)):
        assert mirrored.p_success == pytest.approx(1 - original.p_success)
        if not original.undecided:
            assert mirrored.hard_label != original.hard_label

    model = fit_data_programming(votes)
    for original, mirrored in zip(predict_posterior(model, votes), predict_posterior(model, flipped)):
        assert mirrored.p_success == pytest.approx(1 - original.p_success, abs=1e-12)

    refit = fit_data_programming(flipped)
    assert refit.mu == pytest.approx(model.mu, abs=1e-6)
    for original, mirrored in zip(predict_posterior(model, votes), predict_posterior(refit, flipped)):
        if abs(original.p_success - 0.5) < 1e-3:
            continue
        assert mirrored.hard_label != original.hard_label


def test_single_vote_posterior_equals_its_accuracy():
    model = DataProgrammingModel(lf_names=["a", "b"], mu=[0.9, 0.7], class_balance=0.5)
    success, failure = predict_posterior(model, matrix([[1, -1], [0, -1]], ("a", "b")))
    assert success.p_success == pytest.approx(0.9)
    assert failure.p_success == pytest.approx(0.1)
