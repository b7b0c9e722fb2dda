"""Testes das funções de rotulagem, das regras de precedência e da matriz de rótulos."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from app.exceptions import ConfigurationError
from app.models.labeling import LabelingFunctionSpec, LFKind, PosteriorLabel, ThresholdConfig
from app.models.schemas import NewsRecord, Sentiment, TrialPhase, TrialStatus, WeakLabel
from app.services.label_model import apply_rule_overrides
from app.services.labeling_functions import (
    FAILURE_STATUSES,
    SUCCESS_STATUSES,
    apply_all,
    default_lf_catalog,
    lf_llm,
    lf_metric_threshold,
    lf_news,
    lf_pvalue,
    lf_status,
    lf_stock,
)
from app.services.signals import SignalBundle
from app.services.thresholds import fit_thresholds
from tests.conftest import make_trial


def news(*sentiments, nct_id="NCT1"):
    return [NewsRecord(nct_id=nct_id, sentiment=s, confidence=0.9) for s in sentiments]


def expected_rule(status: TrialStatus, pvalue):
    """Tabela-verdade das regras: status decisivo, senão p-valor significativo, senão modelo."""
    if status in FAILURE_STATUSES:
        return WeakLabel.FAILURE
    if status in SUCCESS_STATUSES:
        return WeakLabel.SUCCESS
    if pvalue is True:
        return WeakLabel.SUCCESS
    return None


@pytest.mark.parametrize("status", list(TrialStatus))
@pytest.mark.parametrize("pvalue", [True, False, None])
def test_rule_truth_table(status, pvalue):
    trial = make_trial("NCT1", status=status, has_significant_pvalue=pvalue)
    model_output = PosteriorLabel(nct_id="NCT1", p_success=0.3, hard_label=WeakLabel.FAILURE)
    (result,) = apply_rule_overrides([model_output], [trial])
    expected = expected_rule(status, pvalue)
    if expected is None:
        assert result == model_output
    else:
        assert result.hard_label == expected
        assert result.source == "rule"
        assert result.p_success == (1.0 if expected == WeakLabel.SUCCESS else 0.0)


def test_status_lf():
    assert lf_status(make_trial(status=TrialStatus.TERMINATED)) == WeakLabel.FAILURE
    assert lf_status(make_trial(status=TrialStatus.APPROVED_FOR_MARKETING)) == WeakLabel.SUCCESS
    assert lf_status(make_trial(status=TrialStatus.COMPLETED)) == WeakLabel.ABSTAIN


def test_pvalue_lf():
    assert lf_pvalue(make_trial(has_significant_pvalue=True)) == WeakLabel.SUCCESS
    assert lf_pvalue(make_trial(has_significant_pvalue=False)) == WeakLabel.FAILURE
    assert lf_pvalue(make_trial()) == WeakLabel.ABSTAIN


@pytest.mark.parametrize(
    "sentiments, expected",
    [
        ((), WeakLabel.ABSTAIN),
        ((Sentiment.POSITIVE, Sentiment.POSITIVE, Sentiment.NEGATIVE), WeakLabel.SUCCESS),
        ((Sentiment.NEUTRAL,), WeakLabel.SUCCESS),
        ((Sentiment.NEGATIVE, Sentiment.NEGATIVE, Sentiment.NEUTRAL), WeakLabel.FAILURE),
        ((Sentiment.NEGATIVE, Sentiment.POSITIVE), WeakLabel.ABSTAIN),
        ((Sentiment.POSITIVE, Sentiment.NEUTRAL), WeakLabel.SUCCESS),
    ],
)
def test_news_mode_rule(sentiments, expected):
    assert lf_news(make_trial("NCT1"), news(*sentiments)) == expected


def test_news_ignores_other_trials():
    assert lf_news(make_trial("NCT1"), news(Sentiment.NEGATIVE, nct_id="NCT2")) == WeakLabel.ABSTAIN


def test_stock_lf_sign():
    trial = make_trial()
    assert lf_stock(trial, 0.5) == WeakLabel.SUCCESS
    assert lf_stock(trial, -0.1) == WeakLabel.FAILURE
    assert lf_stock(trial, 0.0) == WeakLabel.ABSTAIN
    assert lf_stock(trial, None) == WeakLabel.ABSTAIN


def test_llm_lf_lookup():
    assert lf_llm(make_trial("NCT1"), {"NCT1": WeakLabel.FAILURE}) == WeakLabel.FAILURE
    assert lf_llm(make_trial("NCT2"), {"NCT1": WeakLabel.FAILURE}) == WeakLabel.ABSTAIN


def test_metric_lf_absent_value_abstains_before_lookup():
    spec = next(s for s in default_lf_catalog() if s.name == "num_patients")
    assert lf_metric_threshold(make_trial(), spec, ThresholdConfig()) == WeakLabel.ABSTAIN
    with pytest.raises(ConfigurationError):
        lf_metric_threshold(make_trial(num_patients=10), spec, ThresholdConfig())


def test_default_catalog_has_sixteen_unique_columns():
    names = [s.name for s in default_lf_catalog()]
    assert len(names) == 16
    assert len(set(names)) == 16
    assert names[0] == "results_reported"
    assert names[-1] == "gpt"


def test_apply_all_builds_matrix_in_input_order():
    trials = [
        make_trial("NCT3", TrialPhase.PHASE_2, num_patients=100, status=TrialStatus.TERMINATED),
        make_trial("NCT1", TrialPhase.PHASE_2, num_patients=10, has_significant_pvalue=True),
        make_trial("NCT2", TrialPhase.PHASE_2, num_patients=50),
    ]
    specs = default_lf_catalog()
    cfg = fit_thresholds(trials, specs)
    bundle = SignalBundle(linkage_labels={"NCT1": WeakLabel.SUCCESS})
    matrix = apply_all(trials, specs, cfg, bundle)
    assert matrix.trial_ids == ("NCT3", "NCT1", "NCT2")
    assert matrix.shape == (3, 16)
    assert matrix.column("status").tolist() == [0, -1, -1]
    assert matrix.column("pvalues").tolist() == [-1, 1, -1]
    # mediana da fase = 50, comparação estrita
    assert matrix.column("num_patients").tolist() == [1, 0, 0]
    assert matrix.column("linkage").tolist() == [-1, 1, -1]
    assert matrix.column("gpt").tolist() == [-1, -1, -1]

    parallel = apply_all(trials, specs, cfg, bundle, workers=3)
    assert (parallel.values == matrix.values).all()


def test_apply_all_rejects_duplicate_names():
    spec = LabelingFunctionSpec(name="status", kind=LFKind.STATUS)
    with pytest.raises(ConfigurationError, match="status"):
        apply_all([make_trial()], [spec, spec], ThresholdConfig())


def test_apply_all_zero_trials_gives_empty_matrix():
    specs = default_lf_catalog()
    matrix = apply_all([], specs, ThresholdConfig())
    assert matrix.shape == (0, 16)
    assert matrix.trial_ids == ()
    assert matrix.lf_names == tuple(s.name for s in specs)


_POOL = [
    make_trial(
        f"NCT{i}",
        TrialPhase.PHASE_2 if i % 2 else TrialPhase.PHASE_3,
        status=(TrialStatus.COMPLETED, TrialStatus.TERMINATED, TrialStatus.APPROVED_FOR_MARKETING)[i % 3],
        num_patients=20 * i + 5,
        deaths=i % 4,
        has_significant_pvalue=(True, False, None)[i % 3],
    )
    for i in range(8)
]
_BUNDLE = SignalBundle(
    news_by_trial={"NCT1": tuple(news("POSITIVE", nct_id="NCT1")), "NCT4": tuple(news("NEGATIVE", nct_id="NCT4"))},
    stock_slopes={"NCT2": 0.4, "NCT5": -1.0},
    llm_decisions={"NCT6": WeakLabel.SUCCESS},
    linkage_labels={"NCT0": WeakLabel.FAILURE, "NCT7": WeakLabel.SUCCESS},
)


@settings(max_examples=50, deadline=None)
@given(st.permutations(range(len(_POOL))))
def test_apply_all_rows_follow_input_permutation(order):
    specs = default_lf_catalog()
    cfg = fit_thresholds(_POOL, specs)
    base = apply_all(_POOL, specs, cfg, _BUNDLE)
    permuted = apply_all([_POOL[i] for i in order], specs, cfg, _BUNDLE)
    assert permuted.trial_ids == tuple(base.trial_ids[i] for i in order)
    assert permuted.lf_names == base.lf_names
    assert (permuted.values == base.values[list(order)]).all()
