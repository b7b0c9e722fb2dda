"""Catálogo das funções de rotulagem e montagem da matriz de rótulos."""

import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Mapping, Optional, Sequence

import numpy as np

from app.exceptions import ConfigurationError
from app.models.labeling import (
    Direction,
    LabelingFunctionSpec,
    LabelMatrix,
    LFKind,
    ThresholdConfig,
)
from app.models.schemas import NewsRecord, Sentiment, TrialRecord, TrialStatus, WeakLabel
from app.services.signals import SignalBundle
from app.services.thresholds import threshold_vote

logger = logging.getLogger(__name__)

FAILURE_STATUSES = frozenset(
    {
        TrialStatus.TERMINATED,
        TrialStatus.WITHDRAWN,
        TrialStatus.SUSPENDED,
        TrialStatus.WITHHELD,
        TrialStatus.NO_LONGER_AVAILABLE,
        TrialStatus.TEMPORARILY_NOT_AVAILABLE,
    }
)
SUCCESS_STATUSES = frozenset({TrialStatus.APPROVED_FOR_MARKETING})


# ============================================================================
# Funções de rotulagem
# ============================================================================


def lf_status(trial: TrialRecord) -> WeakLabel:
    if trial.status in FAILURE_STATUSES:
        return WeakLabel.FAILURE
    if trial.status in SUCCESS_STATUSES:
        return WeakLabel.SUCCESS
    return WeakLabel.ABSTAIN


def _flag(value: Optional[bool]) -> WeakLabel:
    if value is None:
        return WeakLabel.ABSTAIN
    return WeakLabel.SUCCESS if value else WeakLabel.FAILURE


def lf_pvalue(trial: TrialRecord) -> WeakLabel:
    return _flag(trial.metrics.has_significant_pvalue)


def lf_results_reported(trial: TrialRecord) -> WeakLabel:
    return _flag(trial.metrics.results_reported)


def lf_metric_threshold(trial: TrialRecord, spec: LabelingFunctionSpec, cfg: ThresholdConfig) -> WeakLabel:
    """
    Compara a métrica com o corte da fase do ensaio.

    Valor ausente abstém antes de consultar o corte; corte não resolvido é erro de configuração.
    """
    if spec.kind == LFKind.RESULTS_REPORTED:
        return lf_results_reported(trial)
    value = getattr(trial.metrics, spec.metric_field)
    if value is None:
        return WeakLabel.ABSTAIN
    return threshold_vote(float(value), cfg.cut(trial.phase, spec.name), spec.direction)


def lf_news(trial: TrialRecord, news: Sequence[NewsRecord]) -> WeakLabel:
    """Moda dos sentimentos: POSITIVE/NEUTRAL = sucesso, NEGATIVE = falha, empate com NEGATIVE = abstenção."""
    counts = Counter(record.sentiment for record in news if record.nct_id == trial.nct_id)
    if not counts:
        return WeakLabel.ABSTAIN
    top = max(counts.values())
    modes = {sentiment for sentiment, count in counts.items() if count == top}
    if Sentiment.NEGATIVE in modes:
        return WeakLabel.FAILURE if len(modes) == 1 else WeakLabel.ABSTAIN
    return WeakLabel.SUCCESS


def lf_stock(trial: TrialRecord, slope: Optional[float]) -> WeakLabel:
    if slope is None or slope == 0:
        return WeakLabel.ABSTAIN
    return WeakLabel.SUCCESS if slope > 0 else WeakLabel.FAILURE


def lf_llm(trial: TrialRecord, decisions: Mapping[str, WeakLabel]) -> WeakLabel:
    return WeakLabel(decisions.get(trial.nct_id, WeakLabel.ABSTAIN))


def lf_linkage(trial: TrialRecord, labels: Mapping[str, WeakLabel]) -> WeakLabel:
    return WeakLabel(labels.get(trial.nct_id, WeakLabel.ABSTAIN))


# ============================================================================
# Catálogo
# ============================================================================


def _metric(name: str, field: str, direction: Direction) -> LabelingFunctionSpec:
    return LabelingFunctionSpec(
        name=name, kind=LFKind.METRIC_THRESHOLD, metric_field=field, direction=direction
    )


def default_lf_catalog() -> List[LabelingFunctionSpec]:
    """As dezesseis colunas padrão, na ordem em que aparecem na matriz."""
    above, below = Direction.ABOVE_IS_SUCCESS, Direction.BELOW_IS_SUCCESS
    return [
        LabelingFunctionSpec(name="results_reported", kind=LFKind.RESULTS_REPORTED),
        _metric("num_sponsors", "num_sponsors", above),
        _metric("num_patients", "num_patients", above),
        _metric("patient_drop", "patient_drop", below),
        _metric("sites", "num_sites", above),
        LabelingFunctionSpec(name="pvalues", kind=LFKind.PVALUE),
        _metric("update_more_recent", "update_lag_days", above),
        _metric("death_ae", "deaths", below),
        _metric("serious_ae", "serious_adverse_events", below),
        _metric("all_ae", "all_adverse_events", below),
        LabelingFunctionSpec(name="status", kind=LFKind.STATUS),
        _metric("amendments", "num_amendments", above),
        LabelingFunctionSpec(name="stock_price", kind=LFKind.STOCK),
        LabelingFunctionSpec(name="linkage", kind=LFKind.LINKAGE),
        LabelingFunctionSpec(name="news_headlines", kind=LFKind.NEWS),
        LabelingFunctionSpec(name="gpt", kind=LFKind.LLM),
    ]


# ============================================================================
# Aplicação
# ============================================================================


def make_voter(
    spec: LabelingFunctionSpec, cfg: ThresholdConfig, signals: SignalBundle
) -> Callable[[TrialRecord], WeakLabel]:
    """Fecha uma spec sobre os limiares e sinais, devolvendo uma função ensaio -> voto."""
    kind = spec.kind
    if kind == LFKind.STATUS:
        return lf_status
    if kind == LFKind.PVALUE:
        return lf_pvalue
    if kind in (LFKind.METRIC_THRESHOLD, LFKind.RESULTS_REPORTED):
        return lambda trial: lf_metric_threshold(trial, spec, cfg)
    if kind == LFKind.NEWS:
        return lambda trial: lf_news(trial, signals.news_by_trial.get(trial.nct_id, ()))
    if kind == LFKind.STOCK:
        return lambda trial: lf_stock(trial, signals.stock_slopes.get(trial.nct_id))
    if kind == LFKind.LLM:
        return lambda trial: lf_llm(trial, signals.llm_decisions)
    if kind == LFKind.LINKAGE:
        return lambda trial: lf_linkage(trial, signals.linkage_labels)
    raise ValueError(f"tipo de função desconhecido: {kind}")


def apply_all(
    trials: Sequence[TrialRecord],
    specs: Sequence[LabelingFunctionSpec],
    cfg: ThresholdConfig,
    signals: Optional[SignalBundle] = None,
    workers: int = 1,
) -> LabelMatrix:
    """
    Matriz com uma linha por ensaio (ordem de entrada) e uma coluna por spec (ordem da lista).

    As linhas são calculadas em paralelo quando `workers` > 1; a ordem final não muda.
    """
    signals = signals or SignalBundle()
    voters = [make_voter(spec, cfg, signals) for spec in specs]
    names = tuple(spec.name for spec in specs)
    repeated = sorted({name for name in names if names.count(name) > 1})
    if repeated:
        raise ConfigurationError(f"nomes de funções repetidos: {', '.join(repeated)}")

    def row(trial: TrialRecord) -> List[int]:
        return [int(vote(trial)) for vote in voters]

    if workers > 1 and len(trials) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(row, trials))
    else:
        rows = [row(trial) for trial in trials]

    values = np.array(rows, dtype=np.int8).reshape(len(trials), len(specs))
    matrix = LabelMatrix(tuple(t.nct_id for t in trials), names, values)
    coverage: Dict[str, float] = matrix.coverage()
    logger.info(
        "cobertura: " + ", ".join(f"{name}={value:.3f}" for name, value in coverage.items())
    )
    return matrix
