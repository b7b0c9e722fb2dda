"""Limiares por fase das funções de métrica: quantil por posição e ajuste em grade contra o ouro."""

import logging
import math
from collections import defaultdict
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from sklearn.metrics import f1_score

from app.models.labeling import (
    MEDIAN,
    QUANTILE_GRID,
    Direction,
    LabelingFunctionSpec,
    ThresholdConfig,
    ThresholdEntry,
)
from app.models.schemas import GoldLabelSet, TrialPhase, TrialRecord, WeakLabel

logger = logging.getLogger(__name__)


def nearest_rank_quantile(values: Sequence[float], q: float) -> Optional[float]:
    """Quantil por posição (sem interpolação): o valor ordenado de posição ceil(q * n)."""
    if not len(values):
        return None
    ordered = sorted(values)
    rank = max(1, math.ceil(round(q * len(ordered), 9)))
    return float(ordered[min(rank, len(ordered)) - 1])


def threshold_vote(value: Optional[float], cut: float, direction: Direction) -> WeakLabel:
    """Comparação estrita; valor igual ao corte fica do lado ruim."""
    if value is None:
        return WeakLabel.ABSTAIN
    if direction == Direction.BELOW_IS_SUCCESS:
        return WeakLabel.SUCCESS if value < cut else WeakLabel.FAILURE
    return WeakLabel.SUCCESS if value > cut else WeakLabel.FAILURE


def _by_phase(trials: Sequence[TrialRecord]) -> Dict[TrialPhase, List[TrialRecord]]:
    grouped: Dict[TrialPhase, List[TrialRecord]] = defaultdict(list)
    for trial in trials:
        grouped[trial.phase].append(trial)
    return dict(sorted(grouped.items(), key=lambda item: item[0].value))


def _values(trials: Sequence[TrialRecord], field: str) -> List[float]:
    return [
        float(v) for v in (getattr(t.metrics, field) for t in trials) if v is not None
    ]


def fit_thresholds(
    trials: Sequence[TrialRecord],
    specs: Sequence[LabelingFunctionSpec],
    quantiles: Optional[Mapping[Tuple[TrialPhase, str], float]] = None,
) -> ThresholdConfig:
    """
    Resolve cortes absolutos sem ajuste: o quantil de cada spec (mediana por padrão)
    sobre a distribuição da fase. `quantiles` sobrepõe o quantil por (fase, função).
    """
    quantiles = quantiles or {}
    entries: Dict[TrialPhase, Dict[str, ThresholdEntry]] = {}
    for phase, population in _by_phase(trials).items():
        per_lf: Dict[str, ThresholdEntry] = {}
        for spec in specs:
            if not spec.tunable:
                continue
            q = quantiles.get((phase, spec.name), spec.threshold_quantile)
            per_lf[spec.name] = ThresholdEntry(
                quantile=q,
                resolved_cut=nearest_rank_quantile(_values(population, spec.metric_field), q),
            )
        entries[phase] = per_lf
    return ThresholdConfig(entries=entries)


def _single_lf_f1(
    gold_trials: Sequence[TrialRecord],
    gold: GoldLabelSet,
    spec: LabelingFunctionSpec,
    cut: Optional[float],
) -> Optional[float]:
    """F1 (classe SUCCESS) da função sozinha, apenas onde ela não se abstém."""
    if cut is None:
        return None
    y_true, y_pred = [], []
    for trial in gold_trials:
        vote = threshold_vote(getattr(trial.metrics, spec.metric_field), cut, spec.direction)
        if vote == WeakLabel.ABSTAIN:
            continue
        y_true.append(int(gold.get(trial.nct_id)))
        y_pred.append(int(vote))
    if not y_true:
        return None
    return float(f1_score(np.array(y_true), np.array(y_pred), pos_label=1, zero_division=0))


def tune_thresholds(
    trials: Sequence[TrialRecord],
    specs: Sequence[LabelingFunctionSpec],
    gold: GoldLabelSet,
    grid: Sequence[float] = QUANTILE_GRID,
) -> ThresholdConfig:
    """
    Escolhe, por fase e por função (independentemente), o quantil da grade com maior F1
    contra o ouro daquela fase. Empates ficam com o menor quantil.

    Fase sem rótulos ouro usa a mediana (com aviso); função sem nenhum voto sobre o
    ouro da fase também fica na mediana.
    """
    grid = sorted(grid)
    quantiles: Dict[Tuple[TrialPhase, str], float] = {}
    for phase, population in _by_phase(trials).items():
        gold_trials = [t for t in population if t.nct_id in gold]
        if not gold_trials:
            logger.warning(f"fase {phase.value} sem rótulos ouro; limiares na mediana")
            for spec in specs:
                if spec.tunable:
                    quantiles[(phase, spec.name)] = MEDIAN
            continue

        for spec in specs:
            if not spec.tunable:
                continue
            values = _values(population, spec.metric_field)
            best_q, best_f1 = MEDIAN, None
            for q in grid:
                score = _single_lf_f1(gold_trials, gold, spec, nearest_rank_quantile(values, q))
                if score is None:
                    continue
                if best_f1 is None or score > best_f1:
                    best_q, best_f1 = q, score
            quantiles[(phase, spec.name)] = best_q
            logger.debug(f"fase {phase.value} / {spec.name}: quantil {best_q} (F1={best_f1})")

    return fit_thresholds(trials, specs, quantiles)
