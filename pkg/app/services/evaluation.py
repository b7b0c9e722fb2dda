"""Métricas de concordância com o ouro, análise das funções e emissão dos relatórios."""

import logging
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from sklearn.metrics import (
    average_precision_score,
    cohen_kappa_score,
    confusion_matrix as sk_confusion_matrix,
    f1_score as sk_f1_score,
    roc_auc_score,
)

from app.exceptions import EvaluationError
from app.models.evaluation import AgreementMatrix, ConfusionMatrix, LFSummaryRow, MetricsReport, PhaseMetrics
from app.models.labeling import LabelMatrix, PosteriorLabel
from app.models.schemas import GoldLabelSet, TrialRecord, WeakLabel
from app.storage.files import format_float, read_json, write_csv, write_json, write_text

logger = logging.getLogger(__name__)

GROUPS: Tuple[str, ...] = ("1", "2", "3", "4", "all")
METRIC_NAMES: Tuple[str, ...] = (
    "n",
    "f1",
    "weighted_f1",
    "kappa",
    "pr_auc",
    "roc_auc",
    "coverage",
    "undecided_resolved",
)


# ============================================================================
# Métricas
# ============================================================================


def _aligned(pred: Mapping[str, float], gold: GoldLabelSet) -> Tuple[np.ndarray, np.ndarray]:
    """Pares (ouro, predição) para os ids presentes nos dois conjuntos, em ordem de id."""
    ids = sorted(nct_id for nct_id in pred if nct_id in gold)
    if not ids:
        raise EvaluationError("nenhum ensaio em comum entre predições e ouro")
    y_true = np.array([int(gold.get(i)) for i in ids], dtype=int)
    y_pred = np.array([pred[i] for i in ids])
    return y_true, y_pred


def confusion_matrix(pred: Mapping[str, WeakLabel], gold: GoldLabelSet) -> ConfusionMatrix:
    y_true, y_pred = _aligned(pred, gold)
    tn, fp, fn, tp = sk_confusion_matrix(y_true, y_pred.astype(int), labels=[0, 1]).ravel()
    return ConfusionMatrix(tp=int(tp), fp=int(fp), fn=int(fn), tn=int(tn))


def f1_score(pred: Mapping[str, WeakLabel], gold: GoldLabelSet, weighted: bool = False) -> float:
    """F1 da classe SUCCESS; `weighted` faz a média por classe ponderada pela prevalência."""
    y_true, y_pred = _aligned(pred, gold)
    return float(
        sk_f1_score(
            y_true,
            y_pred.astype(int),
            labels=[0, 1],
            pos_label=1,
            average="weighted" if weighted else "binary",
            zero_division=0,
        )
    )


def cohens_kappa(pred: Mapping[str, WeakLabel], gold: GoldLabelSet) -> float:
    """κ de Cohen; concordância ao acaso igual a 1 dá 1.0 se a observada também for 1, senão 0.0."""
    y_true, y_pred = _aligned(pred, gold)
    y_pred = y_pred.astype(int)
    cm = confusion_matrix(pred, gold)
    n = cm.total
    p_e = ((cm.tp + cm.fp) * (cm.tp + cm.fn) + (cm.fn + cm.tn) * (cm.fp + cm.tn)) / (n * n)
    if p_e >= 1.0:
        return 1.0 if cm.observed_agreement == 1.0 else 0.0
    return float(cohen_kappa_score(y_true, y_pred, labels=[0, 1]))


def rank_auc(scores: Mapping[str, float], gold: GoldLabelSet) -> Tuple[Optional[float], Optional[float]]:
    """(PR-AUC, ROC-AUC) das probabilidades; ouro de classe única dá (None, None)."""
    y_true, y_score = _aligned(scores, gold)
    if len(np.unique(y_true)) < 2:
        return None, None
    y_score = y_score.astype(float)
    return float(average_precision_score(y_true, y_score)), float(roc_auc_score(y_true, y_score))


def lf_agreement_matrix(matrix: LabelMatrix) -> AgreementMatrix:
    """Fração de concordância de cada par de funções onde ambas votam; sem interseção fica ausente."""
    values = matrix.values
    voted = (values != WeakLabel.ABSTAIN).astype(np.int64)
    common = voted.T @ voted
    agree = np.zeros_like(common)
    for value in (WeakLabel.FAILURE, WeakLabel.SUCCESS):
        hits = (values == value).astype(np.int64)
        agree += hits.T @ hits

    m = len(matrix.lf_names)
    rows = tuple(
        tuple(float(agree[i, j]) / float(common[i, j]) if common[i, j] else None for j in range(m))
        for i in range(m)
    )
    counts = tuple(tuple(int(common[i, j]) for j in range(m)) for i in range(m))
    return AgreementMatrix(lf_names=matrix.lf_names, agreement=rows, common_counts=counts)


def lf_summary(matrix: LabelMatrix, gold: Optional[GoldLabelSet] = None) -> List[LFSummaryRow]:
    """Polaridade, cobertura, sobreposição, conflito e (com ouro) acurácia empírica de cada função."""
    values = matrix.values
    n = len(matrix.trial_ids)
    voted = values != WeakLabel.ABSTAIN
    gold_rows = [i for i, t in enumerate(matrix.trial_ids) if gold is not None and t in gold]
    gold_values = np.array([int(gold.get(matrix.trial_ids[i])) for i in gold_rows], dtype=int) if gold_rows else None

    summary = []
    for j, name in enumerate(matrix.lf_names):
        others = np.delete(voted, j, axis=1)
        overlap_rows = voted[:, j] & others.any(axis=1)
        disagree = np.zeros(n, dtype=bool)
        for k in range(values.shape[1]):
            if k != j:
                disagree |= voted[:, j] & voted[:, k] & (values[:, k] != values[:, j])

        accuracy = None
        if gold_values is not None:
            column = values[gold_rows, j]
            mask = column != WeakLabel.ABSTAIN
            if mask.any():
                accuracy = float((column[mask] == gold_values[mask]).mean())

        summary.append(
            LFSummaryRow(
                name=name,
                polarity=sorted(int(v) for v in np.unique(values[voted[:, j], j])),
                coverage=float(voted[:, j].mean()) if n else 0.0,
                overlaps=float(overlap_rows.mean()) if n else 0.0,
                conflicts=float(disagree.mean()) if n else 0.0,
                empirical_accuracy=accuracy,
            )
        )
    return summary


def label_distribution(labels: Sequence[PosteriorLabel], trials: Sequence[TrialRecord]) -> Dict[str, Dict[str, int]]:
    """Contagem de SUCCESS/FAILURE por grupo de fase e no total."""
    groups = {t.nct_id: t.phase.group for t in trials}
    distribution: Dict[str, Dict[str, int]] = {}
    for label in labels:
        for group in (groups.get(label.nct_id), "all"):
            if group is None:
                continue
            counts = distribution.setdefault(group, {"SUCCESS": 0, "FAILURE": 0})
            counts[label.hard_label.name] += 1
    return {group: distribution[group] for group in GROUPS if group in distribution}


# ============================================================================
# Relatório
# ============================================================================


def phase_metrics(
    labels: Sequence[PosteriorLabel], gold: GoldLabelSet, coverage: Optional[float] = None
) -> PhaseMetrics:
    hard = {p.nct_id: p.hard_label for p in labels}
    scores = {p.nct_id: p.p_success for p in labels}
    pr_auc, roc_auc = rank_auc(scores, gold)
    return PhaseMetrics(
        n=sum(1 for p in labels if p.nct_id in gold),
        f1=f1_score(hard, gold),
        weighted_f1=f1_score(hard, gold, weighted=True),
        kappa=cohens_kappa(hard, gold),
        pr_auc=pr_auc,
        roc_auc=roc_auc,
        coverage=coverage,
        undecided_resolved=sum(1 for p in labels if p.undecided and p.nct_id in gold),
    )


def _mean(values: Sequence[Optional[float]]) -> Optional[float]:
    present = [v for v in values if v is not None]
    return float(np.mean(present)) if present else None


def _row_coverage(matrix: Optional[LabelMatrix], ids: Sequence[str]) -> Optional[float]:
    """Fração dos ensaios com ao menos um voto não abstido."""
    if matrix is None or not ids:
        return None
    known = set(matrix.trial_ids)
    subset = matrix.select_rows([i for i in ids if i in known])
    if not subset.trial_ids:
        return None
    return float((subset.values != WeakLabel.ABSTAIN).any(axis=1).mean())


def build_report(
    labels: Sequence[PosteriorLabel],
    trials: Sequence[TrialRecord],
    gold: GoldLabelSet,
    matrix: Optional[LabelMatrix] = None,
    all_mode: str = "pooled",
    phase: str = "all",
    metadata: Optional[Mapping[str, str]] = None,
) -> MetricsReport:
    """
    Métricas por grupo de fase (1, 2, 3, 4) e a linha "all".

    A linha "all" agrega os ensaios antes de calcular (pooled) ou faz a média das
    fases (averaged). Com `phase` diferente de "all" só os ensaios daquele grupo entram.

    Raises:
        EvaluationError: nenhum ensaio em comum com o ouro
    """
    groups = {t.nct_id: t.phase.group for t in trials}
    absent = sum(1 for nct_id in gold.labels if nct_id not in groups)
    if absent:
        logger.warning(f"⚠️ {absent} ids do ouro ausentes do conjunto de ensaios carregado")
    if phase != "all":
        labels = [p for p in labels if groups.get(p.nct_id) == phase]

    by_group: Dict[str, List[PosteriorLabel]] = {}
    for label in labels:
        group = groups.get(label.nct_id)
        if group is not None:
            by_group.setdefault(group, []).append(label)

    phases: Dict[str, PhaseMetrics] = {}
    for group in GROUPS[:-1]:
        members = by_group.get(group, [])
        if not any(p.nct_id in gold for p in members):
            continue
        phases[group] = phase_metrics(members, gold, _row_coverage(matrix, [p.nct_id for p in members]))

    pooled = phase_metrics(labels, gold, _row_coverage(matrix, [p.nct_id for p in labels]))
    if all_mode == "averaged" and phases:
        pooled = PhaseMetrics(
            n=pooled.n,
            f1=_mean([m.f1 for m in phases.values()]),
            weighted_f1=_mean([m.weighted_f1 for m in phases.values()]),
            kappa=_mean([m.kappa for m in phases.values()]),
            pr_auc=_mean([m.pr_auc for m in phases.values()]),
            roc_auc=_mean([m.roc_auc for m in phases.values()]),
            coverage=pooled.coverage,
            undecided_resolved=pooled.undecided_resolved,
        )
    phases["all"] = pooled

    evaluated = {p.nct_id for p in labels}
    return MetricsReport(
        phases=phases,
        lf_coverage=matrix.select_rows([i for i in matrix.trial_ids if i in evaluated]).coverage() if matrix is not None else {},
        lf_summary=lf_summary(matrix, gold) if matrix is not None else [],
        label_distribution=label_distribution(labels, trials),
        agreement=lf_agreement_matrix(matrix) if matrix is not None else None,
        metadata=dict(metadata or {}),
    )


def _metric_text(value) -> str:
    if value is None:
        return ""
    if isinstance(value, int):
        return str(value)
    return format_float(value)


def save_report(report: MetricsReport, path: Path) -> Path:
    return write_json(path, report.model_dump(mode="json"))


def load_report(path: Path) -> MetricsReport:
    return MetricsReport.model_validate(read_json(path))


def render_summary(report: MetricsReport) -> str:
    """Resumo legível, com as linhas por fase no formato de tabela."""
    lines = ["CTO - concordância com o ouro", ""]
    header = f"{'fase':<6}" + "".join(f"{name:>20}" for name in METRIC_NAMES)
    lines.append(header)
    for group in GROUPS:
        metrics = report.phases.get(group)
        if metrics is None:
            continue
        cells = [_metric_text(getattr(metrics, name)) or "-" for name in METRIC_NAMES]
        lines.append(f"{group:<6}" + "".join(f"{cell:>20}" for cell in cells))

    if report.label_distribution:
        lines += ["", "Distribuição dos rótulos (SUCCESS / FAILURE)"]
        for group, counts in report.label_distribution.items():
            lines.append(f"  {group:<6} {counts.get('SUCCESS', 0):>8} / {counts.get('FAILURE', 0):<8}")

    if report.lf_summary:
        lines += ["", "Funções de rotulagem (cobertura, sobreposição, conflito, acurácia)"]
        for row in report.lf_summary:
            accuracy = format_float(row.empirical_accuracy) or "-"
            lines.append(
                f"  {row.name:<20} {format_float(row.coverage)} {format_float(row.overlaps)} "
                f"{format_float(row.conflicts)} {accuracy}"
            )

    if report.metadata:
        lines += ["", "Execução"]
        for key in sorted(report.metadata):
            lines.append(f"  {key}: {report.metadata[key]}")
    return "\n".join(lines) + "\n"


def emit_report(report: MetricsReport, out_dir: Path) -> List[Path]:
    """Grava report.csv, agreement.csv e summary.txt de forma determinística."""
    out_dir = Path(out_dir)
    rows = [
        [group, name, _metric_text(getattr(report.phases[group], name))]
        for group in GROUPS
        if group in report.phases
        for name in METRIC_NAMES
    ]
    written = [write_csv(out_dir / "report.csv", ["phase", "metric", "value"], rows)]

    agreement_rows = []
    if report.agreement is not None:
        names = report.agreement.lf_names
        for i, lf_i in enumerate(names):
            for j, lf_j in enumerate(names):
                agreement_rows.append(
                    [
                        lf_i,
                        lf_j,
                        format_float(report.agreement.agreement[i][j]),
                        report.agreement.common_counts[i][j],
                    ]
                )
    written.append(
        write_csv(out_dir / "agreement.csv", ["lf_i", "lf_j", "agreement", "common_count"], agreement_rows)
    )
    written.append(write_text(out_dir / "summary.txt", render_summary(report)))
    logger.info(f"relatórios gravados em {out_dir}")
    return written
