"""
Agregação da matriz de rótulos: voto majoritário, modelo generativo de data programming
(recuperação das acurácias por completamento de matriz) e regras de precedência.
"""

import logging
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from app.exceptions import FitError, NotFittedError
from app.models.labeling import (
    AnchorSet,
    DataProgrammingModel,
    LabelMatrix,
    PhaseWiseDataProgramming,
    PosteriorLabel,
    hard_label_for,
)
from app.models.schemas import TrialRecord, WeakLabel
from app.services.labeling_functions import lf_pvalue, lf_status

logger = logging.getLogger(__name__)

# Regularização usada quando a covariância é (numericamente) singular
RIDGE_EPSILON = 1e-6
MAX_CONDITION = 1e12
ALS_ITERATIONS = 500
ALS_TOLERANCE = 1e-12
MU_CLIP = 1e-3

ALL_GROUP = "all"
OTHER_GROUP = "other"


def phase_group_of(trial: TrialRecord) -> str:
    return trial.phase.group or OTHER_GROUP


# ============================================================================
# Voto majoritário
# ============================================================================


def predict_majority_vote(
    matrix: LabelMatrix, undecided_default: WeakLabel = WeakLabel.FAILURE
) -> List[PosteriorLabel]:
    """
    p = sucessos / (sucessos + falhas) entre os votos não abstidos.
    Empate ou linha toda abstida: p = 0.5, indeciso, rótulo padrão.
    """
    successes = (matrix.values == WeakLabel.SUCCESS).sum(axis=1)
    failures = (matrix.values == WeakLabel.FAILURE).sum(axis=1)
    labels = []
    for nct_id, s, f in zip(matrix.trial_ids, successes, failures):
        if s == f:
            labels.append(
                PosteriorLabel(
                    nct_id=nct_id, p_success=0.5, hard_label=undecided_default, undecided=True, source="mv"
                )
            )
            continue
        p = float(s) / float(s + f)
        labels.append(PosteriorLabel(nct_id=nct_id, p_success=p, hard_label=hard_label_for(p), source="mv"))
    return labels


# ============================================================================
# Data programming
# ============================================================================


def _reference_value(emitted: Sequence[int]) -> int:
    """Valor omitido da codificação indicadora: ABSTAIN, senão FAILURE, senão SUCCESS."""
    for value in (WeakLabel.ABSTAIN, WeakLabel.FAILURE, WeakLabel.SUCCESS):
        if int(value) in emitted:
            return int(value)
    return int(WeakLabel.ABSTAIN)


def _indicator_columns(values: np.ndarray) -> Tuple[np.ndarray, List[int], List[int], List[int]]:
    """
    Representação indicadora dos votos: por função, uma coluna para cada valor emitido
    exceto o de referência.

    Returns:
        (matriz n x d, função dona de cada coluna, valor de cada coluna, referência por função)
    """
    columns, owners, emitted_values, references = [], [], [], []
    for j in range(values.shape[1]):
        column = values[:, j]
        emitted = sorted(int(v) for v in np.unique(column))
        reference = _reference_value(emitted)
        references.append(reference)
        for value in (WeakLabel.SUCCESS, WeakLabel.FAILURE):
            if int(value) in emitted and int(value) != reference:
                columns.append((column == value).astype(float))
                owners.append(j)
                emitted_values.append(int(value))
    indicators = np.column_stack(columns) if columns else np.zeros((values.shape[0], 0))
    return indicators, owners, emitted_values, references


def _invert_covariance(sigma: np.ndarray) -> Tuple[np.ndarray, bool]:
    """Inversa de Σ; com Σ mal condicionada usa (Σ + εI)^-1 e avisa."""
    try:
        condition = np.linalg.cond(sigma)
        if np.isfinite(condition) and condition <= MAX_CONDITION:
            return np.linalg.inv(sigma), False
    except np.linalg.LinAlgError:
        pass
    logger.warning(
        f"⚠️ covariância dos votos singular; usando inversa regularizada (epsilon={RIDGE_EPSILON})"
    )
    return np.linalg.inv(sigma + RIDGE_EPSILON * np.eye(sigma.shape[0])), True


def _recover_z(m: np.ndarray, mask: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """
    Fator posto-um z com z_i z_j ≈ M_ij nas entradas fora dos blocos (mask).

    Inicializa pelo autopar dominante de M (zeros fora da máscara) e refina por
    mínimos quadrados ponderados, coordenada a coordenada.
    """
    filled = np.where(mask, m, 0.0)
    eigenvalues, eigenvectors = np.linalg.eigh(filled)
    z = np.sqrt(abs(eigenvalues[-1])) * eigenvectors[:, -1]
    w = np.where(mask, weights, 0.0)

    for _ in range(ALS_ITERATIONS):
        previous = z.copy()
        for r in range(len(z)):
            numerator = float(np.dot(w[r] * filled[r], z))
            denominator = float(np.dot(w[r], z * z)) + RIDGE_EPSILON
            z[r] = numerator / denominator
        if np.max(np.abs(z - previous)) < ALS_TOLERANCE:
            break
    return z


def _accuracies(
    conditional_1: np.ndarray,
    conditional_0: np.ndarray,
    owners: Sequence[int],
    emitted_values: Sequence[int],
    references: Sequence[int],
    coverage: np.ndarray,
    class_balance: float,
) -> np.ndarray:
    """μ_j = P(voto correto | não abstém) a partir de P(ψ | Y=1) e P(ψ | Y=0)."""
    p = class_balance
    mu = np.full(len(references), 0.5)
    for j, reference in enumerate(references):
        if coverage[j] == 0:
            continue
        mine = [i for i, owner in enumerate(owners) if owner == j]

        def prob(conditional: np.ndarray, value: int) -> float:
            for i in mine:
                if emitted_values[i] == value:
                    return float(conditional[i])
            if value == reference:
                return 1.0 - float(sum(conditional[i] for i in mine))
            return 0.0

        correct = p * prob(conditional_1, int(WeakLabel.SUCCESS)) + (1 - p) * prob(
            conditional_0, int(WeakLabel.FAILURE)
        )
        mu[j] = correct / coverage[j]
    return mu


def anchor_column(matrix: LabelMatrix, anchors: AnchorSet) -> np.ndarray:
    """Rótulo ouro por linha (ABSTAIN fora do ouro)."""
    return np.array(
        [int(anchors.gold.get(t)) if t in anchors.gold else int(WeakLabel.ABSTAIN) for t in matrix.trial_ids],
        dtype=np.int8,
    )


def augment_with_anchors(matrix: LabelMatrix, anchors: AnchorSet) -> LabelMatrix:
    """Acrescenta o ouro como `factor` colunas idênticas (anchor_1..anchor_k)."""
    column = anchor_column(matrix, anchors)
    return matrix.with_columns(anchors.column_names, np.tile(column[:, None], (1, anchors.factor)))


def fit_data_programming(
    matrix: LabelMatrix,
    class_balance: float = 0.5,
    anchors: Optional[AnchorSet] = None,
) -> DataProgrammingModel:
    """
    Estima a acurácia de cada função sem rótulos, assumindo independência condicional dado Y.

    A inversa da covariância dos indicadores, fora dos blocos de cada função, é igual a
    -z zᵀ; recuperado z, obtém-se a covariância indicador/Y e dela as acurácias.
    Com âncoras, o ouro entra como uma coluna extra cujos resíduos pesam `factor` vezes,
    e as `factor` colunas do modelo compartilham a mesma acurácia.

    Raises:
        FitError: menos de 3 funções com cobertura (ou com votos variados)
    """
    if not 0.0 < class_balance < 1.0:
        raise FitError(f"class_balance deve estar em (0, 1), recebido {class_balance}")
    fitting = matrix
    anchor_weight = 1.0
    if anchors is not None:
        fitting = matrix.with_columns(["anchor"], anchor_column(matrix, anchors))
        anchor_weight = float(anchors.factor)

    values = fitting.values
    n, m = values.shape
    coverage = (values != WeakLabel.ABSTAIN).mean(axis=0) if n else np.zeros(m)
    covered = int((coverage > 0).sum())
    if covered < 3:
        raise FitError(f"data programming exige ao menos 3 funções com cobertura; encontradas {covered}")

    indicators, owners, emitted_values, references = _indicator_columns(values)
    informative = len(set(owners))
    if informative < 3:
        raise FitError(f"data programming exige ao menos 3 funções com votos variados; encontradas {informative}")

    sigma = np.atleast_2d(np.cov(indicators, rowvar=False, bias=True))
    means = indicators.mean(axis=0)
    q, ridge_used = _invert_covariance(sigma)

    owner_array = np.array(owners)
    mask = owner_array[:, None] != owner_array[None, :]
    is_anchor = owner_array == (m - 1) if anchors is not None else np.zeros(len(owners), dtype=bool)
    weights = np.where(is_anchor[:, None] ^ is_anchor[None, :], anchor_weight, 1.0)
    z = _recover_z(-q, mask, weights)

    a = class_balance * (1 - class_balance)
    scale = np.sqrt(a / (1.0 + float(z @ sigma @ z)))

    best_mu, best_score = None, None
    for sign in (1.0, -1.0):
        delta = sign * scale * (sigma @ z) / a
        conditional_1 = np.clip(means + (1 - class_balance) * delta, 0.0, 1.0)
        conditional_0 = np.clip(means - class_balance * delta, 0.0, 1.0)
        mu = _accuracies(
            conditional_1, conditional_0, owners, emitted_values, references, coverage, class_balance
        )
        score = float(mu[coverage > 0].mean())
        if best_score is None or score > best_score:
            best_mu, best_score = mu, score

    mu = np.clip(best_mu, MU_CLIP, 1 - MU_CLIP)
    names = list(matrix.lf_names)
    mu_list = [float(v) for v in mu[: len(names)]]
    anchor_names: List[str] = []
    if anchors is not None:
        anchor_names = anchors.column_names
        mu_list += [float(mu[-1])] * anchors.factor

    logger.info(
        "acurácias estimadas: "
        + ", ".join(f"{name}={value:.3f}" for name, value in zip(names + anchor_names, mu_list))
    )
    return DataProgrammingModel(
        lf_names=names + anchor_names,
        mu=mu_list,
        class_balance=class_balance,
        anchor_columns=anchor_names,
        ridge_used=ridge_used,
    )


def _aligned_values(model: DataProgrammingModel, matrix: LabelMatrix) -> np.ndarray:
    """Colunas da matriz na ordem do modelo; âncoras ausentes viram ABSTAIN."""
    unknown = [name for name in matrix.lf_names if name not in model.lf_names]
    if unknown:
        raise NotFittedError(f"modelo não ajustado para as funções: {', '.join(unknown)}")
    columns = []
    for name in model.lf_names:
        if name in matrix.lf_names:
            columns.append(matrix.column(name))
        elif name in model.anchor_columns:
            columns.append(np.full(len(matrix.trial_ids), int(WeakLabel.ABSTAIN), dtype=np.int8))
        else:
            raise NotFittedError(f"matriz sem a coluna '{name}' usada no ajuste")
    if not columns:
        return np.zeros((len(matrix.trial_ids), 0), dtype=np.int8)
    return np.column_stack(columns)


def log_odds_terms(model: DataProgrammingModel, values: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """log P(Y=1, λ) e log P(Y=0, λ) por linha; abstenções não contribuem."""
    mu = np.asarray(model.mu, dtype=float)
    success = (values == WeakLabel.SUCCESS).astype(float)
    failure = (values == WeakLabel.FAILURE).astype(float)
    log_mu, log_miss = np.log(mu), np.log1p(-mu)
    log_1 = np.log(model.class_balance) + success @ log_mu + failure @ log_miss
    log_0 = np.log1p(-model.class_balance) + success @ log_miss + failure @ log_mu
    return log_1, log_0


def predict_posterior(model: DataProgrammingModel, matrix: LabelMatrix) -> List[PosteriorLabel]:
    """Posterior de Bayes ingênuo em espaço logarítmico."""
    values = _aligned_values(model, matrix)
    log_1, log_0 = log_odds_terms(model, values)
    p_success = np.exp(log_1 - np.logaddexp(log_1, log_0))
    return [
        PosteriorLabel(nct_id=nct_id, p_success=float(np.clip(p, 0.0, 1.0)), hard_label=hard_label_for(p), source="dp")
        for nct_id, p in zip(matrix.trial_ids, p_success)
    ]


# ============================================================================
# Ajuste por fase
# ============================================================================


def _rows_by_group(matrix: LabelMatrix, groups: Mapping[str, str]) -> Dict[str, List[str]]:
    rows: Dict[str, List[str]] = {}
    for nct_id in matrix.trial_ids:
        rows.setdefault(groups.get(nct_id, OTHER_GROUP), []).append(nct_id)
    return dict(sorted(rows.items()))


def fit_phase_wise_dp(
    matrix: LabelMatrix,
    groups: Mapping[str, str],
    class_balance: float = 0.5,
    anchors: Optional[AnchorSet] = None,
    phase_wise: bool = False,
) -> PhaseWiseDataProgramming:
    """
    Modelo agregado ("all") e, no modo por fase, um modelo por grupo de fase.
    Grupo que não pode ser ajustado usa o agregado (com aviso).
    """
    models = {ALL_GROUP: fit_data_programming(matrix, class_balance, anchors)}
    if phase_wise:
        for group, ids in _rows_by_group(matrix, groups).items():
            subset = matrix.select_rows(ids)
            try:
                models[group] = fit_data_programming(subset, class_balance, anchors)
            except FitError as e:
                logger.warning(f"grupo de fase {group}: {e}; usando o modelo agregado")
    return PhaseWiseDataProgramming(models=models, phase_wise=phase_wise)


def predict_phase_wise_dp(
    ensemble: PhaseWiseDataProgramming, matrix: LabelMatrix, groups: Mapping[str, str]
) -> List[PosteriorLabel]:
    if ALL_GROUP not in ensemble.models:
        raise NotFittedError("modelo de data programming não ajustado")
    by_id: Dict[str, PosteriorLabel] = {}
    for group, ids in _rows_by_group(matrix, groups).items():
        model = ensemble.model_for(group) if ensemble.phase_wise else ensemble.models[ALL_GROUP]
        for label in predict_posterior(model, matrix.select_rows(ids)):
            by_id[label.nct_id] = label
    return [by_id[nct_id] for nct_id in matrix.trial_ids]


# ============================================================================
# Regras de precedência
# ============================================================================


def apply_rule_overrides(
    posteriors: Sequence[PosteriorLabel], trials: Sequence[TrialRecord]
) -> List[PosteriorLabel]:
    """
    Rótulos por regra têm precedência: status decisivo, senão p-valor significativo,
    senão a saída do modelo.
    """
    by_id = {t.nct_id: t for t in trials}
    result = []
    for posterior in posteriors:
        trial = by_id.get(posterior.nct_id)
        rule = lf_status(trial) if trial is not None else WeakLabel.ABSTAIN
        if rule == WeakLabel.ABSTAIN and trial is not None and lf_pvalue(trial) == WeakLabel.SUCCESS:
            rule = WeakLabel.SUCCESS
        if rule == WeakLabel.ABSTAIN:
            result.append(posterior)
            continue
        result.append(
            PosteriorLabel(
                nct_id=posterior.nct_id,
                p_success=1.0 if rule == WeakLabel.SUCCESS else 0.0,
                hard_label=rule,
                source="rule",
            )
        )
    return result
