"""Modelos das funções de rotulagem, da matriz de rótulos e dos agregadores."""

from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.exceptions import ConfigurationError
from app.models.schemas import GoldLabelSet, TrialMetrics, TrialPhase, WeakLabel

# Grade de quantis {0.1, ..., 0.9}
QUANTILE_GRID: Tuple[float, ...] = tuple(round(k / 10, 1) for k in range(1, 10))
MEDIAN = 0.5

NUMERIC_METRICS: Tuple[str, ...] = tuple(
    name
    for name in TrialMetrics.model_fields
    if name not in ("results_reported", "has_significant_pvalue")
)


# ============================================================================
# Especificação das funções de rotulagem
# ============================================================================


class LFKind(str, Enum):
    STATUS = "STATUS"
    PVALUE = "PVALUE"
    METRIC_THRESHOLD = "METRIC_THRESHOLD"
    NEWS = "NEWS"
    STOCK = "STOCK"
    LLM = "LLM"
    LINKAGE = "LINKAGE"
    RESULTS_REPORTED = "RESULTS_REPORTED"


class Direction(str, Enum):
    BELOW_IS_SUCCESS = "BELOW_IS_SUCCESS"
    ABOVE_IS_SUCCESS = "ABOVE_IS_SUCCESS"


class LabelingFunctionSpec(BaseModel):
    """Descrição declarativa de uma função de rotulagem."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str = Field(..., min_length=1)
    kind: LFKind
    metric_field: Optional[str] = None
    direction: Optional[Direction] = None
    threshold_quantile: float = MEDIAN

    @field_validator("threshold_quantile")
    @classmethod
    def _on_grid(cls, value: float) -> float:
        snapped = round(value, 1)
        if snapped not in QUANTILE_GRID or abs(snapped - value) > 1e-9:
            raise ValueError(f"quantil {value} fora da grade {QUANTILE_GRID}")
        return snapped

    @model_validator(mode="after")
    def _threshold_fields(self) -> "LabelingFunctionSpec":
        if self.kind == LFKind.METRIC_THRESHOLD:
            if not self.metric_field or self.direction is None:
                raise ValueError(f"{self.name}: METRIC_THRESHOLD exige metric_field e direction")
            if self.metric_field not in NUMERIC_METRICS:
                raise ValueError(f"{self.name}: métrica numérica desconhecida '{self.metric_field}'")
        elif self.metric_field is not None or self.direction is not None:
            raise ValueError(f"{self.name}: apenas METRIC_THRESHOLD aceita metric_field/direction")
        return self

    @property
    def tunable(self) -> bool:
        return self.kind == LFKind.METRIC_THRESHOLD


class ThresholdEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    quantile: float
    resolved_cut: Optional[float] = None


class ThresholdConfig(BaseModel):
    """Quantil escolhido e corte absoluto por (fase, função de rotulagem)."""

    model_config = ConfigDict(frozen=True)

    entries: Dict[TrialPhase, Dict[str, ThresholdEntry]] = Field(default_factory=dict)

    def cut(self, phase: TrialPhase, lf_name: str) -> float:
        """Corte resolvido para a fase; ausente é erro de configuração."""
        entry = self.entries.get(phase, {}).get(lf_name)
        if entry is None or entry.resolved_cut is None:
            raise ConfigurationError(
                f"Limiar não resolvido para a função '{lf_name}' na fase {phase.value}"
            )
        return entry.resolved_cut

    def to_document(self) -> dict:
        """Formato fase -> lf -> {quantile, resolved_cut}."""
        return {
            phase.value: {
                name: {"quantile": entry.quantile, "resolved_cut": entry.resolved_cut}
                for name, entry in sorted(per_lf.items())
            }
            for phase, per_lf in sorted(self.entries.items(), key=lambda item: item[0].value)
        }

    @classmethod
    def from_document(cls, document: dict) -> "ThresholdConfig":
        return cls(
            entries={
                TrialPhase(phase): {
                    name: ThresholdEntry(**entry) for name, entry in per_lf.items()
                }
                for phase, per_lf in document.items()
            }
        )


# ============================================================================
# Matriz de rótulos
# ============================================================================


@dataclass(frozen=True)
class LabelMatrix:
    """Matriz n_ensaios x n_funções com valores em {-1, 0, 1}."""

    trial_ids: Tuple[str, ...]
    lf_names: Tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.int8).reshape(len(self.trial_ids), len(self.lf_names))
        if values.size and not np.isin(values, (-1, 0, 1)).all():
            raise ValueError("matriz de rótulos com valor fora de {-1, 0, 1}")
        values.setflags(write=False)
        object.__setattr__(self, "trial_ids", tuple(self.trial_ids))
        object.__setattr__(self, "lf_names", tuple(self.lf_names))
        object.__setattr__(self, "values", values)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.lf_names.index(name)]

    def coverage(self) -> Dict[str, float]:
        """Fração de linhas sem abstenção, por função."""
        n = len(self.trial_ids)
        return {
            name: (float((self.values[:, j] != WeakLabel.ABSTAIN).sum()) / n if n else 0.0)
            for j, name in enumerate(self.lf_names)
        }

    def select_rows(self, ids: Sequence[str]) -> "LabelMatrix":
        index = {trial_id: i for i, trial_id in enumerate(self.trial_ids)}
        rows = [index[trial_id] for trial_id in ids]
        return LabelMatrix(tuple(ids), self.lf_names, self.values[rows, :])

    def with_columns(self, names: Sequence[str], columns: np.ndarray) -> "LabelMatrix":
        """Nova matriz com colunas extras à direita."""
        columns = np.asarray(columns, dtype=np.int8).reshape(len(self.trial_ids), len(names))
        return LabelMatrix(
            self.trial_ids,
            self.lf_names + tuple(names),
            np.hstack([self.values, columns]),
        )


# ============================================================================
# Modelos de agregação
# ============================================================================


class PosteriorLabel(BaseModel):
    """Probabilidade de sucesso e rótulo final de um ensaio."""

    model_config = ConfigDict(frozen=True)

    nct_id: str
    p_success: float = Field(..., ge=0.0, le=1.0)
    hard_label: WeakLabel
    undecided: bool = False
    source: str = "dp"

    @model_validator(mode="after")
    def _consistent(self) -> "PosteriorLabel":
        if self.hard_label == WeakLabel.ABSTAIN:
            raise ValueError("rótulo final não pode ser ABSTAIN")
        if not self.undecided and (self.hard_label == WeakLabel.SUCCESS) != (self.p_success >= 0.5):
            raise ValueError(f"{self.nct_id}: rótulo {self.hard_label.name} incoerente com p={self.p_success}")
        return self


def hard_label_for(p_success: float) -> WeakLabel:
    return WeakLabel.SUCCESS if p_success >= 0.5 else WeakLabel.FAILURE


class AnchorSet(BaseModel):
    """Rótulos ouro injetados como colunas extras, replicados `factor` vezes."""

    gold: GoldLabelSet
    factor: int = Field(3, ge=1)

    @property
    def column_names(self) -> List[str]:
        return [f"anchor_{k + 1}" for k in range(self.factor)]


class DataProgrammingModel(BaseModel):
    """Acurácias estimadas (mu) por função e balanço de classes."""

    lf_names: List[str]
    mu: List[float]
    class_balance: float = Field(..., gt=0.0, lt=1.0)
    conditional_independence: bool = True
    anchor_columns: List[str] = Field(default_factory=list)
    ridge_used: bool = False

    @model_validator(mode="after")
    def _check_mu(self) -> "DataProgrammingModel":
        if len(self.mu) != len(self.lf_names):
            raise ValueError("mu e lf_names com tamanhos diferentes")
        if any(not 0.0 < m < 1.0 for m in self.mu):
            raise ValueError("mu deve estar em (0, 1)")
        return self

    @property
    def accuracies(self) -> Dict[str, float]:
        return dict(zip(self.lf_names, self.mu))


class PhaseWiseDataProgramming(BaseModel):
    """Modelos por grupo de fase; a chave "all" guarda o modelo agregado usado como reserva."""

    models: Dict[str, DataProgrammingModel] = Field(default_factory=dict)
    phase_wise: bool = False

    def model_for(self, group: str) -> DataProgrammingModel:
        return self.models.get(group) or self.models["all"]


class TreeStructure(BaseModel):
    """Árvore de decisão exportada em arrays de nós (folha: feature == -2)."""

    children_left: List[int]
    children_right: List[int]
    feature: List[int]
    threshold: List[float]
    leaf_class: List[int]


class ForestModel(BaseModel):
    trees: List[TreeStructure]


class RandomForestAggregator(BaseModel):
    """Floresta aleatória sobre as saídas das funções (+ fase one-hot)."""

    n_trees: int = Field(100, ge=1)
    max_depth: Optional[int] = Field(None, ge=1)
    seed: int = 0
    phase_wise: bool = False
    feature_names: List[str] = Field(default_factory=list)
    lf_names: List[str] = Field(default_factory=list)
    forests: Dict[str, ForestModel] = Field(default_factory=dict)

    @property
    def fitted(self) -> bool:
        return bool(self.forests)
