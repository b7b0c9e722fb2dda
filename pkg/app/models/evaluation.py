"""Modelos das métricas de concordância e do manifesto de execução."""

from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator


# ============================================================================
# Métricas
# ============================================================================


class ConfusionMatrix(BaseModel):
    """Contagens da classe SUCCESS contra o ouro."""

    model_config = ConfigDict(frozen=True)

    tp: int = Field(0, ge=0)
    fp: int = Field(0, ge=0)
    fn: int = Field(0, ge=0)
    tn: int = Field(0, ge=0)

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @property
    def observed_agreement(self) -> float:
        return (self.tp + self.tn) / self.total if self.total else 0.0


class AgreementMatrix(BaseModel):
    """Concordância par a par entre funções, na interseção das coberturas."""

    model_config = ConfigDict(frozen=True)

    lf_names: Tuple[str, ...]
    agreement: Tuple[Tuple[Optional[float], ...], ...]
    common_counts: Tuple[Tuple[int, ...], ...]

    @model_validator(mode="after")
    def _symmetric(self) -> "AgreementMatrix":
        m = len(self.lf_names)
        for i in range(m):
            for j in range(m):
                if self.agreement[i][j] != self.agreement[j][i]:
                    raise ValueError("matriz de concordância não simétrica")
                if (self.agreement[i][j] is None) != (self.common_counts[i][j] == 0):
                    raise ValueError("entrada ausente deve coincidir com contagem zero")
        return self


class PhaseMetrics(BaseModel):
    """Métricas de uma linha da tabela (fase 1, 2, 3, 4 ou All)."""

    n: int
    f1: Optional[float] = None
    weighted_f1: Optional[float] = None
    kappa: Optional[float] = None
    pr_auc: Optional[float] = None
    roc_auc: Optional[float] = None
    coverage: Optional[float] = None
    undecided_resolved: int = 0


class LFSummaryRow(BaseModel):
    """Análise de uma função: polaridade, cobertura, sobreposição, conflito e acurácia."""

    name: str
    polarity: List[int]
    coverage: float
    overlaps: float
    conflicts: float
    empirical_accuracy: Optional[float] = None


class MetricsReport(BaseModel):
    """Resultado de `cto evaluate`."""

    phases: Dict[str, PhaseMetrics] = Field(default_factory=dict)
    lf_coverage: Dict[str, float] = Field(default_factory=dict)
    lf_summary: List[LFSummaryRow] = Field(default_factory=list)
    label_distribution: Dict[str, Dict[str, int]] = Field(default_factory=dict)
    agreement: Optional[AgreementMatrix] = None
    metadata: Dict[str, str] = Field(default_factory=dict)


# ============================================================================
# Manifesto de execução
# ============================================================================


class RunManifest(BaseModel):
    """Registro reprodutível de uma execução da CLI."""

    command: str
    config_digest: str
    input_digests: Dict[str, str] = Field(default_factory=dict)
    artifact_versions: Dict[str, str] = Field(default_factory=dict)
    stage_counts: Dict[str, int] = Field(default_factory=dict)
    stage_seconds: Dict[str, float] = Field(default_factory=dict)
