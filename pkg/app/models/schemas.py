"""Schemas Pydantic dos registros de ensaios clínicos e dos sinais auxiliares."""

import re
from datetime import date
from enum import Enum, IntEnum
from typing import Dict, FrozenSet, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


# ============================================================================
# Enumerações básicas
# ============================================================================


class WeakLabel(IntEnum):
    """Voto de uma função de rotulagem."""

    ABSTAIN = -1
    FAILURE = 0
    SUCCESS = 1


class TrialPhase(str, Enum):
    """Fase regulatória de um ensaio (categorias do mapa de conexão de fases)."""

    EARLY_PHASE_1 = "EARLY_PHASE_1"
    PHASE_1 = "PHASE_1"
    PHASE_1_2 = "PHASE_1_2"
    PHASE_2 = "PHASE_2"
    PHASE_2_3 = "PHASE_2_3"
    PHASE_3 = "PHASE_3"
    PHASE_4 = "PHASE_4"
    NOT_APPLICABLE = "NOT_APPLICABLE"
    UNKNOWN = "UNKNOWN"

    @classmethod
    def parse(cls, text: Optional[str]) -> "TrialPhase":
        """
        Normaliza o texto de fase do registro.
        Combinações desconhecidas (ex.: "Phase 3/Phase 4") viram UNKNOWN.
        """
        key = re.sub(r"[^a-z0-9/]", "", (text or "").strip().lower())
        return _PHASE_KEYS.get(key, cls.UNKNOWN)

    @property
    def order(self) -> int:
        """Posição na progressão; -1 para fases fora do mapa."""
        return _PHASE_ORDER.get(self, -1)

    @property
    def group(self) -> Optional[str]:
        """Linha da tabela de concordância (1, 2, 3 ou 4) à qual a fase pertence."""
        return _PHASE_GROUP.get(self)


_PHASE_KEYS: Dict[str, TrialPhase] = {
    "earlyphase1": TrialPhase.EARLY_PHASE_1,
    "earlyphasei": TrialPhase.EARLY_PHASE_1,
    "phase0": TrialPhase.EARLY_PHASE_1,
    "phase1": TrialPhase.PHASE_1,
    "phasei": TrialPhase.PHASE_1,
    "1": TrialPhase.PHASE_1,
    "phase1/phase2": TrialPhase.PHASE_1_2,
    "phase1/2": TrialPhase.PHASE_1_2,
    "phase12": TrialPhase.PHASE_1_2,
    "phasei/ii": TrialPhase.PHASE_1_2,
    "1/2": TrialPhase.PHASE_1_2,
    "phase2": TrialPhase.PHASE_2,
    "phaseii": TrialPhase.PHASE_2,
    "2": TrialPhase.PHASE_2,
    "phase2/phase3": TrialPhase.PHASE_2_3,
    "phase2/3": TrialPhase.PHASE_2_3,
    "phase23": TrialPhase.PHASE_2_3,
    "phaseii/iii": TrialPhase.PHASE_2_3,
    "2/3": TrialPhase.PHASE_2_3,
    "phase3": TrialPhase.PHASE_3,
    "phaseiii": TrialPhase.PHASE_3,
    "3": TrialPhase.PHASE_3,
    "phase4": TrialPhase.PHASE_4,
    "phaseiv": TrialPhase.PHASE_4,
    "4": TrialPhase.PHASE_4,
    "notapplicable": TrialPhase.NOT_APPLICABLE,
    "n/a": TrialPhase.NOT_APPLICABLE,
    "na": TrialPhase.NOT_APPLICABLE,
}

_PHASE_ORDER: Dict[TrialPhase, int] = {
    TrialPhase.EARLY_PHASE_1: 0,
    TrialPhase.PHASE_1: 1,
    TrialPhase.PHASE_1_2: 2,
    TrialPhase.PHASE_2: 3,
    TrialPhase.PHASE_2_3: 4,
    TrialPhase.PHASE_3: 5,
    TrialPhase.PHASE_4: 6,
}

# Fases combinadas entram na linha da fase posterior
_PHASE_GROUP: Dict[TrialPhase, str] = {
    TrialPhase.EARLY_PHASE_1: "1",
    TrialPhase.PHASE_1: "1",
    TrialPhase.PHASE_1_2: "2",
    TrialPhase.PHASE_2: "2",
    TrialPhase.PHASE_2_3: "3",
    TrialPhase.PHASE_3: "3",
    TrialPhase.PHASE_4: "4",
}


class TrialStatus(str, Enum):
    """Status geral do ensaio no registro."""

    COMPLETED = "COMPLETED"
    TERMINATED = "TERMINATED"
    WITHDRAWN = "WITHDRAWN"
    SUSPENDED = "SUSPENDED"
    WITHHELD = "WITHHELD"
    NO_LONGER_AVAILABLE = "NO_LONGER_AVAILABLE"
    TEMPORARILY_NOT_AVAILABLE = "TEMPORARILY_NOT_AVAILABLE"
    APPROVED_FOR_MARKETING = "APPROVED_FOR_MARKETING"
    RECRUITING = "RECRUITING"
    ACTIVE = "ACTIVE"
    OTHER = "OTHER"

    @classmethod
    def parse(cls, text: Optional[str]) -> "TrialStatus":
        """Mapeia o texto (sem diferenciar maiúsculas/espaços); desconhecido vira OTHER."""
        key = " ".join(re.sub(r"[^a-z]+", " ", (text or "").lower()).split())
        return _STATUS_KEYS.get(key, cls.OTHER)


_STATUS_KEYS: Dict[str, TrialStatus] = {
    "completed": TrialStatus.COMPLETED,
    "terminated": TrialStatus.TERMINATED,
    "withdrawn": TrialStatus.WITHDRAWN,
    "suspended": TrialStatus.SUSPENDED,
    "withheld": TrialStatus.WITHHELD,
    "no longer available": TrialStatus.NO_LONGER_AVAILABLE,
    "temporarily not available": TrialStatus.TEMPORARILY_NOT_AVAILABLE,
    "approved for marketing": TrialStatus.APPROVED_FOR_MARKETING,
    "recruiting": TrialStatus.RECRUITING,
    "not yet recruiting": TrialStatus.RECRUITING,
    "enrolling by invitation": TrialStatus.RECRUITING,
    "active": TrialStatus.ACTIVE,
    "active not recruiting": TrialStatus.ACTIVE,
}


# ============================================================================
# Modelos de ensaios clínicos
# ============================================================================

# Campos textuais usados na ligação entre fases
LINKAGE_FIELDS: Tuple[str, ...] = (
    "intervention",
    "condition",
    "title",
    "summary",
    "eligibility",
)

DRUG_INTERVENTION_TYPES: FrozenSet[str] = frozenset({"drug", "biological"})


class TrialMetrics(BaseModel):
    """Métricas numéricas e binárias de um ensaio. None significa ausente, nunca zero."""

    model_config = ConfigDict(frozen=True)

    results_reported: Optional[bool] = None
    num_sponsors: Optional[int] = Field(None, ge=0)
    num_patients: Optional[int] = Field(None, ge=0)
    patient_drop: Optional[int] = Field(None, ge=0)
    num_sites: Optional[int] = Field(None, ge=0)
    has_significant_pvalue: Optional[bool] = None
    update_lag_days: Optional[int] = None
    deaths: Optional[int] = Field(None, ge=0)
    serious_adverse_events: Optional[int] = Field(None, ge=0)
    all_adverse_events: Optional[int] = Field(None, ge=0)
    num_amendments: Optional[int] = Field(None, ge=0)


class TrialRecord(BaseModel):
    """Uma entrada do registro de ensaios."""

    model_config = ConfigDict(frozen=True)

    nct_id: str = Field(..., min_length=1)
    phase: TrialPhase
    status: TrialStatus
    status_detail: str = ""
    start_date: Optional[date] = None
    completion_date: Optional[date] = None
    last_update_date: Optional[date] = None
    intervention_types: FrozenSet[str] = frozenset()
    intervention_names: Tuple[str, ...] = ()
    conditions: Tuple[str, ...] = ()
    official_title: str = ""
    brief_summary: str = ""
    eligibility_criteria: str = ""
    lead_sponsor: str = ""
    metrics: TrialMetrics = Field(default_factory=TrialMetrics)

    @field_validator("nct_id")
    @classmethod
    def _strip_id(cls, value: str) -> str:
        value = value.strip()
        if not value:
            raise ValueError("nct_id vazio")
        return value

    @model_validator(mode="after")
    def _check_dates(self) -> "TrialRecord":
        if self.start_date and self.completion_date and self.start_date > self.completion_date:
            raise ValueError(
                f"{self.nct_id}: start_date {self.start_date} posterior a completion_date {self.completion_date}"
            )
        return self

    @property
    def is_drug_or_biologic(self) -> bool:
        return bool(self.normalized_intervention_types & DRUG_INTERVENTION_TYPES)

    @property
    def normalized_intervention_types(self) -> FrozenSet[str]:
        return frozenset(t.strip().lower() for t in self.intervention_types)

    def field_text(self, name: str) -> str:
        """Texto de um dos campos de ligação (intervention, condition, title, summary, eligibility)."""
        if name == "intervention":
            return " ".join(self.intervention_names)
        if name == "condition":
            return " ".join(self.conditions)
        if name == "title":
            return self.official_title
        if name == "summary":
            return self.brief_summary
        if name == "eligibility":
            return self.eligibility_criteria
        raise KeyError(name)


class GoldLabelSet(BaseModel):
    """Rótulos verificados por humanos (ex.: TOP) com a origem de cada entrada."""

    labels: Dict[str, WeakLabel] = Field(default_factory=dict)
    provenance: Dict[str, str] = Field(default_factory=dict)

    @field_validator("labels")
    @classmethod
    def _no_abstain(cls, value: Dict[str, WeakLabel]) -> Dict[str, WeakLabel]:
        bad = sorted(k for k, v in value.items() if v == WeakLabel.ABSTAIN)
        if bad:
            raise ValueError(f"rótulo ouro não pode ser ABSTAIN: {', '.join(bad[:10])}")
        return value

    def __len__(self) -> int:
        return len(self.labels)

    def __contains__(self, nct_id: object) -> bool:
        return nct_id in self.labels

    def get(self, nct_id: str) -> Optional[WeakLabel]:
        return self.labels.get(nct_id)

    def restrict(self, ids) -> "GoldLabelSet":
        """Subconjunto do ouro restrito aos ids informados."""
        keep = set(ids)
        return GoldLabelSet(
            labels={k: v for k, v in self.labels.items() if k in keep},
            provenance={k: v for k, v in self.provenance.items() if k in keep},
        )


# ============================================================================
# Modelos de sinais auxiliares
# ============================================================================


class AbstractCategory(str, Enum):
    """Origem do resumo PubMed."""

    BACKGROUND = "BACKGROUND"
    DERIVED = "DERIVED"
    RESULT = "RESULT"
    SEARCH_LINKED = "SEARCH_LINKED"

    @classmethod
    def parse(cls, text: str) -> "AbstractCategory":
        key = re.sub(r"[^a-z]", "", text.lower())
        if key == "results":
            key = "result"
        for member in cls:
            if member.value.replace("_", "").lower() == key:
                return member
        raise ValueError(f"categoria de resumo desconhecida: {text!r}")


class AbstractRecord(BaseModel):
    """Resumo PubMed associado a um ensaio."""

    model_config = ConfigDict(frozen=True)

    nct_id: str = Field(..., min_length=1)
    pmid: str = Field(..., min_length=1)
    category: AbstractCategory
    title: str = ""
    abstract_text: str = ""


class Sentiment(str, Enum):
    POSITIVE = "POSITIVE"
    NEGATIVE = "NEGATIVE"
    NEUTRAL = "NEUTRAL"


class NewsRecord(BaseModel):
    """Manchete com sentimento pré-calculado."""

    model_config = ConfigDict(frozen=True)

    nct_id: str = Field(..., min_length=1)
    headline: str = ""
    sentiment: Sentiment
    confidence: float = Field(..., ge=0.0, le=1.0)

    @field_validator("sentiment", mode="before")
    @classmethod
    def _upper(cls, value):
        return value.strip().upper() if isinstance(value, str) else value


class StockObservation(BaseModel):
    model_config = ConfigDict(frozen=True)

    date: date
    close: float = Field(..., ge=0.0)


class StockSeries(BaseModel):
    """Série de fechamentos de um ticker, em ordem estritamente crescente de data."""

    model_config = ConfigDict(frozen=True)

    ticker: str = Field(..., min_length=1)
    observations: Tuple[StockObservation, ...] = ()

    @model_validator(mode="after")
    def _increasing(self) -> "StockSeries":
        dates = [obs.date for obs in self.observations]
        if any(b <= a for a, b in zip(dates, dates[1:])):
            raise ValueError(f"{self.ticker}: datas da série não são estritamente crescentes")
        return self


class OrangeBookEntry(BaseModel):
    """Aprovação do FDA (nome genérico + data) do arquivo product.txt."""

    model_config = ConfigDict(frozen=True)

    drug_generic_name: str = Field(..., min_length=1)
    approval_date: date

    @field_validator("drug_generic_name")
    @classmethod
    def _strip_name(cls, value: str) -> str:
        value = value.strip()
        if not value:
            raise ValueError("nome genérico vazio")
        return value


class LLMDecisionRecord(BaseModel):
    """Decisão de um LLM (obtida offline) sobre os resumos do ensaio."""

    model_config = ConfigDict(frozen=True)

    nct_id: str = Field(..., min_length=1)
    decision: WeakLabel
    rationale_text: Optional[str] = None


# ============================================================================
# Critérios de seleção
# ============================================================================


class SelectionCriteria(BaseModel):
    """Cascata de seleção de ensaios; cada etapa pode ser desligada."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    require_drug_or_biologic: bool = True
    exclude_ongoing: bool = True
    require_known_phase: bool = True
    completion_cutoff: Optional[date] = None
