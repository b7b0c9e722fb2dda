"""Modelos da ligação entre fases e do pareamento com aprovações do FDA."""

from datetime import date
from typing import Dict, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.models.schemas import TrialPhase


class PhaseConnectionMap(BaseModel):
    """Fase posterior -> fases anteriores diretamente ligadas."""

    model_config = ConfigDict(frozen=True)

    links: Dict[TrialPhase, Tuple[TrialPhase, ...]] = Field(default_factory=dict)

    @field_validator("links")
    @classmethod
    def _later_to_earlier(cls, value):
        for later, earlier in value.items():
            for phase in earlier:
                if later.order < 0 or phase.order < 0 or phase.order >= later.order:
                    raise ValueError(
                        f"aresta inválida no mapa de fases: {later.value} -> {phase.value}"
                    )
        return value

    @classmethod
    def default(cls) -> "PhaseConnectionMap":
        return cls(
            links={
                TrialPhase.PHASE_4: (TrialPhase.PHASE_3, TrialPhase.PHASE_2_3),
                TrialPhase.PHASE_3: (TrialPhase.PHASE_2, TrialPhase.PHASE_1_2),
                TrialPhase.PHASE_2_3: (TrialPhase.PHASE_2, TrialPhase.PHASE_1_2),
                TrialPhase.PHASE_2: (
                    TrialPhase.PHASE_1,
                    TrialPhase.PHASE_1_2,
                    TrialPhase.EARLY_PHASE_1,
                ),
            }
        )

    def earlier(self, phase: TrialPhase) -> Tuple[TrialPhase, ...]:
        return self.links.get(phase, ())

    @property
    def linked_earlier_phases(self) -> frozenset:
        """Fases que podem receber arestas."""
        return frozenset(p for targets in self.links.values() for p in targets)


class LinkageCandidate(BaseModel):
    model_config = ConfigDict(frozen=True)

    query_id: str
    candidate_id: str
    similarity: float
    cross_score: float = 0.0
    rank: int = 0


class LinkageEdge(BaseModel):
    model_config = ConfigDict(frozen=True)

    later_nct_id: str
    earlier_nct_id: str
    cross_score: float


class FDAMatch(BaseModel):
    model_config = ConfigDict(frozen=True)

    nct_id: str
    generic_name: str
    approval_date: date


class LinkageGraph(BaseModel):
    """Arestas entre fases e pareamentos com o Orange Book."""

    model_config = ConfigDict(frozen=True)

    edges: Tuple[LinkageEdge, ...] = ()
    fda_matches: Tuple[FDAMatch, ...] = ()
