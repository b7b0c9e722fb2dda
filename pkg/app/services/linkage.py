"""
Ligação entre fases: espaço de busca restrito, recuperação top-K por similaridade
dos campos, re-ranqueamento, pareamento com o Orange Book e rótulos derivados.
"""

import logging
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from datetime import date
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import pandas as pd

from app.models.linkage import FDAMatch, LinkageCandidate, LinkageEdge, LinkageGraph, PhaseConnectionMap
from app.models.schemas import LINKAGE_FIELDS, OrangeBookEntry, TrialPhase, TrialRecord, WeakLabel
from app.services.embeddings import CrossEncoderScorer, EmbeddingProvider, cosine

logger = logging.getLogger(__name__)

FDA_PHASES = frozenset({TrialPhase.PHASE_3, TrialPhase.PHASE_2_3})


# ============================================================================
# Busca e ranqueamento
# ============================================================================


def filter_search_space(
    query: TrialRecord, pool: Sequence[TrialRecord], cmap: PhaseConnectionMap
) -> List[TrialRecord]:
    """
    Candidatos em fase diretamente ligada, concluídos antes do início da consulta
    e com algum tipo de intervenção em comum.
    """
    if query.start_date is None:
        logger.warning(f"{query.nct_id}: sem start_date; ligação não tentada")
        return []
    phases = set(cmap.earlier(query.phase))
    types = query.normalized_intervention_types
    return [
        candidate
        for candidate in pool
        if candidate.phase in phases
        and candidate.nct_id != query.nct_id
        and candidate.completion_date is not None
        and candidate.completion_date < query.start_date
        and candidate.normalized_intervention_types & types
    ]


def field_similarity(query: TrialRecord, candidate: TrialRecord, provider: EmbeddingProvider) -> float:
    """Soma dos cossenos por campo; campo vazio em qualquer lado contribui 0."""
    total = 0.0
    for name in LINKAGE_FIELDS:
        a, b = query.field_text(name), candidate.field_text(name)
        if not a.strip() or not b.strip():
            continue
        total += cosine(provider.embed(a), provider.embed(b))
    return total


def cross_score(query: TrialRecord, candidate: TrialRecord, scorer: CrossEncoderScorer) -> float:
    total = 0.0
    for name in LINKAGE_FIELDS:
        a, b = query.field_text(name), candidate.field_text(name)
        if not a.strip() or not b.strip():
            continue
        total += scorer.score(a, b)
    return total


def retrieve_topk(
    query: TrialRecord,
    candidates: Sequence[TrialRecord],
    provider: EmbeddingProvider,
    k: int = 32,
) -> List[LinkageCandidate]:
    """Os k candidatos mais similares, em ordem decrescente; empate por nct_id crescente."""
    if k < 1:
        raise ValueError(f"k deve ser >= 1, recebido {k}")
    scored = sorted(
        ((field_similarity(query, c, provider), c.nct_id) for c in candidates),
        key=lambda item: (-item[0], item[1]),
    )
    return [
        LinkageCandidate(query_id=query.nct_id, candidate_id=cid, similarity=sim, rank=rank)
        for rank, (sim, cid) in enumerate(scored[:k], start=1)
    ]


def rerank(
    query: TrialRecord,
    shortlist: Sequence[LinkageCandidate],
    scorer: CrossEncoderScorer,
    records: Mapping[str, TrialRecord],
) -> List[LinkageCandidate]:
    """Reordena a lista curta pela soma das pontuações do scorer; `records` resolve os ids."""
    rescored = sorted(
        (
            candidate.model_copy(
                update={"cross_score": cross_score(query, records[candidate.candidate_id], scorer)}
            )
            for candidate in shortlist
        ),
        key=lambda c: (-c.cross_score, c.candidate_id),
    )
    return [c.model_copy(update={"rank": rank}) for rank, c in enumerate(rescored, start=1)]


def predicted_links(
    reranked: Sequence[LinkageCandidate],
    records: Mapping[str, TrialRecord],
    links_per_phase: int = 1,
) -> List[LinkageEdge]:
    """Melhores candidatos com pontuação positiva, até `links_per_phase` por fase anterior."""
    taken: Dict[TrialPhase, int] = defaultdict(int)
    edges: List[LinkageEdge] = []
    for candidate in reranked:
        if candidate.cross_score <= 0:
            break
        phase = records[candidate.candidate_id].phase
        if taken[phase] >= links_per_phase:
            continue
        taken[phase] += 1
        edges.append(
            LinkageEdge(
                later_nct_id=candidate.query_id,
                earlier_nct_id=candidate.candidate_id,
                cross_score=candidate.cross_score,
            )
        )
    return edges


# ============================================================================
# Orange Book
# ============================================================================


def approval_window(approval_date: date) -> Tuple[date, date]:
    """[aprovação - 2 anos, aprovação - 2 meses], com aritmética de calendário."""
    approval = pd.Timestamp(approval_date)
    start = approval - pd.DateOffset(years=2)
    end = approval - pd.DateOffset(months=2)
    return start.date(), end.date()


def drug_name_score(generic_name: str, trial: TrialRecord, scorer: CrossEncoderScorer) -> Optional[float]:
    """Máximo sobre os nomes de intervenção; None sem nomes."""
    if not trial.intervention_names:
        return None
    return max(scorer.score(generic_name, name) for name in trial.intervention_names)


def match_fda_approvals(
    trials: Sequence[TrialRecord],
    book: Sequence[OrangeBookEntry],
    scorer: CrossEncoderScorer,
    top_n: int = 5,
) -> List[FDAMatch]:
    """
    Para cada aprovação: ensaios de fase 3 (ou 2/3) com droga/biológico concluídos na
    janela, os `top_n` de maior pontuação de nome, e entre eles o de conclusão mais
    próxima da aprovação.
    """
    pool = [
        t for t in trials
        if t.phase in FDA_PHASES and t.is_drug_or_biologic and t.completion_date is not None
    ]
    matches: List[FDAMatch] = []
    for entry in sorted(book, key=lambda e: (e.approval_date, e.drug_generic_name)):
        start, end = approval_window(entry.approval_date)
        scored = []
        for trial in pool:
            if not start <= trial.completion_date <= end:
                continue
            score = drug_name_score(entry.drug_generic_name, trial, scorer)
            if score is not None and score > 0:
                scored.append((score, trial))
        if not scored:
            continue
        scored.sort(key=lambda item: (-item[0], item[1].nct_id))
        shortlist = scored[:top_n]
        score, chosen = min(
            shortlist,
            key=lambda item: ((entry.approval_date - item[1].completion_date).days, -item[0], item[1].nct_id),
        )
        matches.append(
            FDAMatch(
                nct_id=chosen.nct_id,
                generic_name=entry.drug_generic_name,
                approval_date=entry.approval_date,
            )
        )
    logger.info(f"{len(matches)} aprovações do FDA pareadas de {len(book)}")
    return matches


# ============================================================================
# Grafo e rótulos
# ============================================================================


def _link_query(
    query: TrialRecord,
    by_phase: Mapping[TrialPhase, List[TrialRecord]],
    records: Mapping[str, TrialRecord],
    cmap: PhaseConnectionMap,
    provider: EmbeddingProvider,
    scorer: CrossEncoderScorer,
    k: int,
    links_per_phase: int,
) -> List[LinkageEdge]:
    pool = [t for phase in cmap.earlier(query.phase) for t in by_phase.get(phase, [])]
    candidates = filter_search_space(query, pool, cmap)
    if not candidates:
        return []
    shortlist = retrieve_topk(query, candidates, provider, k)
    return predicted_links(rerank(query, shortlist, scorer, records), records, links_per_phase)


def link_trials(
    trials: Sequence[TrialRecord],
    cmap: PhaseConnectionMap,
    provider: EmbeddingProvider,
    scorer: CrossEncoderScorer,
    k: int = 32,
    links_per_phase: int = 1,
    book: Sequence[OrangeBookEntry] = (),
    fda_top_n: int = 5,
    workers: int = 1,
) -> LinkageGraph:
    """
    Constrói o grafo completo: cada ensaio de fase posterior (ordem de nct_id) é
    ligado às fases anteriores do mapa; depois pareia o Orange Book.
    """
    records = {t.nct_id: t for t in trials}
    by_phase: Dict[TrialPhase, List[TrialRecord]] = defaultdict(list)
    for trial in trials:
        by_phase[trial.phase].append(trial)
    queries = sorted((t for t in trials if cmap.earlier(t.phase)), key=lambda t: t.nct_id)

    def link(query: TrialRecord) -> List[LinkageEdge]:
        return _link_query(query, by_phase, records, cmap, provider, scorer, k, links_per_phase)

    if workers > 1 and len(queries) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_query = list(pool.map(link, queries))
    else:
        per_query = [link(query) for query in queries]

    edges = tuple(edge for found in per_query for edge in found)
    matches = tuple(match_fda_approvals(trials, book, scorer, fda_top_n)) if book else ()
    logger.info(f"{len(edges)} arestas entre fases para {len(queries)} consultas")
    return LinkageGraph(edges=edges, fda_matches=matches)


def validate_graph(
    graph: LinkageGraph, trials: Sequence[TrialRecord], cmap: PhaseConnectionMap
) -> List[str]:
    """Lista de violações estruturais (vazia quando o grafo é válido)."""
    records = {t.nct_id: t for t in trials}
    violations: List[str] = []
    for edge in graph.edges:
        later = records.get(edge.later_nct_id)
        earlier = records.get(edge.earlier_nct_id)
        if later is None or earlier is None:
            violations.append(f"{edge.later_nct_id}->{edge.earlier_nct_id}: ensaio desconhecido")
            continue
        if earlier.phase not in cmap.earlier(later.phase):
            violations.append(
                f"{edge.later_nct_id}->{edge.earlier_nct_id}: {later.phase.value} não liga a {earlier.phase.value}"
            )
        if later.start_date is None or earlier.completion_date is None or not earlier.completion_date < later.start_date:
            violations.append(f"{edge.later_nct_id}->{edge.earlier_nct_id}: ordem de datas violada")
    for match in graph.fda_matches:
        trial = records.get(match.nct_id)
        if trial is None or trial.completion_date is None:
            violations.append(f"{match.nct_id}: pareamento FDA sem ensaio/conclusão")
            continue
        start, end = approval_window(match.approval_date)
        if not start <= trial.completion_date <= end:
            violations.append(f"{match.nct_id}: conclusão fora da janela da aprovação {match.approval_date}")
    return violations


def derive_linkage_labels(
    graph: LinkageGraph,
    trials: Sequence[TrialRecord],
    cmap: Optional[PhaseConnectionMap] = None,
) -> Dict[str, WeakLabel]:
    """
    Rótulo por ensaio a partir do grafo: fase 4 se abstém; fase 3 e 2/3 são sucesso
    com ligação vinda da fase 4 ou pareamento FDA; demais fases-alvo do mapa são
    sucesso com qualquer ligação de entrada. Fases fora do mapa se abstêm.
    """
    cmap = cmap or PhaseConnectionMap.default()
    records = {t.nct_id: t for t in trials}
    inbound = {edge.earlier_nct_id for edge in graph.edges}
    from_phase4 = {
        edge.earlier_nct_id
        for edge in graph.edges
        if edge.later_nct_id in records and records[edge.later_nct_id].phase == TrialPhase.PHASE_4
    }
    matched = {m.nct_id for m in graph.fda_matches}
    targets = cmap.linked_earlier_phases

    labels: Dict[str, WeakLabel] = {}
    for trial in trials:
        if trial.phase == TrialPhase.PHASE_4:
            label = WeakLabel.ABSTAIN
        elif trial.phase in FDA_PHASES:
            label = WeakLabel.SUCCESS if trial.nct_id in from_phase4 or trial.nct_id in matched else WeakLabel.FAILURE
        elif trial.phase in targets:
            label = WeakLabel.SUCCESS if trial.nct_id in inbound else WeakLabel.FAILURE
        else:
            label = WeakLabel.ABSTAIN
        labels[trial.nct_id] = label
    return labels
