"""Seleção dos resumos PubMed de um ensaio e montagem do prompt para o LLM (uso offline)."""

import logging
from typing import Callable, Dict, List, Sequence

from app.models.schemas import AbstractCategory, AbstractRecord, TrialRecord
from app.services.embeddings import token_set

logger = logging.getLogger(__name__)

ELIGIBLE_CATEGORIES = frozenset(
    {AbstractCategory.DERIVED, AbstractCategory.RESULT, AbstractCategory.SEARCH_LINKED}
)

NO_ABSTRACT = "(no abstract available)"

PROMPT_TEMPLATE = """You are given the title of a clinical trial and up to two PubMed abstracts linked to it.
Summarize the important trial-related statistical tests and their p-values, then decide
whether the trial met its primary endpoint.

Answer with a single line of the form "Outcome: 1" if the trial succeeded,
"Outcome: 0" if it failed, or "Outcome: -1" if the abstracts do not allow a decision.

Trial: {nct_id}
Title: {title}

Abstract 1:
{abstract_1}

Abstract 2:
{abstract_2}
"""


def title_similarity(a: str, b: str) -> float:
    """Jaccard entre os conjuntos de tokens; dois textos vazios têm similaridade 0."""
    ta, tb = token_set(a), token_set(b)
    union = ta | tb
    if not union:
        return 0.0
    return len(ta & tb) / len(union)


def select_top2_abstracts(
    trial: TrialRecord,
    abstracts: Sequence[AbstractRecord],
    sim: Callable[[str, str], float] = title_similarity,
) -> List[AbstractRecord]:
    """
    Até dois resumos cujo título mais se parece com o título oficial do ensaio.

    Resumos de contexto (BACKGROUND) não entram. Empates saem por pmid crescente.
    """
    eligible = [a for a in abstracts if a.category in ELIGIBLE_CATEGORIES]
    scored = [(sim(a.title, trial.official_title), a) for a in eligible]
    scored.sort(key=lambda item: (-item[0], item[1].pmid, item[1].title, item[1].abstract_text))
    return [a for _, a in scored[:2]]


def render_llm_prompt(trial: TrialRecord, abstracts: Sequence[AbstractRecord]) -> str:
    """Prompt determinístico; espaços vazios recebem o marcador de resumo ausente."""
    if len(abstracts) > 2:
        raise ValueError(f"{trial.nct_id}: no máximo 2 resumos por prompt, recebido {len(abstracts)}")
    bodies = [a.abstract_text.strip() or NO_ABSTRACT for a in abstracts]
    bodies += [NO_ABSTRACT] * (2 - len(bodies))
    return PROMPT_TEMPLATE.format(
        nct_id=trial.nct_id,
        title=trial.official_title.strip(),
        abstract_1=bodies[0],
        abstract_2=bodies[1],
    )


def build_prompts(trials: Sequence[TrialRecord], abstracts: Sequence[AbstractRecord]) -> Dict[str, str]:
    """Prompt por ensaio que tenha ao menos um resumo elegível."""
    by_trial: Dict[str, List[AbstractRecord]] = {}
    for record in abstracts:
        by_trial.setdefault(record.nct_id, []).append(record)

    prompts: Dict[str, str] = {}
    for trial in trials:
        chosen = select_top2_abstracts(trial, by_trial.get(trial.nct_id, []))
        if chosen:
            prompts[trial.nct_id] = render_llm_prompt(trial, chosen)
    logger.info(f"{len(prompts)} prompts montados para {len(trials)} ensaios")
    return prompts
