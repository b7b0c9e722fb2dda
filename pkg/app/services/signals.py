"""Adaptadores dos arquivos de sinais auxiliares (notícias, ações, Orange Book, LLM, resumos, ouro)."""

import logging
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, TypeVar

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from app.exceptions import CorruptInputError, SchemaError, first_validation_error
from app.models.schemas import (
    AbstractCategory,
    AbstractRecord,
    GoldLabelSet,
    LLMDecisionRecord,
    NewsRecord,
    OrangeBookEntry,
    StockObservation,
    StockSeries,
    TrialRecord,
    WeakLabel,
)
from app.services.market import compute_sma_slope
from app.services.trials import parse_date
from app.storage.files import read_table

logger = logging.getLogger(__name__)

T = TypeVar("T")

# Acima desta fração de linhas inválidas o arquivo é considerado corrompido
MAX_INVALID_FRACTION = 0.5


class LoadResult(BaseModel):
    """Registros válidos de um arquivo e as linhas descartadas."""

    model_config = ConfigDict(frozen=True)

    records: List[Any] = Field(default_factory=list)
    skipped: int = Field(0, ge=0)
    warnings: List[str] = Field(default_factory=list)


def _load_rows(
    path: Path,
    columns: Sequence[str],
    build: Callable[[Dict[str, str]], T],
    optional: Sequence[str] = (),
) -> LoadResult:
    """
    Lê o arquivo e constrói um registro por linha com `build`.

    Linhas que falham na validação são descartadas com aviso; se mais da metade
    falhar, o arquivo inteiro é rejeitado.
    """
    frame = read_table(path)
    for column in columns:
        if column not in frame.columns:
            raise SchemaError(column, str(path))

    records: List[T] = []
    warnings: List[str] = []
    for line, row in enumerate(frame.to_dict(orient="records"), start=2):
        for column in optional:
            row.setdefault(column, "")
        try:
            records.append(build(row))
        except (ValidationError, ValueError) as e:
            message = f"{path.name}:{line}: linha ignorada ({first_validation_error(e)})"
            warnings.append(message)
            logger.warning(message)

    total = len(frame)
    skipped = total - len(records)
    if total and skipped / total > MAX_INVALID_FRACTION:
        raise CorruptInputError(f"{path}: {skipped} de {total} linhas inválidas")
    logger.info(f"{len(records)} registros lidos de {path.name} ({skipped} ignorados)")
    return LoadResult(records=records, skipped=skipped, warnings=warnings)


def _required_date(text: str):
    value = parse_date(text)
    if value is None:
        raise ValueError(f"data inválida: {text!r}")
    return value


# ============================================================================
# Leitores por formato
# ============================================================================


def load_news(path: Path) -> LoadResult:
    """news.csv: nct_id,headline,sentiment,confidence"""
    return _load_rows(
        path,
        ("nct_id", "sentiment", "confidence"),
        lambda row: NewsRecord(
            nct_id=row["nct_id"].strip(),
            headline=row["headline"],
            sentiment=row["sentiment"],
            confidence=row["confidence"],
        ),
        optional=("headline",),
    )


def load_stock_series(path: Path) -> LoadResult:
    """
    stock.csv: ticker,date,close

    Retorna um StockSeries por ticker (ordem alfabética). Linhas inválidas e datas
    repetidas dentro de um ticker são descartadas.
    """
    rows = _load_rows(
        path,
        ("ticker", "date", "close"),
        lambda row: (
            row["ticker"].strip(),
            StockObservation(date=_required_date(row["date"]), close=row["close"]),
        ),
    )
    by_ticker: Dict[str, Dict] = defaultdict(dict)
    warnings = list(rows.warnings)
    for ticker, observation in rows.records:
        if not ticker:
            warnings.append("ticker vazio ignorado")
            continue
        if observation.date in by_ticker[ticker]:
            message = f"{ticker}: data repetida {observation.date} ignorada"
            warnings.append(message)
            logger.warning(message)
            continue
        by_ticker[ticker][observation.date] = observation

    series = [
        StockSeries(ticker=ticker, observations=tuple(obs for _, obs in sorted(points.items())))
        for ticker, points in sorted(by_ticker.items())
    ]
    return LoadResult(records=series, skipped=rows.skipped, warnings=warnings)


def load_ticker_map(path: Path) -> Tuple[Dict[str, str], List[str]]:
    """
    trial_ticker_map.csv: nct_id,ticker

    Ensaios com mais de um ticker ficam fora do mapa (a função de ações se abstém).
    """
    rows = _load_rows(
        path,
        ("nct_id", "ticker"),
        lambda row: _non_empty_pair(row["nct_id"], row["ticker"]),
    )
    tickers: Dict[str, set] = defaultdict(set)
    for nct_id, ticker in rows.records:
        tickers[nct_id].add(ticker)

    warnings = list(rows.warnings)
    mapping: Dict[str, str] = {}
    for nct_id, options in sorted(tickers.items()):
        if len(options) > 1:
            message = f"{nct_id}: múltiplos tickers {sorted(options)}; ensaio sem sinal de ações"
            warnings.append(message)
            logger.warning(message)
            continue
        mapping[nct_id] = next(iter(options))
    return mapping, warnings


def _non_empty_pair(first: str, second: str) -> Tuple[str, str]:
    first, second = first.strip(), second.strip()
    if not first or not second:
        raise ValueError("campo vazio")
    return first, second


def load_orange_book(path: Path) -> LoadResult:
    """orangebook.csv: generic_name,approval_date"""
    return _load_rows(
        path,
        ("generic_name", "approval_date"),
        lambda row: OrangeBookEntry(
            drug_generic_name=row["generic_name"],
            approval_date=_required_date(row["approval_date"]),
        ),
    )


def load_llm_decisions(path: Path) -> LoadResult:
    """llm_decisions.csv: nct_id,decision(-1|0|1),rationale"""
    return _load_rows(
        path,
        ("nct_id", "decision"),
        lambda row: LLMDecisionRecord(
            nct_id=row["nct_id"].strip(),
            decision=WeakLabel(int(row["decision"].strip())),
            rationale_text=row["rationale"] or None,
        ),
        optional=("rationale",),
    )


def load_abstract_links(path: Path) -> LoadResult:
    """abstracts.csv: nct_id,pmid,category,title,text"""
    return _load_rows(
        path,
        ("nct_id", "pmid", "category"),
        lambda row: AbstractRecord(
            nct_id=row["nct_id"].strip(),
            pmid=row["pmid"].strip(),
            category=AbstractCategory.parse(row["category"]),
            title=row["title"],
            abstract_text=row["text"],
        ),
        optional=("title", "text"),
    )


def load_gold(path: Path) -> GoldLabelSet:
    """gold.csv: nct_id,label(0|1),provenance"""
    rows = _load_rows(
        path,
        ("nct_id", "label"),
        lambda row: (row["nct_id"].strip(), _gold_label(row["label"]), row["provenance"].strip()),
        optional=("provenance",),
    )
    labels: Dict[str, WeakLabel] = {}
    provenance: Dict[str, str] = {}
    for nct_id, label, origin in rows.records:
        if nct_id in labels and labels[nct_id] != label:
            logger.warning(f"{nct_id}: rótulos ouro conflitantes; mantido o primeiro")
            continue
        labels.setdefault(nct_id, label)
        provenance.setdefault(nct_id, origin or "gold")
    return GoldLabelSet(labels=labels, provenance=provenance)


def _gold_label(text: str) -> WeakLabel:
    label = WeakLabel(int(text.strip()))
    if label == WeakLabel.ABSTAIN:
        raise ValueError("rótulo ouro não pode ser -1")
    return label


# ============================================================================
# Pacote de sinais por ensaio
# ============================================================================


class SignalBundle(BaseModel):
    """Sinais já agregados por nct_id, prontos para as funções de rotulagem."""

    model_config = ConfigDict(frozen=True)

    news_by_trial: Dict[str, Tuple[NewsRecord, ...]] = Field(default_factory=dict)
    stock_slopes: Dict[str, Optional[float]] = Field(default_factory=dict)
    llm_decisions: Dict[str, WeakLabel] = Field(default_factory=dict)
    linkage_labels: Dict[str, WeakLabel] = Field(default_factory=dict)


def group_news(records: Iterable[NewsRecord]) -> Dict[str, Tuple[NewsRecord, ...]]:
    grouped: Dict[str, List[NewsRecord]] = defaultdict(list)
    for record in records:
        grouped[record.nct_id].append(record)
    return {nct_id: tuple(items) for nct_id, items in grouped.items()}


def trial_slopes(
    trials: Sequence[TrialRecord],
    series: Sequence[StockSeries],
    ticker_map: Mapping[str, str],
    sma_window: int = 5,
    slope_window_days: int = 7,
) -> Dict[str, Optional[float]]:
    """Inclinação da SMA após a conclusão, para cada ensaio com ticker único e data de conclusão."""
    by_ticker = {s.ticker: s for s in series}
    slopes: Dict[str, Optional[float]] = {}
    for trial in trials:
        ticker = ticker_map.get(trial.nct_id)
        if ticker is None or trial.completion_date is None or ticker not in by_ticker:
            continue
        slopes[trial.nct_id] = compute_sma_slope(
            by_ticker[ticker], trial.completion_date, sma_window, slope_window_days
        )
    return slopes


def build_signal_bundle(
    trials: Sequence[TrialRecord],
    news: Optional[Path] = None,
    stock: Optional[Path] = None,
    ticker_map: Optional[Path] = None,
    llm_decisions: Optional[Path] = None,
    linkage_labels: Optional[Mapping[str, WeakLabel]] = None,
    sma_window: int = 5,
    slope_window_days: int = 7,
    workers: int = 1,
) -> SignalBundle:
    """
    Carrega os sinais configurados (leitores independentes, executados em paralelo)
    e os agrega por ensaio. Fontes ausentes produzem mapas vazios.
    """
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        news_job = pool.submit(load_news, news) if news else None
        stock_job = pool.submit(load_stock_series, stock) if stock and ticker_map else None
        map_job = pool.submit(load_ticker_map, ticker_map) if stock and ticker_map else None
        llm_job = pool.submit(load_llm_decisions, llm_decisions) if llm_decisions else None

        news_by_trial = group_news(news_job.result().records) if news_job else {}
        slopes: Dict[str, Optional[float]] = {}
        if stock_job and map_job:
            mapping, _ = map_job.result()
            slopes = trial_slopes(
                trials, stock_job.result().records, mapping, sma_window, slope_window_days
            )
        decisions: Dict[str, WeakLabel] = {}
        if llm_job:
            for record in llm_job.result().records:
                decisions[record.nct_id] = record.decision

    return SignalBundle(
        news_by_trial=news_by_trial,
        stock_slopes=slopes,
        llm_decisions=decisions,
        linkage_labels=dict(linkage_labels or {}),
    )
