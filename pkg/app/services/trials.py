"""Ingestão dos arquivos planos do registro e cascata de seleção de ensaios."""

import logging
from datetime import date, datetime
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from app.exceptions import DuplicateIdError, InvalidRecordError, SchemaError, first_validation_error
from app.models.schemas import (
    SelectionCriteria,
    TrialMetrics,
    TrialPhase,
    TrialRecord,
    TrialStatus,
)
from app.storage.files import read_table, write_csv

logger = logging.getLogger(__name__)


# ============================================================================
# Mapeamento de colunas
# ============================================================================

MANDATORY_COLUMNS: Tuple[str, ...] = ("nct_id", "phase", "status")

TEXT_COLUMNS: Tuple[str, ...] = (
    "official_title",
    "brief_summary",
    "eligibility_criteria",
    "lead_sponsor",
)
DATE_COLUMNS: Tuple[str, ...] = ("start_date", "completion_date", "last_update_date")
LIST_COLUMNS: Tuple[str, ...] = ("intervention_types", "intervention_names", "conditions")
BOOL_METRICS: Tuple[str, ...] = ("results_reported", "has_significant_pvalue")
COUNT_METRICS: Tuple[str, ...] = (
    "num_sponsors",
    "num_patients",
    "patient_drop",
    "num_sites",
    "deaths",
    "serious_adverse_events",
    "all_adverse_events",
    "num_amendments",
)

# Ordem canônica das colunas (também usada na reescrita)
CANONICAL_COLUMNS: Tuple[str, ...] = (
    MANDATORY_COLUMNS
    + DATE_COLUMNS
    + LIST_COLUMNS
    + TEXT_COLUMNS
    + BOOL_METRICS
    + COUNT_METRICS
    + ("update_lag_days",)
)

_TRUE = {"true", "t", "yes", "y", "1"}
_FALSE = {"false", "f", "no", "n", "0"}
_DATE_FORMATS = ("%Y-%m-%d", "%B %Y", "%b %Y", "%B %d, %Y", "%b %d, %Y")


class ParseResult(BaseModel):
    """Registros lidos, na ordem do arquivo, e os avisos de campos descartados."""

    model_config = ConfigDict(frozen=True)

    records: List[TrialRecord]
    warnings: List[str] = Field(default_factory=list)


class SelectionResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    trials: List[TrialRecord]
    stages: List[Tuple[str, int]]

    def report_lines(self) -> List[str]:
        """Uma linha "etapa,contagem" por etapa."""
        return [f"{name},{count}" for name, count in self.stages]


# ============================================================================
# Conversores de campos
# ============================================================================


def parse_date(text: str) -> Optional[date]:
    """
    Aceita ISO-8601 e "Month YYYY" (dia 1 do mês), além de "Month D, YYYY".
    Retorna None quando o texto não é uma data reconhecida.
    """
    text = text.strip()
    if not text:
        return None
    for fmt in _DATE_FORMATS:
        try:
            return datetime.strptime(text, fmt).date()
        except ValueError:
            continue
    return None


def _parse_bool(text: str) -> Optional[bool]:
    key = text.strip().lower()
    if key in _TRUE:
        return True
    if key in _FALSE:
        return False
    return None


def _parse_int(text: str, allow_negative: bool = False) -> Optional[int]:
    try:
        number = float(text.strip())
    except ValueError:
        return None
    if number != number or number in (float("inf"), float("-inf")) or not number.is_integer():
        return None
    if number < 0 and not allow_negative:
        return None
    return int(number)


def _split(text: str, separator: str) -> List[str]:
    return [item.strip() for item in text.split(separator) if item.strip()]


# ============================================================================
# Leitura
# ============================================================================


def parse_trials(
    path: Path,
    columns: Optional[Mapping[str, str]] = None,
    delimiter: str = ",",
    list_separator: str = "|",
) -> ParseResult:
    """
    Lê um arquivo plano no estilo CTTI e devolve um TrialRecord por linha, na ordem do arquivo.

    Args:
        path: arquivo delimitado com cabeçalho
        columns: remapeamento nome canônico -> nome da coluna no arquivo
        delimiter: separador de colunas
        list_separator: separador dentro de células com listas (tipos, nomes, condições)

    Returns:
        ParseResult com os registros e os avisos de campos opcionais descartados
    """
    colmap = {name: name for name in CANONICAL_COLUMNS}
    colmap.update(columns or {})
    frame = read_table(path, delimiter)

    for canonical in MANDATORY_COLUMNS:
        if colmap[canonical] not in frame.columns:
            raise SchemaError(colmap[canonical], str(path))

    ids = frame[colmap["nct_id"]].str.strip()
    duplicated = ids[ids.duplicated(keep=False)]
    if len(duplicated):
        raise DuplicateIdError(list(duplicated))

    present = {canonical for canonical, column in colmap.items() if column in frame.columns}
    warnings: List[str] = []
    records: List[TrialRecord] = []

    def warn(nct_id: str, message: str) -> None:
        text = f"{nct_id}: {message}"
        warnings.append(text)
        logger.warning(text)

    for line, row in enumerate(frame.to_dict(orient="records"), start=2):
        cell = {canonical: row[colmap[canonical]] for canonical in present}
        nct_id = cell["nct_id"].strip()

        dates: Dict[str, Optional[date]] = {}
        for name in DATE_COLUMNS:
            raw = cell.get(name, "")
            dates[name] = parse_date(raw)
            if raw.strip() and dates[name] is None:
                warn(nct_id, f"data inválida em {name}: {raw!r}")
        if dates["start_date"] and dates["completion_date"] and dates["start_date"] > dates["completion_date"]:
            warn(nct_id, "completion_date anterior a start_date; completion_date descartada")
            dates["completion_date"] = None

        metrics: Dict[str, object] = {}
        for name in BOOL_METRICS:
            raw = cell.get(name, "")
            metrics[name] = _parse_bool(raw) if raw.strip() else None
            if raw.strip() and metrics[name] is None:
                warn(nct_id, f"valor booleano inválido em {name}: {raw!r}")
        for name in COUNT_METRICS:
            raw = cell.get(name, "")
            metrics[name] = _parse_int(raw) if raw.strip() else None
            if raw.strip() and metrics[name] is None:
                warn(nct_id, f"contagem inválida em {name}: {raw!r}")

        raw_lag = cell.get("update_lag_days", "")
        if raw_lag.strip():
            metrics["update_lag_days"] = _parse_int(raw_lag, allow_negative=True)
            if metrics["update_lag_days"] is None:
                warn(nct_id, f"update_lag_days inválido: {raw_lag!r}")
        elif "update_lag_days" not in present and dates["last_update_date"] and dates["completion_date"]:
            # Derivado apenas quando a coluna não existe no arquivo
            metrics["update_lag_days"] = (dates["last_update_date"] - dates["completion_date"]).days

        status_text = cell["status"].strip()
        status = TrialStatus.parse(status_text)
        try:
            record = TrialRecord(
                nct_id=nct_id,
                phase=TrialPhase.parse(cell["phase"]),
                status=status,
                status_detail=status_text if status == TrialStatus.OTHER else "",
                intervention_types=frozenset(_split(cell.get("intervention_types", ""), list_separator)),
                intervention_names=tuple(_split(cell.get("intervention_names", ""), list_separator)),
                conditions=tuple(_split(cell.get("conditions", ""), list_separator)),
                metrics=TrialMetrics(**metrics),
                **dates,
                **{name: cell.get(name, "") for name in TEXT_COLUMNS},
            )
        except ValidationError as e:
            raise InvalidRecordError(Path(path).name, line, first_validation_error(e))
        records.append(record)

    logger.info(f"{len(records)} ensaios lidos de {path} ({len(warnings)} avisos)")
    return ParseResult(records=records, warnings=warnings)


def write_trials(
    records: Sequence[TrialRecord],
    path: Path,
    columns: Optional[Mapping[str, str]] = None,
    delimiter: str = ",",
    list_separator: str = "|",
) -> Path:
    """Reescreve registros no mesmo formato aceito por parse_trials."""
    colmap = {name: name for name in CANONICAL_COLUMNS}
    colmap.update(columns or {})

    def text_of(value) -> str:
        if value is None:
            return ""
        if isinstance(value, bool):
            return "true" if value else "false"
        return str(value)

    rows = []
    for record in records:
        metrics = record.metrics
        row = {
            "nct_id": record.nct_id,
            "phase": record.phase.value,
            "status": record.status_detail if record.status == TrialStatus.OTHER else record.status.value,
            "intervention_types": list_separator.join(sorted(record.intervention_types)),
            "intervention_names": list_separator.join(record.intervention_names),
            "conditions": list_separator.join(record.conditions),
        }
        for name in DATE_COLUMNS:
            value = getattr(record, name)
            row[name] = value.isoformat() if value else ""
        for name in TEXT_COLUMNS:
            row[name] = getattr(record, name)
        for name in BOOL_METRICS + COUNT_METRICS + ("update_lag_days",):
            row[name] = text_of(getattr(metrics, name))
        rows.append([row[name] for name in CANONICAL_COLUMNS])

    return write_csv(path, [colmap[name] for name in CANONICAL_COLUMNS], rows, delimiter=delimiter)


# ============================================================================
# Seleção
# ============================================================================


def select_trials(trials: Sequence[TrialRecord], criteria: SelectionCriteria) -> SelectionResult:
    """
    Aplica a cascata de seleção em ordem e registra a contagem após cada etapa.

    Etapas: (1) droga ou biológico, (2) concluídos ou interrompidos,
    (3) fase conhecida, (4) conclusão a partir da data de corte (opcional).
    """
    current = list(trials)
    stages: List[Tuple[str, int]] = [("input", len(current))]

    if criteria.require_drug_or_biologic:
        current = [t for t in current if t.is_drug_or_biologic]
        stages.append(("drug_or_biologic", len(current)))
    if criteria.exclude_ongoing:
        current = [t for t in current if t.status not in (TrialStatus.ACTIVE, TrialStatus.RECRUITING)]
        stages.append(("completed_or_stopped", len(current)))
    if criteria.require_known_phase:
        current = [t for t in current if t.phase not in (TrialPhase.NOT_APPLICABLE, TrialPhase.UNKNOWN)]
        stages.append(("known_phase", len(current)))
    if criteria.completion_cutoff is not None:
        cutoff = criteria.completion_cutoff
        current = [t for t in current if t.completion_date is not None and t.completion_date >= cutoff]
        stages.append(("completion_cutoff", len(current)))

    for name, count in stages:
        logger.info(f"seleção {name}: {count}")
    return SelectionResult(trials=current, stages=stages)
