"""Configurações da aplicação: variáveis de ambiente e documento de execução (RunConfig)."""

import hashlib
import json
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from app.exceptions import ConfigurationError
from app.models.labeling import QUANTILE_GRID, LabelingFunctionSpec
from app.models.linkage import PhaseConnectionMap
from app.models.schemas import SelectionCriteria, TrialPhase


class Settings(BaseSettings):
    """Configurações carregadas do ambiente (prefixo CTO_) e do arquivo .env"""

    # Execução
    CONFIG: Optional[Path] = None
    SEED: Optional[int] = None
    WORKERS: Optional[int] = None
    OUT: Optional[Path] = None

    # Logs
    LOG_LEVEL: str = "INFO"

    model_config = SettingsConfigDict(
        env_prefix="CTO_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )


# ============================================================================
# Documento de configuração da execução
# ============================================================================


class InputPaths(BaseModel):
    """Arquivos de entrada; caminhos relativos são resolvidos a partir do arquivo de config."""

    model_config = ConfigDict(extra="forbid")

    trials: Path
    news: Optional[Path] = None
    stock: Optional[Path] = None
    ticker_map: Optional[Path] = None
    orange_book: Optional[Path] = None
    llm_decisions: Optional[Path] = None
    abstracts: Optional[Path] = None
    gold: Optional[Path] = None
    external_vectors: Optional[Path] = None


class IngestionConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    columns: Dict[str, str] = Field(default_factory=dict)
    delimiter: str = ","
    list_separator: str = "|"


class ThresholdSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    tune: bool = True
    grid: List[float] = Field(default_factory=lambda: list(QUANTILE_GRID))


class LinkageSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    phase_map: Optional[Dict[TrialPhase, List[TrialPhase]]] = None
    provider: Literal["hashed-bag", "external"] = "hashed-bag"
    dimension: int = Field(256, ge=1)
    scorer: Literal["token-overlap"] = "token-overlap"
    tau: float = 0.1
    top_k: int = Field(32, ge=1)
    links_per_phase: int = Field(1, ge=1)
    fda_top_n: int = Field(5, ge=1)
    sma_window: int = Field(5, ge=1)
    slope_window_days: int = Field(7, ge=1)

    def connection_map(self) -> PhaseConnectionMap:
        if self.phase_map is None:
            return PhaseConnectionMap.default()
        return PhaseConnectionMap(links={k: tuple(v) for k, v in self.phase_map.items()})


class LabelModelSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    method: Literal["mv", "dp", "rf"] = "dp"
    class_balance: float = Field(0.5, gt=0.0, lt=1.0)
    undecided_default: Literal["FAILURE", "SUCCESS"] = "FAILURE"
    use_anchors: bool = False
    anchor_factor: int = Field(3, ge=1)
    phase_wise: bool = False
    apply_rules: bool = True
    n_trees: int = Field(100, ge=1)
    max_depth: Optional[int] = Field(None, ge=1)


class EvaluationSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    all_mode: Literal["pooled", "averaged"] = "pooled"
    phase: Literal["1", "2", "3", "4", "all"] = "all"


class PipelineSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    # Gera etapas anteriores ausentes em vez de falhar
    inline: bool = True


class RunConfig(BaseModel):
    """Registro canônico de uma execução; chaves desconhecidas são rejeitadas."""

    model_config = ConfigDict(extra="forbid")

    inputs: InputPaths
    ingestion: IngestionConfig = Field(default_factory=IngestionConfig)
    selection: SelectionCriteria = Field(default_factory=SelectionCriteria)
    labeling_functions: Optional[List[LabelingFunctionSpec]] = None
    thresholds: ThresholdSettings = Field(default_factory=ThresholdSettings)
    linkage: LinkageSettings = Field(default_factory=LinkageSettings)
    label_model: LabelModelSettings = Field(default_factory=LabelModelSettings)
    evaluation: EvaluationSettings = Field(default_factory=EvaluationSettings)
    pipeline: PipelineSettings = Field(default_factory=PipelineSettings)
    seed: int = 0
    workers: int = Field(1, ge=1)
    output_dir: Path = Path("out")

    @field_validator("labeling_functions")
    @classmethod
    def _unique_lf_names(cls, value: Optional[List[LabelingFunctionSpec]]):
        names = [spec.name for spec in value or ()]
        repeated = sorted({name for name in names if names.count(name) > 1})
        if repeated:
            raise ValueError(f"nomes de funções repetidos: {', '.join(repeated)}")
        return value

    def digest(self) -> str:
        """sha256 do JSON canônico (chaves ordenadas) da configuração efetiva."""
        canonical = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _describe(exc: ValidationError) -> str:
    parts = []
    for error in exc.errors():
        location = ".".join(str(item) for item in error["loc"])
        parts.append(f"{location}: {error['msg']}")
    return "; ".join(parts)


def load_run_config(
    config_path: Optional[Path],
    settings: Optional[Settings] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> RunConfig:
    """
    Carrega o documento de configuração aplicando a precedência
    flag da CLI > variável de ambiente > arquivo.

    Args:
        config_path: caminho vindo de --config (tem prioridade sobre CTO_CONFIG)
        settings: variáveis de ambiente já carregadas
        overrides: valores de flags da CLI (seed, workers, output_dir, evaluation.phase)

    Returns:
        RunConfig validado, com caminhos de entrada absolutos e existentes
    """
    settings = settings or Settings()
    path = config_path or settings.CONFIG
    if path is None:
        raise ConfigurationError("Nenhuma configuração informada: use --config ou CTO_CONFIG")
    path = Path(path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigurationError(f"Arquivo de configuração não encontrado: {path}")
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"Configuração inválida em {path}: {e}")
    if not isinstance(document, dict):
        raise ConfigurationError(f"Configuração em {path} deve ser um objeto JSON")

    # Ambiente sobrepõe o arquivo
    if settings.SEED is not None:
        document["seed"] = settings.SEED
    if settings.WORKERS is not None:
        document["workers"] = settings.WORKERS
    if settings.OUT is not None:
        document["output_dir"] = str(settings.OUT.resolve())

    # Flags da CLI sobrepõem tudo
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key == "phase":
            document.setdefault("evaluation", {})["phase"] = value
        else:
            document[key] = value

    try:
        config = RunConfig.model_validate(document)
    except ValidationError as e:
        raise ConfigurationError(f"Configuração inválida: {_describe(e)}")

    base = path.resolve().parent
    resolved = {}
    for key, value in config.inputs.model_dump().items():
        if value is None:
            continue
        absolute = value if value.is_absolute() else (base / value)
        if not absolute.exists():
            raise ConfigurationError(f"inputs.{key}: arquivo não encontrado: {absolute}")
        resolved[key] = absolute
    output_dir = config.output_dir if config.output_dir.is_absolute() else base / config.output_dir
    return config.model_copy(
        update={"inputs": config.inputs.model_copy(update=resolved), "output_dir": output_dir}
    )
