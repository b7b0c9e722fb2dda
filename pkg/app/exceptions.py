"""Exceções da aplicação e seus códigos de saída para a CLI."""

from pydantic import ValidationError


class CTOError(Exception):
    """Erro base do motor de rotulagem."""

    exit_code: int = 2


# ============================================================================
# Erros de validação (código de saída 1)
# ============================================================================


class ConfigurationError(CTOError):
    """Configuração inválida ou incompleta."""

    exit_code = 1


class SchemaError(ConfigurationError):
    """Arquivo de entrada sem uma coluna obrigatória."""

    def __init__(self, column: str, path: str = ""):
        self.column = column
        where = f" em {path}" if path else ""
        super().__init__(f"Coluna obrigatória ausente{where}: '{column}'")


class MissingStageError(ConfigurationError):
    """Saída de uma etapa anterior do pipeline não encontrada."""

    def __init__(self, stage: str, path: str = ""):
        self.stage = stage
        super().__init__(
            f"Saída da etapa '{stage}' não encontrada ({path}); execute 'cto {stage}' antes"
        )


# ============================================================================
# Erros de dados / execução (código de saída 2)
# ============================================================================


class DuplicateIdError(CTOError):
    """nct_id repetido no mesmo conjunto de ensaios."""

    def __init__(self, duplicates: list[str]):
        self.duplicates = sorted(set(duplicates))
        super().__init__(f"nct_id duplicado: {', '.join(self.duplicates)}")


class CorruptInputError(CTOError):
    """Mais da metade das linhas de um arquivo é inválida."""


class InsufficientDataError(CTOError):
    """Série curta demais para o cálculo pedido."""


class FitError(CTOError):
    """Falha ao ajustar um modelo de rótulos."""


class NotFittedError(CTOError):
    """Modelo usado antes de ser ajustado."""


class EvaluationError(CTOError):
    """Métrica sem dados suficientes (ex.: nenhum id em comum com o ouro)."""


class StorageError(CTOError):
    """Falha de leitura/escrita de arquivo."""


class InvalidRecordError(CTOError):
    """Linha de um arquivo de entrada que não forma um registro válido."""

    def __init__(self, source: str, line: int, reason: str):
        self.source = source
        self.line = line
        super().__init__(f"{source}:{line}: registro inválido ({reason})")


def first_validation_error(exc: Exception) -> str:
    """Primeiro erro de uma ValidationError do pydantic ("campo: mensagem"); outras exceções viram str."""
    if not isinstance(exc, ValidationError):
        return str(exc)
    error = exc.errors()[0]
    location = ".".join(str(item) for item in error["loc"])
    return f"{location}: {error['msg']}" if location else error["msg"]
