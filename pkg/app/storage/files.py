"""Leitura e escrita determinística de arquivos CSV/JSON."""

import csv
import hashlib
import json
import logging
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Generator, Iterable, Optional, Sequence, TextIO

import pandas as pd

from app.exceptions import StorageError

logger = logging.getLogger(__name__)


def format_float(value: Optional[float]) -> str:
    """Formato fixo usado em todos os artefatos; ausente vira string vazia."""
    if value is None:
        return ""
    return f"{float(value):.6f}"


@contextmanager
def open_output(path: Path) -> Generator[TextIO, None, None]:
    """
    Context manager para escrever um artefato.

    Uso:
        with open_output(out_dir / "labels.csv") as handle:
            handle.write(...)
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        handle = open(path, "w", encoding="utf-8", newline="")
    except OSError as e:
        logger.error(f"❌ Erro ao abrir {path} para escrita: {e}")
        raise StorageError(f"Não foi possível escrever em {path}: {e}")
    try:
        yield handle
    finally:
        handle.close()


def read_table(path: Path, delimiter: str = ",") -> pd.DataFrame:
    """
    Lê um arquivo delimitado (UTF-8, cabeçalho obrigatório) com todas as colunas como texto.

    Células vazias continuam strings vazias; nenhuma conversão de NA é feita.
    Linhas curtas têm os campos finais vazios; linha com campos a mais é erro.
    """
    path = Path(path)
    try:
        frame = pd.read_csv(
            path,
            sep=delimiter,
            dtype=str,
            keep_default_na=False,
            encoding="utf-8",
        )
    except pd.errors.EmptyDataError:
        raise StorageError(f"Arquivo sem cabeçalho: {path}")
    except pd.errors.ParserError as e:
        raise StorageError(f"Arquivo malformado {path}: {e}")
    except (OSError, UnicodeDecodeError) as e:
        raise StorageError(f"Não foi possível ler {path}: {e}")
    return frame.fillna("")


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]], delimiter: str = ",") -> Path:
    with open_output(path) as handle:
        writer = csv.writer(handle, delimiter=delimiter, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)
    return Path(path)


def write_json(path: Path, document: Any) -> Path:
    with open_output(path) as handle:
        handle.write(json.dumps(document, sort_keys=True, indent=2, ensure_ascii=False))
        handle.write("\n")
    return Path(path)


def read_json(path: Path) -> Any:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise StorageError(f"Não foi possível ler {path}: {e}")


def write_text(path: Path, text: str) -> Path:
    with open_output(path) as handle:
        handle.write(text)
    return Path(path)


def file_digest(path: Path) -> str:
    """sha256 do conteúdo do arquivo."""
    digest = hashlib.sha256()
    try:
        with open(path, "rb") as handle:
            for chunk in iter(lambda: handle.read(1 << 16), b""):
                digest.update(chunk)
    except OSError as e:
        raise StorageError(f"Não foi possível ler {path}: {e}")
    return digest.hexdigest()
