"""
Contratos de embedding e de re-ranqueamento usados na ligação entre fases,
com implementações padrão determinísticas (sem modelos pré-treinados).
"""

import hashlib
import logging
import re
from functools import lru_cache
from pathlib import Path
from typing import Dict, FrozenSet, List, Optional, Protocol

import numpy as np

from app.exceptions import ConfigurationError, StorageError
from app.storage.files import read_table

logger = logging.getLogger(__name__)

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> List[str]:
    """Tokens alfanuméricos em minúsculas."""
    return _TOKEN_RE.findall((text or "").lower())


def token_set(text: str) -> FrozenSet[str]:
    return frozenset(tokenize(text))


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosseno entre dois vetores; vetor nulo contribui 0."""
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


# ============================================================================
# Contratos
# ============================================================================


class EmbeddingProvider(Protocol):
    dimension: int

    def embed(self, text: str) -> np.ndarray:
        """Vetor de dimensão fixa; texto igual gera vetor igual."""
        ...


class CrossEncoderScorer(Protocol):
    def score(self, query_text: str, candidate_text: str) -> float:
        """Maior = mais relacionado; o sinal é significativo."""
        ...


# ============================================================================
# Implementações padrão
# ============================================================================


class HashedBagEmbedder:
    """Saco de tokens com hashing assinado (blake2b de 8 bytes), normalizado em L2."""

    def __init__(self, dimension: int = 256, cache_size: int = 65536):
        if dimension < 1:
            raise ConfigurationError(f"dimensão do embedding deve ser >= 1, recebido {dimension}")
        self.dimension = dimension
        self._cached = lru_cache(maxsize=cache_size)(self._embed)

    def _embed(self, text: str) -> np.ndarray:
        vector = np.zeros(self.dimension, dtype=float)
        for token in tokenize(text):
            h = int.from_bytes(hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest(), "big")
            sign = -1.0 if (h >> 63) & 1 else 1.0
            vector[h % self.dimension] += sign
        norm = np.linalg.norm(vector)
        if norm > 0:
            vector /= norm
        vector.setflags(write=False)
        return vector

    def embed(self, text: str) -> np.ndarray:
        return self._cached(text or "")


class ExternalVectorProvider:
    """
    Vetores pré-calculados fora do pipeline.

    Formato do arquivo: key,v0,...,v{d-1}, com key = sha256 do texto em UTF-8.
    Texto sem vetor no arquivo recebe o vetor nulo.
    """

    def __init__(self, path: Path, dimension: Optional[int] = None):
        frame = read_table(path)
        if "key" not in frame.columns:
            raise StorageError(f"Arquivo de vetores sem coluna 'key': {path}")
        value_columns = [c for c in frame.columns if c != "key"]
        if dimension is not None and len(value_columns) != dimension:
            raise ConfigurationError(
                f"{path}: {len(value_columns)} colunas de vetor, dimensão configurada {dimension}"
            )
        self.dimension = len(value_columns)
        try:
            matrix = frame[value_columns].astype(float).to_numpy()
        except ValueError as e:
            raise StorageError(f"Valor não numérico em {path}: {e}")
        if not np.isfinite(matrix).all():
            raise StorageError(f"Vetor com valor não finito em {path}")
        self._vectors: Dict[str, np.ndarray] = {
            key: row for key, row in zip(frame["key"], matrix)
        }
        self._zero = np.zeros(self.dimension, dtype=float)
        logger.info(f"{len(self._vectors)} vetores externos carregados de {path}")

    @staticmethod
    def key_for(text: str) -> str:
        return hashlib.sha256((text or "").encode("utf-8")).hexdigest()

    def embed(self, text: str) -> np.ndarray:
        return self._vectors.get(self.key_for(text), self._zero)


class TokenOverlapScorer:
    """Coeficiente de Dice entre conjuntos de tokens menos `tau`: textos sem relação pontuam negativo."""

    def __init__(self, tau: float = 0.1):
        self.tau = tau

    def score(self, query_text: str, candidate_text: str) -> float:
        a = token_set(query_text)
        b = token_set(candidate_text)
        if not a and not b:
            return -self.tau
        return 2.0 * len(a & b) / (len(a) + len(b)) - self.tau


def build_provider(name: str, dimension: int = 256, vectors: Optional[Path] = None) -> EmbeddingProvider:
    if name == "hashed-bag":
        return HashedBagEmbedder(dimension)
    if name == "external":
        if vectors is None:
            raise ConfigurationError("provider 'external' exige inputs.external_vectors")
        return ExternalVectorProvider(vectors, dimension)
    raise ConfigurationError(f"provider de embedding desconhecido: {name!r}")


def build_scorer(name: str, tau: float = 0.1) -> CrossEncoderScorer:
    if name == "token-overlap":
        return TokenOverlapScorer(tau)
    raise ConfigurationError(f"scorer desconhecido: {name!r}")
