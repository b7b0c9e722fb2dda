"""
Persistência dos artefatos do pipeline (matriz de rótulos, limiares, grafo, modelos, rótulos).

Cada etapa da CLI grava aqui o que a próxima etapa lê; nomes de arquivo são fixos.
"""

import logging
from datetime import date
from pathlib import Path
from typing import Dict, List, Sequence, Union

import numpy as np

from app.exceptions import MissingStageError, StorageError
from app.models.labeling import (
    LabelMatrix,
    PhaseWiseDataProgramming,
    PosteriorLabel,
    RandomForestAggregator,
    ThresholdConfig,
)
from app.models.linkage import FDAMatch, LinkageEdge, LinkageGraph
from app.models.schemas import WeakLabel
from app.storage.files import format_float, read_json, read_table, write_csv, write_json

logger = logging.getLogger(__name__)

# Nome do artefato -> (arquivo, etapa que o produz)
ARTIFACTS: Dict[str, tuple] = {
    "trials": ("trials_selected.csv", "ingest"),
    "selection_report": ("selection_report.csv", "ingest"),
    "edges": ("linkage_edges.csv", "link"),
    "fda_matches": ("fda_matches.csv", "link"),
    "linkage_labels": ("linkage_labels.csv", "link"),
    "thresholds": ("thresholds.json", "tune"),
    "label_matrix": ("label_matrix.csv", "label"),
    "labels": ("labels.csv", "label"),
    "model": ("model.json", "label"),
    "metrics": ("metrics.json", "evaluate"),
}

# Versão do formato gravada no manifesto
ARTIFACT_VERSION = "1"


def artifact_path(out_dir: Path, name: str) -> Path:
    return Path(out_dir) / ARTIFACTS[name][0]


def require_artifact(out_dir: Path, name: str) -> Path:
    """Caminho de um artefato existente; ausente gera MissingStageError com a etapa produtora."""
    path = artifact_path(out_dir, name)
    if not path.exists():
        raise MissingStageError(ARTIFACTS[name][1], str(path))
    return path


# ============================================================================
# Matriz de rótulos
# ============================================================================


def save_label_matrix(matrix: LabelMatrix, path: Path) -> Path:
    rows = (
        [trial_id, *(int(v) for v in matrix.values[i])]
        for i, trial_id in enumerate(matrix.trial_ids)
    )
    return write_csv(path, ["nct_id", *matrix.lf_names], rows)


def load_label_matrix(path: Path) -> LabelMatrix:
    frame = read_table(path)
    if not len(frame.columns) or frame.columns[0] != "nct_id":
        raise StorageError(f"Matriz de rótulos sem coluna nct_id: {path}")
    names = tuple(frame.columns[1:])
    try:
        values = frame[list(names)].astype(int).to_numpy() if len(frame) else np.zeros((0, len(names)))
    except ValueError as e:
        raise StorageError(f"Valor não inteiro na matriz de rótulos {path}: {e}")
    return LabelMatrix(tuple(frame["nct_id"]), names, values)


# ============================================================================
# Limiares
# ============================================================================


def save_thresholds(config: ThresholdConfig, path: Path) -> Path:
    return write_json(path, config.to_document())


def load_thresholds(path: Path) -> ThresholdConfig:
    return ThresholdConfig.from_document(read_json(path))


# ============================================================================
# Grafo de ligação
# ============================================================================


def save_linkage(graph: LinkageGraph, labels: Dict[str, WeakLabel], out_dir: Path) -> List[Path]:
    edges = write_csv(
        artifact_path(out_dir, "edges"),
        ["later_nct_id", "earlier_nct_id", "cross_score"],
        ([e.later_nct_id, e.earlier_nct_id, format_float(e.cross_score)] for e in graph.edges),
    )
    matches = write_csv(
        artifact_path(out_dir, "fda_matches"),
        ["nct_id", "generic_name", "approval_date"],
        ([m.nct_id, m.generic_name, m.approval_date.isoformat()] for m in graph.fda_matches),
    )
    label_file = write_csv(
        artifact_path(out_dir, "linkage_labels"),
        ["nct_id", "label"],
        ([nct_id, int(labels[nct_id])] for nct_id in sorted(labels)),
    )
    return [edges, matches, label_file]


def load_linkage_graph(out_dir: Path) -> LinkageGraph:
    edges = read_table(require_artifact(out_dir, "edges"))
    matches = read_table(require_artifact(out_dir, "fda_matches"))
    return LinkageGraph(
        edges=tuple(
            LinkageEdge(
                later_nct_id=row["later_nct_id"],
                earlier_nct_id=row["earlier_nct_id"],
                cross_score=float(row["cross_score"]),
            )
            for row in edges.to_dict(orient="records")
        ),
        fda_matches=tuple(
            FDAMatch(
                nct_id=row["nct_id"],
                generic_name=row["generic_name"],
                approval_date=date.fromisoformat(row["approval_date"]),
            )
            for row in matches.to_dict(orient="records")
        ),
    )


def load_linkage_labels(path: Path) -> Dict[str, WeakLabel]:
    frame = read_table(path)
    return {row["nct_id"]: WeakLabel(int(row["label"])) for row in frame.to_dict(orient="records")}


# ============================================================================
# Rótulos finais e modelos
# ============================================================================


def save_labels(labels: Sequence[PosteriorLabel], path: Path) -> Path:
    return write_csv(
        path,
        ["nct_id", "p_success", "hard_label", "source"],
        ([p.nct_id, format_float(p.p_success), int(p.hard_label), p.source] for p in labels),
    )


def load_labels(path: Path) -> List[PosteriorLabel]:
    """Relê labels.csv. Linha indecisa: rótulo incoerente com p, ou empate (p = 0.5) no voto majoritário."""
    frame = read_table(path)
    labels = []
    for row in frame.to_dict(orient="records"):
        p = float(row["p_success"])
        hard = WeakLabel(int(row["hard_label"]))
        undecided = (hard == WeakLabel.SUCCESS) != (p >= 0.5) or (p == 0.5 and row["source"] == "mv")
        labels.append(
            PosteriorLabel(
                nct_id=row["nct_id"],
                p_success=p,
                hard_label=hard,
                undecided=undecided,
                source=row["source"],
            )
        )
    return labels


ModelFile = Union[PhaseWiseDataProgramming, RandomForestAggregator, None]


def save_model(method: str, model: ModelFile, metadata: Dict[str, object], path: Path) -> Path:
    """Arquivo autodescritivo: método, hiperparâmetros/metadados e parâmetros ajustados."""
    document = {
        "method": method,
        "metadata": metadata,
        "model": model.model_dump(mode="json") if model is not None else None,
    }
    return write_json(path, document)


def load_model(path: Path) -> ModelFile:
    document = read_json(path)
    method = document.get("method")
    payload = document.get("model")
    if method == "dp":
        return PhaseWiseDataProgramming.model_validate(payload)
    if method == "rf":
        return RandomForestAggregator.model_validate(payload)
    if method == "mv":
        return None
    raise StorageError(f"Método de agregação desconhecido em {path}: {method!r}")
