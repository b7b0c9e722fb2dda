"""
Orquestração das etapas da CLI: ingestão -> ligação -> limiares -> rotulagem -> avaliação.

Cada etapa grava seus artefatos no diretório de saída. Uma etapa que precisa da
saída de outra a lê do disco; se ela não existir, a etapa anterior é executada
em linha (pipeline.inline) ou a execução falha com MissingStageError.
"""

import logging
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Dict, Generator, List, Optional, Tuple

from app import __version__
from app.config import RunConfig
from app.exceptions import ConfigurationError, MissingStageError
from app.models.evaluation import MetricsReport, RunManifest
from app.models.labeling import AnchorSet, LabelingFunctionSpec, LabelMatrix, PosteriorLabel, ThresholdConfig
from app.models.linkage import LinkageGraph
from app.models.schemas import GoldLabelSet, TrialRecord, WeakLabel
from app.services import abstracts, evaluation, forest, label_model, linkage, signals, thresholds, trials
from app.services.embeddings import build_provider, build_scorer
from app.services.labeling_functions import apply_all, default_lf_catalog
from app.storage import artifacts
from app.storage.files import file_digest, write_json, write_text

logger = logging.getLogger(__name__)


# ============================================================================
# Manifesto
# ============================================================================


class ManifestRecorder:
    """Acumula contagens, tempos e digests de uma execução e grava manifest_<comando>.json."""

    def __init__(self, command: str, config: RunConfig):
        self.command = command
        self.config = config
        self.stage_counts: Dict[str, int] = {}
        self.stage_seconds: Dict[str, float] = {}
        self.artifacts: Dict[str, str] = {}

    @contextmanager
    def stage(self, name: str) -> Generator[None, None, None]:
        started = time.perf_counter()
        try:
            yield
        finally:
            self.stage_seconds[name] = round(time.perf_counter() - started, 6)

    def count(self, name: str, value: int) -> None:
        self.stage_counts[name] = int(value)

    def produced(self, *names: str) -> None:
        for name in names:
            self.artifacts[name] = artifacts.ARTIFACT_VERSION

    def manifest(self) -> RunManifest:
        inputs = {
            key: file_digest(path)
            for key, path in sorted(self.config.inputs.model_dump().items())
            if path is not None
        }
        return RunManifest(
            command=self.command,
            config_digest=self.config.digest(),
            input_digests=inputs,
            artifact_versions={"cto": __version__, **dict(sorted(self.artifacts.items()))},
            stage_counts=dict(sorted(self.stage_counts.items())),
            stage_seconds=dict(sorted(self.stage_seconds.items())),
        )

    def write(self) -> Path:
        path = Path(self.config.output_dir) / f"manifest_{self.command}.json"
        return write_json(path, self.manifest().model_dump(mode="json"))


def _require_or_inline(config: RunConfig, name: str) -> Optional[Path]:
    """Caminho do artefato se existir; None quando a etapa deve rodar em linha."""
    path = artifacts.artifact_path(config.output_dir, name)
    if path.exists():
        return path
    if not config.pipeline.inline:
        raise MissingStageError(artifacts.ARTIFACTS[name][1], str(path))
    logger.info(f"artefato {path.name} ausente; executando a etapa '{artifacts.ARTIFACTS[name][1]}' em linha")
    return None


def lf_specs(config: RunConfig) -> List[LabelingFunctionSpec]:
    return list(config.labeling_functions) if config.labeling_functions else default_lf_catalog()


def load_gold_labels(config: RunConfig, required: bool = False) -> Optional[GoldLabelSet]:
    if config.inputs.gold is None:
        if required:
            raise ConfigurationError("inputs.gold é obrigatório para esta etapa")
        return None
    return signals.load_gold(config.inputs.gold)


# ============================================================================
# Etapas
# ============================================================================


def run_ingest(config: RunConfig, recorder: ManifestRecorder) -> List[TrialRecord]:
    """Lê o registro, aplica a seleção e grava o conjunto selecionado e o relatório de etapas."""
    with recorder.stage("parse"):
        parsed = trials.parse_trials(
            config.inputs.trials,
            config.ingestion.columns,
            config.ingestion.delimiter,
            config.ingestion.list_separator,
        )
    with recorder.stage("select"):
        selection = trials.select_trials(parsed.records, config.selection)
    for name, count in selection.stages:
        recorder.count(f"select.{name}", count)

    out = Path(config.output_dir)
    trials.write_trials(selection.trials, artifacts.artifact_path(out, "trials"))
    write_text(artifacts.artifact_path(out, "selection_report"), "\n".join(selection.report_lines()) + "\n")
    recorder.produced("trials", "selection_report")

    if config.inputs.abstracts is not None:
        with recorder.stage("prompts"):
            records = signals.load_abstract_links(config.inputs.abstracts).records
            prompts = abstracts.build_prompts(selection.trials, records)
        write_json(out / "llm_prompts.json", prompts)
        recorder.count("prompts", len(prompts))
    return selection.trials


def selected_trials(config: RunConfig, recorder: ManifestRecorder) -> List[TrialRecord]:
    path = _require_or_inline(config, "trials")
    if path is None:
        return run_ingest(config, recorder)
    return trials.parse_trials(path).records


def run_link(config: RunConfig, recorder: ManifestRecorder) -> Tuple[LinkageGraph, Dict[str, WeakLabel]]:
    """Grafo entre fases, pareamentos do FDA e rótulos derivados."""
    records = selected_trials(config, recorder)
    settings = config.linkage
    cmap = settings.connection_map()
    provider = build_provider(settings.provider, settings.dimension, config.inputs.external_vectors)
    scorer = build_scorer(settings.scorer, settings.tau)
    book = signals.load_orange_book(config.inputs.orange_book).records if config.inputs.orange_book else []

    with recorder.stage("link"):
        graph = linkage.link_trials(
            records,
            cmap,
            provider,
            scorer,
            k=settings.top_k,
            links_per_phase=settings.links_per_phase,
            book=book,
            fda_top_n=settings.fda_top_n,
            workers=config.workers,
        )
    violations = linkage.validate_graph(graph, records, cmap)
    for violation in violations:
        logger.warning(f"grafo inválido: {violation}")
    labels = linkage.derive_linkage_labels(graph, records, cmap)

    artifacts.save_linkage(graph, labels, config.output_dir)
    recorder.count("edges", len(graph.edges))
    recorder.count("fda_matches", len(graph.fda_matches))
    recorder.produced("edges", "fda_matches", "linkage_labels")
    return graph, labels


def linkage_labels(config: RunConfig, recorder: ManifestRecorder) -> Dict[str, WeakLabel]:
    path = _require_or_inline(config, "linkage_labels")
    if path is None:
        return run_link(config, recorder)[1]
    return artifacts.load_linkage_labels(path)


def run_tune(config: RunConfig, recorder: ManifestRecorder) -> ThresholdConfig:
    """Limiares por fase: ajustados contra o ouro quando houver, senão na mediana."""
    records = selected_trials(config, recorder)
    specs = lf_specs(config)
    gold = load_gold_labels(config)
    with recorder.stage("tune"):
        if config.thresholds.tune and gold is not None:
            cfg = thresholds.tune_thresholds(records, specs, gold, config.thresholds.grid)
        else:
            cfg = thresholds.fit_thresholds(records, specs)
    artifacts.save_thresholds(cfg, artifacts.artifact_path(config.output_dir, "thresholds"))
    recorder.count("threshold_phases", len(cfg.entries))
    recorder.produced("thresholds")
    return cfg


def threshold_config(config: RunConfig, recorder: ManifestRecorder) -> ThresholdConfig:
    path = _require_or_inline(config, "thresholds")
    if path is None:
        return run_tune(config, recorder)
    return artifacts.load_thresholds(path)


def aggregate(
    config: RunConfig,
    matrix: LabelMatrix,
    records: List[TrialRecord],
    gold: Optional[GoldLabelSet],
):
    """Aplica o agregador configurado; devolve (rótulos, modelo, metadados)."""
    settings = config.label_model
    phases = {t.nct_id: t.phase for t in records}
    groups = {t.nct_id: label_model.phase_group_of(t) for t in records}
    metadata: Dict[str, object] = {"seed": config.seed, "lf_names": list(matrix.lf_names)}

    if settings.method == "mv":
        default = WeakLabel[settings.undecided_default]
        return label_model.predict_majority_vote(matrix, default), None, metadata

    if settings.method == "dp":
        anchors = None
        if settings.use_anchors:
            if gold is None:
                raise ConfigurationError("label_model.use_anchors exige inputs.gold")
            anchors = AnchorSet(gold=gold.restrict(matrix.trial_ids), factor=settings.anchor_factor)
        model = label_model.fit_phase_wise_dp(
            matrix, groups, settings.class_balance, anchors, settings.phase_wise
        )
        metadata.update({"class_balance": settings.class_balance, "anchor_factor": settings.anchor_factor if anchors else 0})
        return label_model.predict_phase_wise_dp(model, matrix, groups), model, metadata

    if gold is None:
        raise ConfigurationError("label_model.method 'rf' exige inputs.gold")
    model = forest.fit_random_forest(
        matrix,
        phases,
        gold,
        n_trees=settings.n_trees,
        max_depth=settings.max_depth,
        seed=config.seed,
        phase_wise=settings.phase_wise,
    )
    metadata.update({"n_trees": settings.n_trees, "max_depth": settings.max_depth})
    return forest.predict_random_forest(model, matrix, phases), model, metadata


def run_label(config: RunConfig, recorder: ManifestRecorder) -> Tuple[LabelMatrix, List[PosteriorLabel]]:
    """Matriz de rótulos, agregação e regras de precedência."""
    records = selected_trials(config, recorder)
    cfg = threshold_config(config, recorder)
    links = linkage_labels(config, recorder)
    settings = config.linkage

    with recorder.stage("signals"):
        bundle = signals.build_signal_bundle(
            records,
            news=config.inputs.news,
            stock=config.inputs.stock,
            ticker_map=config.inputs.ticker_map,
            llm_decisions=config.inputs.llm_decisions,
            linkage_labels=links,
            sma_window=settings.sma_window,
            slope_window_days=settings.slope_window_days,
            workers=config.workers,
        )
    with recorder.stage("apply"):
        matrix = apply_all(records, lf_specs(config), cfg, bundle, workers=config.workers)
    recorder.count("label_matrix_rows", matrix.shape[0])

    gold = load_gold_labels(config)
    with recorder.stage("aggregate"):
        labels, model, metadata = aggregate(config, matrix, records, gold)
        if config.label_model.apply_rules:
            labels = label_model.apply_rule_overrides(labels, records)

    out = config.output_dir
    artifacts.save_label_matrix(matrix, artifacts.artifact_path(out, "label_matrix"))
    artifacts.save_labels(labels, artifacts.artifact_path(out, "labels"))
    artifacts.save_model(config.label_model.method, model, metadata, artifacts.artifact_path(out, "model"))
    recorder.count("labels", len(labels))
    recorder.count("labels_success", sum(1 for p in labels if p.hard_label == WeakLabel.SUCCESS))
    recorder.produced("label_matrix", "labels", "model")
    return matrix, labels


def run_evaluate(config: RunConfig, recorder: ManifestRecorder) -> MetricsReport:
    """Concordância dos rótulos com o ouro, por fase e no total."""
    gold = load_gold_labels(config, required=True)
    records = selected_trials(config, recorder)
    path = _require_or_inline(config, "labels")
    if path is None:
        matrix, labels = run_label(config, recorder)
    else:
        labels = artifacts.load_labels(path)
        matrix = artifacts.load_label_matrix(artifacts.require_artifact(config.output_dir, "label_matrix"))

    with recorder.stage("evaluate"):
        report = evaluation.build_report(
            labels,
            records,
            gold,
            matrix=matrix,
            all_mode=config.evaluation.all_mode,
            phase=config.evaluation.phase,
            metadata={
                "config_digest": config.digest(),
                "method": config.label_model.method,
                "seed": str(config.seed),
                "phase": config.evaluation.phase,
                "all_mode": config.evaluation.all_mode,
            },
        )
    evaluation.save_report(report, artifacts.artifact_path(config.output_dir, "metrics"))
    evaluation.emit_report(report, config.output_dir)
    recorder.count("evaluated", report.phases["all"].n)
    recorder.produced("metrics")
    return report


def run_report(config: RunConfig, recorder: ManifestRecorder) -> MetricsReport:
    """Regrava report.csv, agreement.csv e summary.txt a partir de metrics.json, sem recalcular."""
    report = evaluation.load_report(artifacts.require_artifact(config.output_dir, "metrics"))
    evaluation.emit_report(report, config.output_dir)
    return report
