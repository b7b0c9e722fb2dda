"""Agregador supervisionado: floresta aleatória sobre as saídas das funções de rotulagem."""

import logging
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np
from sklearn.ensemble import RandomForestClassifier

from app.exceptions import FitError, NotFittedError
from app.models.labeling import ForestModel, LabelMatrix, PosteriorLabel, RandomForestAggregator, TreeStructure, hard_label_for
from app.models.schemas import GoldLabelSet, TrialPhase, WeakLabel

logger = logging.getLogger(__name__)

MIN_GOLD_ROWS = 30
ALL_GROUP = "all"
OTHER_GROUP = "other"

LEAF = -1


def feature_names_for(lf_names: Sequence[str]) -> List[str]:
    """Colunas das funções seguidas da fase em one-hot."""
    return list(lf_names) + [f"phase={phase.value}" for phase in TrialPhase]


def build_features(matrix: LabelMatrix, phases: Mapping[str, TrialPhase], lf_names: Sequence[str]) -> np.ndarray:
    """Votos (-1/0/1) nas colunas de `lf_names` e indicadores de fase."""
    missing = [name for name in lf_names if name not in matrix.lf_names]
    if missing:
        raise NotFittedError(f"matriz sem as colunas usadas no ajuste: {', '.join(missing)}")
    votes = np.column_stack([matrix.column(name) for name in lf_names]).astype(float) if lf_names else np.zeros((len(matrix.trial_ids), 0))
    members = list(TrialPhase)
    one_hot = np.zeros((len(matrix.trial_ids), len(members)))
    for i, nct_id in enumerate(matrix.trial_ids):
        phase = phases.get(nct_id, TrialPhase.UNKNOWN)
        one_hot[i, members.index(phase)] = 1.0
    return np.hstack([votes, one_hot])


def export_tree(estimator, classes: np.ndarray) -> TreeStructure:
    """Arrays de nós de uma árvore do sklearn; a classe da folha é o voto majoritário do nó."""
    tree = estimator.tree_
    leaf_class = [int(classes[int(np.argmax(tree.value[node][0]))]) for node in range(tree.node_count)]
    return TreeStructure(
        children_left=[int(v) for v in tree.children_left],
        children_right=[int(v) for v in tree.children_right],
        feature=[int(v) for v in tree.feature],
        threshold=[float(v) for v in tree.threshold],
        leaf_class=leaf_class,
    )


def predict_tree(tree: TreeStructure, x: np.ndarray) -> int:
    node = 0
    while tree.children_left[node] != LEAF:
        if x[tree.feature[node]] <= tree.threshold[node]:
            node = tree.children_left[node]
        else:
            node = tree.children_right[node]
    return tree.leaf_class[node]


def _fit_forest(
    features: np.ndarray, y: np.ndarray, n_trees: int, max_depth: Optional[int], seed: int, group: str
) -> ForestModel:
    if len(y) < MIN_GOLD_ROWS:
        raise FitError(f"floresta do grupo '{group}' exige ao menos {MIN_GOLD_ROWS} rótulos ouro; encontrados {len(y)}")
    if len(np.unique(y)) < 2:
        raise FitError(f"rótulos ouro do grupo '{group}' têm uma única classe")
    rf = RandomForestClassifier(
        n_estimators=n_trees,
        criterion="gini",
        max_depth=max_depth,
        max_features="sqrt",
        bootstrap=True,
        random_state=seed,
        n_jobs=1,
    )
    rf.fit(features, y)
    return ForestModel(trees=[export_tree(estimator, rf.classes_) for estimator in rf.estimators_])


def fit_random_forest(
    matrix: LabelMatrix,
    phases: Mapping[str, TrialPhase],
    gold: GoldLabelSet,
    n_trees: int = 100,
    max_depth: Optional[int] = None,
    seed: int = 0,
    phase_wise: bool = False,
) -> RandomForestAggregator:
    """
    Ajusta a floresta nas linhas com rótulo ouro.

    No modo por fase, cada grupo com ao menos 30 linhas ouro ganha sua própria floresta;
    grupos menores usam a floresta agregada (com aviso).

    Raises:
        FitError: ouro insuficiente ou de classe única (a mensagem nomeia o grupo)
    """
    lf_names = list(matrix.lf_names)
    features = build_features(matrix, phases, lf_names)
    rows = [i for i, nct_id in enumerate(matrix.trial_ids) if nct_id in gold]
    y = np.array([int(gold.get(matrix.trial_ids[i])) for i in rows], dtype=int)

    forests: Dict[str, ForestModel] = {
        ALL_GROUP: _fit_forest(features[rows], y, n_trees, max_depth, seed, ALL_GROUP)
    }
    if phase_wise:
        by_group: Dict[str, List[int]] = {}
        for position, i in enumerate(rows):
            group = phases.get(matrix.trial_ids[i], TrialPhase.UNKNOWN).group or OTHER_GROUP
            by_group.setdefault(group, []).append(position)
        for group, positions in sorted(by_group.items()):
            if len(positions) < MIN_GOLD_ROWS:
                logger.warning(
                    f"grupo de fase {group}: {len(positions)} rótulos ouro; usando a floresta agregada"
                )
                continue
            subset = [rows[p] for p in positions]
            forests[group] = _fit_forest(features[subset], y[positions], n_trees, max_depth, seed, group)

    logger.info(f"florestas ajustadas: {', '.join(sorted(forests))} ({n_trees} árvores cada)")
    return RandomForestAggregator(
        n_trees=n_trees,
        max_depth=max_depth,
        seed=seed,
        phase_wise=phase_wise,
        feature_names=feature_names_for(lf_names),
        lf_names=lf_names,
        forests=forests,
    )


def predict_random_forest(
    model: RandomForestAggregator, matrix: LabelMatrix, phases: Mapping[str, TrialPhase]
) -> List[PosteriorLabel]:
    """p = fração das árvores que votam SUCCESS."""
    if not model.fitted:
        raise NotFittedError("floresta aleatória não ajustada")
    features = build_features(matrix, phases, model.lf_names)
    labels = []
    for i, nct_id in enumerate(matrix.trial_ids):
        group = phases.get(nct_id, TrialPhase.UNKNOWN).group or OTHER_GROUP
        forest = model.forests.get(group) if model.phase_wise else None
        forest = forest or model.forests[ALL_GROUP]
        votes = [predict_tree(tree, features[i]) for tree in forest.trees]
        p = sum(1 for v in votes if v == int(WeakLabel.SUCCESS)) / len(votes)
        labels.append(PosteriorLabel(nct_id=nct_id, p_success=p, hard_label=hard_label_for(p), source="rf"))
    return labels
