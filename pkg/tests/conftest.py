"""Fábricas compartilhadas pelos testes: ensaios, matrizes sintéticas e o pacote de ~60 ensaios."""

import csv
import json
from datetime import date, timedelta
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np
import pytest

from app.models.labeling import LabelMatrix
from app.models.schemas import GoldLabelSet, TrialMetrics, TrialPhase, TrialRecord, TrialStatus, WeakLabel
from app.services.trials import CANONICAL_COLUMNS


def make_trial(
    nct_id: str = "NCT00000001",
    phase: TrialPhase = TrialPhase.PHASE_2,
    status: TrialStatus = TrialStatus.COMPLETED,
    **fields,
) -> TrialRecord:
    """Ensaio mínimo; métricas podem ser passadas direto como kwargs (num_patients=...)."""
    metric_names = set(TrialMetrics.model_fields)
    metrics = {k: fields.pop(k) for k in list(fields) if k in metric_names}
    fields.setdefault("intervention_types", frozenset({"Drug"}))
    return TrialRecord(
        nct_id=nct_id,
        phase=phase,
        status=status,
        metrics=TrialMetrics(**metrics),
        **fields,
    )


def make_gold(labels: Dict[str, int]) -> GoldLabelSet:
    return GoldLabelSet(labels={k: WeakLabel(v) for k, v in labels.items()})


def synthetic_votes(
    n: int,
    accuracies: Sequence[float],
    coverages: Sequence[float],
    class_balance: float = 0.5,
    seed: int = 0,
) -> Tuple[LabelMatrix, np.ndarray]:
    """
    Matriz gerada com independência condicional dado Y: cada função vota com
    probabilidade `coverage` e acerta com probabilidade `accuracy`.
    """
    rng = np.random.default_rng(seed)
    y = (rng.random(n) < class_balance).astype(int)
    columns = []
    for accuracy, coverage in zip(accuracies, coverages):
        votes = rng.random(n) < coverage
        correct = rng.random(n) < accuracy
        column = np.where(correct, y, 1 - y)
        columns.append(np.where(votes, column, int(WeakLabel.ABSTAIN)))
    values = np.column_stack(columns)
    ids = tuple(f"NCT{i:08d}" for i in range(n))
    names = tuple(f"lf_{j}" for j in range(len(accuracies)))
    return LabelMatrix(ids, names, values), y


@pytest.fixture(autouse=True)
def _clean_environment(monkeypatch):
    for name in ("CTO_CONFIG", "CTO_SEED", "CTO_WORKERS", "CTO_OUT", "CTO_LOG_LEVEL"):
        monkeypatch.delenv(name, raising=False)


# ============================================================================
# Pacote de fixtures (~60 ensaios, sinais, ouro e configuração)
# ============================================================================

_PHASE_CYCLE = (
    TrialPhase.PHASE_1,
    TrialPhase.PHASE_2,
    TrialPhase.PHASE_3,
    TrialPhase.PHASE_4,
    TrialPhase.PHASE_2_3,
)
_DRUGS = ("alphamab", "betanib", "cetuximod", "doravir", "elotrazine", "fexolimab")
_CONDITIONS = ("asthma", "melanoma", "psoriasis", "hepatitis", "gout", "migraine")


def _write_csv(path: Path, header: Sequence[str], rows: List[Sequence]) -> Path:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def write_fixture_bundle(root: Path, seed: int = 7, config_overrides: Dict = None) -> Path:
    """
    Grava trials.csv, news.csv, orangebook.csv, gold.csv e config.json em `root`
    e devolve o caminho da configuração.
    """
    rng = np.random.default_rng(seed)
    root.mkdir(parents=True, exist_ok=True)
    rows, gold, news = [], [], []
    for i in range(60):
        nct_id = f"NCT{10000000 + i}"
        program = i // 5
        drug = _DRUGS[program % len(_DRUGS)]
        condition = _CONDITIONS[program % len(_CONDITIONS)]
        phase = _PHASE_CYCLE[i % len(_PHASE_CYCLE)]
        y = int(rng.random() < 0.55)
        start = date(2012, 1, 1) + timedelta(days=37 * i)
        completion = start + timedelta(days=700 + 10 * i)
        status = "Completed" if y or rng.random() < 0.6 else "Terminated"
        row = {
            "nct_id": nct_id,
            "phase": phase.value,
            "status": status,
            "start_date": start.isoformat(),
            "completion_date": completion.isoformat(),
            "last_update_date": (completion + timedelta(days=int(rng.integers(30, 900)))).isoformat(),
            "intervention_types": "Drug",
            "intervention_names": drug,
            "conditions": condition,
            "official_title": f"A study of {drug} in patients with {condition}",
            "brief_summary": f"{drug} efficacy and safety in {condition} cohort {program}",
            "eligibility_criteria": f"adults diagnosed with {condition}",
            "lead_sponsor": f"Sponsor {program}",
            "results_reported": "true" if (y and rng.random() < 0.8) or rng.random() < 0.2 else "false",
            "has_significant_pvalue": ("true" if y else "false") if rng.random() < 0.5 else "",
            "num_sponsors": str(int(rng.integers(1, 4)) + y),
            "num_patients": str(int(rng.integers(20, 200)) + 150 * y),
            "patient_drop": str(int(rng.integers(0, 30)) + 25 * (1 - y)),
            "num_sites": str(int(rng.integers(1, 20)) + 10 * y),
            "deaths": str(int(rng.integers(0, 4)) + 3 * (1 - y)),
            "serious_adverse_events": str(int(rng.integers(0, 10)) + 5 * (1 - y)),
            "all_adverse_events": str(int(rng.integers(5, 60))),
            "num_amendments": str(int(rng.integers(0, 5))),
            "update_lag_days": "",
        }
        rows.append([row.get(name, "") for name in CANONICAL_COLUMNS])
        gold.append([nct_id, y, "TOP"])
        if i % 3 == 0:
            sentiment = "positive" if y else "negative"
            news.append([nct_id, f"{drug} update", sentiment, "0.9"])
            news.append([nct_id, f"{drug} trial news", sentiment, "0.7"])

    # Ensaios excluídos pela seleção
    excluded = {name: "" for name in CANONICAL_COLUMNS}
    excluded.update(nct_id="NCT20000001", phase="Phase 2", status="Recruiting", intervention_types="Drug")
    rows.append([excluded[name] for name in CANONICAL_COLUMNS])
    excluded.update(nct_id="NCT20000002", status="Completed", intervention_types="Device")
    rows.append([excluded[name] for name in CANONICAL_COLUMNS])

    _write_csv(root / "trials.csv", CANONICAL_COLUMNS, rows)
    _write_csv(root / "gold.csv", ["nct_id", "label", "provenance"], gold)
    _write_csv(root / "news.csv", ["nct_id", "headline", "sentiment", "confidence"], news)
    _write_csv(
        root / "orangebook.csv",
        ["generic_name", "approval_date"],
        [["betanib", "2019-06-01"], ["doravir", "2021-03-15"], ["unrelatedol", "2020-01-01"]],
    )

    config = {
        "inputs": {
            "trials": "trials.csv",
            "news": "news.csv",
            "orange_book": "orangebook.csv",
            "gold": "gold.csv",
        },
        "label_model": {"method": "dp"},
        "seed": 3,
        "output_dir": "out",
    }
    for key, value in (config_overrides or {}).items():
        config[key] = value
    path = root / "config.json"
    path.write_text(json.dumps(config, indent=2), encoding="utf-8")
    return path


@pytest.fixture
def fixture_bundle(tmp_path) -> Path:
    return write_fixture_bundle(tmp_path / "bundle")
