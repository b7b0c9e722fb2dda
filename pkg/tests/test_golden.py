"""Artefatos do pacote pequeno comparados byte a byte com os arquivos calculados à mão."""

import json
import shutil
from pathlib import Path

import pytest

from tests.test_cli import invoke, run_all

GOLDEN = Path(__file__).parent / "golden"

COMPARED = {
    "linkage_edges.csv": "linkage_edges.csv",
    "fda_matches.csv": "fda_matches.csv",
    "linkage_labels.csv": "linkage_labels.csv",
    "label_matrix.csv": "label_matrix.csv",
    "labels.csv": "labels_mv.csv",
    "report.csv": "report.csv",
    "agreement.csv": "agreement.csv",
}


@pytest.fixture
def golden_bundle(tmp_path):
    bundle = tmp_path / "bundle"
    shutil.copytree(GOLDEN / "bundle", bundle)
    return bundle


@pytest.mark.parametrize("produced, expected", sorted(COMPARED.items()))
def test_artifact_matches_golden(golden_bundle, produced, expected):
    run_all(golden_bundle / "config.json")
    out = golden_bundle / "out"
    assert (out / produced).read_bytes() == (GOLDEN / "expected" / expected).read_bytes()


def test_rule_decided_labels_match_golden(golden_bundle):
    config = golden_bundle / "config.json"
    raw = json.loads(config.read_text(encoding="utf-8"))
    raw["label_model"] = {"method": "dp", "apply_rules": True}
    config.write_text(json.dumps(raw), encoding="utf-8")

    result = invoke("--config", config, "label")
    assert result.exit_code == 0, result.output
    produced = (golden_bundle / "out" / "labels.csv").read_bytes()
    assert produced == (GOLDEN / "expected" / "labels_dp.csv").read_bytes()
