"""Testes dos adaptadores de arquivos de sinais."""

from datetime import date

import pytest

from app.exceptions import CorruptInputError, SchemaError
from app.models.schemas import Sentiment, WeakLabel
from app.services.signals import (
    build_signal_bundle,
    load_gold,
    load_llm_decisions,
    load_news,
    load_orange_book,
    load_stock_series,
    load_ticker_map,
)
from tests.conftest import make_trial


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_news_rows_validated(tmp_path):
    path = write(
        tmp_path / "news.csv",
        "nct_id,headline,sentiment,confidence\n"
        "NCT1,good,positive,0.9\n"
        "NCT1,bad,NEGATIVE,0.8\n"
        "NCT2,odd,ecstatic,0.5\n",
    )
    result = load_news(path)
    assert [r.sentiment for r in result.records] == [Sentiment.POSITIVE, Sentiment.NEGATIVE]
    assert result.skipped == 1
    assert "news.csv:4" in result.warnings[0]


def test_mostly_invalid_file_is_corrupt(tmp_path):
    path = write(
        tmp_path / "news.csv",
        "nct_id,headline,sentiment,confidence\nNCT1,a,positive,2.0\nNCT2,b,x,0.1\nNCT3,c,neutral,0.3\n",
    )
    with pytest.raises(CorruptInputError):
        load_news(path)


def test_missing_column_is_schema_error(tmp_path):
    path = write(tmp_path / "news.csv", "nct_id,headline\nNCT1,a\n")
    with pytest.raises(SchemaError) as excinfo:
        load_news(path)
    assert excinfo.value.column == "sentiment"


def test_stock_series_sorted_and_deduplicated(tmp_path):
    path = write(
        tmp_path / "stock.csv",
        "ticker,date,close\nZZZ,2020-01-03,3\nAAA,2020-01-02,1\nZZZ,2020-01-01,2\nZZZ,2020-01-03,9\n",
    )
    result = load_stock_series(path)
    assert [s.ticker for s in result.records] == ["AAA", "ZZZ"]
    zzz = result.records[1]
    assert [o.date for o in zzz.observations] == [date(2020, 1, 1), date(2020, 1, 3)]
    assert zzz.observations[1].close == 3.0
    assert any("repetida" in w for w in result.warnings)


def test_ticker_map_drops_ambiguous_trials(tmp_path):
    path = write(tmp_path / "map.csv", "nct_id,ticker\nNCT1,AAA\nNCT2,BBB\nNCT2,CCC\n")
    mapping, warnings = load_ticker_map(path)
    assert mapping == {"NCT1": "AAA"}
    assert len(warnings) == 1


def test_orange_book_and_llm_decisions(tmp_path):
    book = load_orange_book(write(tmp_path / "ob.csv", "generic_name,approval_date\n aspirin ,2019-02-03\n"))
    assert book.records[0].drug_generic_name == "aspirin"
    assert book.records[0].approval_date == date(2019, 2, 3)

    decisions = load_llm_decisions(write(tmp_path / "llm.csv", "nct_id,decision\nNCT1,1\nNCT2,-1\n"))
    assert [(d.nct_id, d.decision) for d in decisions.records] == [
        ("NCT1", WeakLabel.SUCCESS),
        ("NCT2", WeakLabel.ABSTAIN),
    ]


def test_gold_rejects_abstain_and_defaults_provenance(tmp_path):
    path = write(tmp_path / "gold.csv", "nct_id,label\nNCT1,1\nNCT2,0\nNCT3,-1\n")
    gold = load_gold(path)
    assert len(gold) == 2
    assert gold.get("NCT1") == WeakLabel.SUCCESS
    assert gold.provenance["NCT2"] == "gold"
    assert "NCT3" not in gold


def test_signal_bundle_combines_sources(tmp_path):
    news = write(tmp_path / "news.csv", "nct_id,headline,sentiment,confidence\nNCT1,x,positive,0.9\n")
    stock = write(
        tmp_path / "stock.csv",
        "ticker,date,close\n" + "".join(f"AAA,2020-01-{d:02d},{100 + d}\n" for d in range(1, 25)),
    )
    ticker_map = write(tmp_path / "map.csv", "nct_id,ticker\nNCT1,AAA\n")
    trials = [make_trial("NCT1", completion_date=date(2020, 1, 10)), make_trial("NCT2")]

    bundle = build_signal_bundle(
        trials, news=news, stock=stock, ticker_map=ticker_map, linkage_labels={"NCT2": WeakLabel.FAILURE}, workers=2
    )
    assert len(bundle.news_by_trial["NCT1"]) == 1
    assert bundle.stock_slopes["NCT1"] == pytest.approx(1.0)
    assert bundle.stock_slopes.get("NCT2") is None
    assert bundle.linkage_labels == {"NCT2": WeakLabel.FAILURE}
    assert bundle.llm_decisions == {}
