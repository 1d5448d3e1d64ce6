from __future__ import annotations

import csv
import io
import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pce.reporting import (
    DuplicateUnit,
    build_report,
    emit_chart,
    export,
    format_ranking,
    load_report,
)
from pce.rubric import CODES, Category, IncompleteCard, Judgment, ScoreCard, pending_card


def card(unit: str, level: int, **extra: int) -> ScoreCard:
    levels = dict.fromkeys(CODES, level)
    levels.update({k.replace("_", "."): v for k, v in extra.items()})
    return ScoreCard(unit, {c: Judgment(v, "x") for c, v in levels.items()})


def bars(svg: str) -> list[tuple[str, str, int, float]]:
    out = []
    for m in re.finditer(r'<rect class="bar" data-group="([^"]+)" data-series="([^"]+)" data-value="(\d+)"[^>]*height="([\d.]+)"', svg):
        out.append((m.group(1), m.group(2), int(m.group(3)), float(m.group(4))))
    return out


# --- report construction -------------------------------------------------------------------


def test_reference_cards_report(reference_cards):
    report = build_report(reference_cards)
    assert report.totals == {"A": 16, "B": 21, "C": 21}
    assert list(report.ranking) == [("B", 1), ("C", 1), ("A", 3)]
    assert format_ranking(report) == "B=C > A"
    assert report.per_criterion["B"]["4.A"] == 3
    assert report.per_criterion["A"]["4.A"] == 1


def test_totals_consistent_with_tables(reference_cards):
    report = build_report(reference_cards)
    for unit in report.units:
        assert report.totals[unit] == sum(report.per_criterion[unit].values())
        assert report.totals[unit] == sum(report.per_category[unit].values())


def test_single_card():
    report = build_report([card("X", 2)])
    assert report.ranking == (("X", 1),)
    assert format_ranking(report) == "X"


def test_equal_totals_share_first_rank():
    report = build_report([card("X", 2), card("Y", 2)])
    assert report.rank_of("X") == report.rank_of("Y") == 1


def test_invalid_inputs():
    with pytest.raises(ValueError):
        build_report([])
    with pytest.raises(DuplicateUnit):
        build_report([card("X", 1), card("X", 2)])
    with pytest.raises(IncompleteCard):
        build_report([card("X", 1), pending_card("Y")])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(1, 3), min_size=1, max_size=6))
def test_rank_monotonicity(levels):
    cards = [card(f"U{i}", 1, **{"1_A": lv}) for i, lv in enumerate(levels)]
    report = build_report(cards)
    for u in report.units:
        for v in report.units:
            if report.totals[u] > report.totals[v]:
                assert report.rank_of(u) < report.rank_of(v)
            if report.totals[u] == report.totals[v]:
                assert report.rank_of(u) == report.rank_of(v)


# --- charts ----------------------------------------------------------------------------------


def test_overall_chart(reference_cards, tmp_path):
    report = build_report(reference_cards)
    path = tmp_path / "overall.svg"
    svg = emit_chart(report, "overall", path)
    assert path.read_text(encoding="utf-8") == svg
    assert svg.startswith('<?xml version="1.0"') and 'version="1.1"' in svg
    found = {group: (value, height) for group, _, value, height in bars(svg)}
    assert set(found) == {"A", "B", "C"}
    assert found["B"] == found["C"]
    assert found["A"][1] < found["B"][1]
    assert found["A"][0] == 16


def test_category_chart_structure(reference_cards):
    report = build_report(reference_cards)
    found = bars(emit_chart(report, Category.CREATIVITY))
    assert len(found) == 6
    assert {g for g, _, _, _ in found} == {"4.A", "4.B"}
    assert {s for _, s, _, _ in found} == {"A", "B", "C"}


def test_chart_is_deterministic(reference_cards):
    a = emit_chart(build_report(reference_cards), "Completeness")
    b = emit_chart(build_report(reference_cards), "Completeness")
    assert a == b


def test_chart_unknown_scope(reference_cards):
    with pytest.raises(ValueError):
        emit_chart(build_report(reference_cards), "Style")


# --- exports -------------------------------------------------------------------------------------


def test_json_round_trip(reference_cards, tmp_path):
    report = build_report(reference_cards)
    assert load_report(export(report, "json", tmp_path / "r.json")) == report


def test_csv_layout(reference_cards, tmp_path):
    report = build_report(reference_cards)
    raw = export(report, "csv", tmp_path / "r.csv").read_bytes()
    assert b"\r\n" in raw
    rows = list(csv.reader(io.StringIO(raw.decode("utf-8"))))
    assert rows[0] == ["unit", "criterion", "category", "level", "unit_total"]
    assert len(rows) == 1 + 3 * 8
    assert ["B", "4.A", "Creativity", "3", "21"] in rows


def test_unknown_export_format(reference_cards, tmp_path):
    with pytest.raises(ValueError):
        export(build_report(reference_cards), "xml", tmp_path / "r.xml")
