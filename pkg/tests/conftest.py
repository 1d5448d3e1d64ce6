from __future__ import annotations

import json
from pathlib import Path

import pytest

from pce.enhancer import load_intent_spec
from pce.experiment import DEFAULT_FIXTURES, DEFAULT_SPEC, REFERENCE_JUDGMENTS

GOLDEN = Path(__file__).parent / "golden"


def golden(name: str) -> str:
    return (GOLDEN / name).read_text(encoding="utf-8")


def fixture(unit: str) -> dict:
    return json.loads((DEFAULT_FIXTURES / f"unit_{unit.lower()}.json").read_text(encoding="utf-8"))


def final_reply(unit: str) -> str:
    return fixture(unit)["replies"][-1]


@pytest.fixture
def spec():
    return load_intent_spec(DEFAULT_SPEC)


@pytest.fixture
def judgments_path():
    return REFERENCE_JUDGMENTS


def build_reference_cards(overrides: dict | None = None):
    from pce.experiment import score_responses
    from pce.rubric import Judgment, load_manual_judgments

    manual = load_manual_judgments(REFERENCE_JUDGMENTS)
    for (unit, code), level in (overrides or {}).items():
        manual[unit][code] = Judgment(level, "override", "manual")
    return score_responses({u: final_reply(u) for u in "ABC"}, manual=manual)


@pytest.fixture(scope="session")
def reference_cards():
    return build_reference_cards()
