"""Evaluation rubric: eight criteria in four categories, each judged 1-3.

Three criteria are scored mechanically from extracted data:

* ``1.B`` budget adaptation (prices or cost tips present),
* ``3.B`` snack inclusion (snack coverage over the week),
* ``4.A`` meal variety, ranked across units by distinct meal count.

The rest are captured from a human rater.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from enum import Enum, IntEnum
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Union

from .extractors import ShoppingList

__all__ = [
    "CRITERIA",
    "Category",
    "Criterion",
    "IncompleteCard",
    "Judgment",
    "JudgmentExists",
    "Level",
    "Mode",
    "ModeError",
    "ScoreCard",
    "apply_manual",
    "category_score",
    "judge_budget_adaptation",
    "judge_counting",
    "judge_snack_inclusion",
    "load_manual_judgments",
    "pending_card",
    "rate_interactively",
    "record_manual_judgment",
    "rubric_definition",
    "total_score",
]


class Category(str, Enum):
    UNDERSTANDING_INTENTIONS = "UnderstandingIntentions"
    INTERPRETABILITY = "Interpretability"
    COMPLETENESS = "Completeness"
    CREATIVITY = "Creativity"


class Mode(str, Enum):
    MANUAL = "manual"
    AUTO = "auto"
    COUNTING = "counting"


class Level(IntEnum):
    NOT_MET = 1
    PARTIALLY_MET = 2
    FULLY_MET = 3

    @property
    def label(self) -> str:
        return {1: "not met", 2: "partially met", 3: "fully met"}[self.value]


@dataclass(frozen=True)
class Criterion:
    code: str
    name: str
    category: Category
    description: str
    mode: Mode


CRITERIA: dict[str, Criterion] = {
    c.code: c
    for c in (
        Criterion(
            "1.A", "Understanding user goals", Category.UNDERSTANDING_INTENTIONS,
            "The reply targets the main request: the stated diet, fitness goal and budget.",
            Mode.MANUAL,
        ),
        Criterion(
            "1.B", "Budget adaptation", Category.UNDERSTANDING_INTENTIONS,
            "Cost is handled explicitly, by item prices or by money-saving advice.",
            Mode.AUTO,
        ),
        Criterion(
            "2.A", "Structure and coherence", Category.INTERPRETABILITY,
            "The reply is organized in an order that is easy to follow.",
            Mode.MANUAL,
        ),
        Criterion(
            "2.B", "Support for informed decisions", Category.INTERPRETABILITY,
            "Nutritional information helps the user understand each choice.",
            Mode.MANUAL,
        ),
        Criterion(
            "3.A", "Coverage of needs", Category.COMPLETENESS,
            "Every day has its main meals and snacks with nothing important left out.",
            Mode.MANUAL,
        ),
        Criterion(
            "3.B", "Daily meal and snack inclusion", Category.COMPLETENESS,
            "Breakfast, lunch, dinner and snacks are present for each day.",
            Mode.AUTO,
        ),
        Criterion(
            "4.A", "Meal variety", Category.CREATIVITY,
            "Number of distinct meals proposed, ranked against the other units.",
            Mode.COUNTING,
        ),
        Criterion(
            "4.B", "Adaptability of the plan", Category.CREATIVITY,
            "Substitutions or variations are offered so the plan can be adjusted.",
            Mode.MANUAL,
        ),
    )
}

CODES = tuple(CRITERIA)
SOURCES = ("manual", "auto", "counting", "pending")


class ModeError(ValueError):
    """A manual judgment was given for a mechanically scored criterion."""


class JudgmentExists(ValueError):
    """A judgment is already recorded and overwrite was not requested."""


class IncompleteCard(ValueError):
    def __init__(self, unit: str, missing: Iterable[str]):
        self.unit = unit
        self.missing = sorted(missing)
        super().__init__(f"score card {unit!r} is missing {', '.join(self.missing)}")


@dataclass(frozen=True)
class Judgment:
    level: Level | None
    rationale: str = ""
    source: str = "manual"
    unresolved: bool = False

    def __post_init__(self) -> None:
        if self.source not in SOURCES:
            raise ValueError(f"unknown judgment source {self.source!r}")
        if self.level is None:
            if self.source != "pending":
                raise ValueError("only pending judgments may lack a level")
        else:
            object.__setattr__(self, "level", Level(self.level))

    @property
    def pending(self) -> bool:
        return self.level is None

    @property
    def value(self) -> int:
        if self.level is None:
            raise ValueError("pending judgment has no value")
        return int(self.level)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "level": None if self.level is None else int(self.level),
            "rationale": self.rationale,
            "source": self.source,
        }
        if self.unresolved:
            out["unresolved"] = True
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> Judgment:
        return cls(
            level=data.get("level"),
            rationale=data.get("rationale", ""),
            source=data.get("source", "manual"),
            unresolved=bool(data.get("unresolved", False)),
        )


PENDING = Judgment(None, "", "pending")


@dataclass(frozen=True)
class ScoreCard:
    unit: str
    judgments: Mapping[str, Judgment] = field(default_factory=dict)

    def __post_init__(self) -> None:
        unknown = set(self.judgments) - set(CODES)
        if unknown:
            raise ValueError(f"unknown criteria: {', '.join(sorted(unknown))}")
        object.__setattr__(self, "judgments", {c: self.judgments[c] for c in CODES if c in self.judgments})

    @property
    def missing(self) -> list[str]:
        return [c for c in CODES if c not in self.judgments or self.judgments[c].pending]

    @property
    def complete(self) -> bool:
        return not self.missing

    def level(self, code: str) -> int:
        return self.judgments[code].value

    def with_judgment(self, code: str, judgment: Judgment) -> ScoreCard:
        return replace(self, judgments={**self.judgments, code: judgment})

    def to_dict(self) -> dict[str, Any]:
        return {"unit": self.unit, "judgments": {c: j.to_dict() for c, j in self.judgments.items()}}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> ScoreCard:
        return cls(
            unit=data["unit"],
            judgments={c: Judgment.from_dict(j) for c, j in data.get("judgments", {}).items()},
        )

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> ScoreCard:
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def pending_card(unit: str) -> ScoreCard:
    """A card with every manual criterion marked pending."""
    return ScoreCard(unit, {c: PENDING for c, crit in CRITERIA.items() if crit.mode is Mode.MANUAL})


# ---------------------------------------------------------------------------
# mechanical judges


def judge_counting(counts: Mapping[str, int]) -> dict[str, Judgment]:
    """Rank units by count: the highest fully meets, the lowest does not.

    Units sharing a count share a judgment; counts strictly between the
    extremes partially meet. When all counts are equal every unit fully meets.
    """
    if not counts:
        raise ValueError("need at least one unit")
    top, bottom = max(counts.values()), min(counts.values())
    out = {}
    for unit, n in counts.items():
        if n == top:
            level = Level.FULLY_MET
        elif n == bottom:
            level = Level.NOT_MET
        else:
            level = Level.PARTIALLY_MET
        out[unit] = Judgment(level, f"count {n} (range {bottom}-{top})", "counting")
    return out


def judge_snack_inclusion(coverage: tuple[int, int]) -> Judgment:
    days, menus = coverage
    if not 0 <= days <= 5:
        raise ValueError(f"days with snacks must be in 0..5, got {days}")
    if days == 5 and menus >= 2:
        level = Level.FULLY_MET
    elif days >= 1:
        level = Level.PARTIALLY_MET
    else:
        level = Level.NOT_MET
    return Judgment(level, f"snacks on {days}/5 days, {menus} distinct", "auto")


_BUDGET_WORDS = re.compile(r"\bbudget\b|\$\s?\d|\bdollars?\b|\bcost\b|\bafford", re.IGNORECASE)


def judge_budget_adaptation(shopping: ShoppingList | None, plan_text: str) -> Judgment:
    priced = len(shopping.priced) if shopping else 0
    tips = len(shopping.tips) if shopping else 0
    if priced or tips:
        return Judgment(Level.FULLY_MET, f"{priced} priced items, {tips} cost tips", "auto")
    if _BUDGET_WORDS.search(plan_text or ""):
        return Judgment(Level.PARTIALLY_MET, "budget mentioned without prices or tips", "auto")
    return Judgment(Level.NOT_MET, "no budget treatment", "auto")


# ---------------------------------------------------------------------------
# manual judgments


def record_manual_judgment(
    card: ScoreCard,
    code: str,
    level: Union[Level, int],
    rationale: str,
    *,
    overwrite: bool = False,
    override_mode: bool = False,
    unresolved: bool = False,
) -> ScoreCard:
    if code not in CRITERIA:
        raise KeyError(f"unknown criterion {code!r}")
    if not rationale or not rationale.strip():
        raise ValueError("a manual judgment needs a rationale")
    crit = CRITERIA[code]
    if crit.mode is not Mode.MANUAL and not override_mode:
        raise ModeError(f"{code} is scored by {crit.mode.value}; pass override_mode to set it by hand")
    existing = card.judgments.get(code)
    if existing is not None and not existing.pending and not overwrite:
        raise JudgmentExists(f"{code} already judged for unit {card.unit!r}")
    return card.with_judgment(code, Judgment(Level(level), rationale.strip(), "manual", unresolved))


def load_manual_judgments(path: Union[str, Path]) -> dict[str, dict[str, Judgment]]:
    """Read ``{unit: {code: {level, rationale[, unresolved]}}}``."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    data = data.get("units", data)
    return {
        unit: {code: Judgment.from_dict({"source": "manual", **j}) for code, j in codes.items()}
        for unit, codes in data.items()
    }


def apply_manual(card: ScoreCard, judgments: Mapping[str, Judgment]) -> ScoreCard:
    for code, j in judgments.items():
        if j.pending:
            continue
        card = record_manual_judgment(
            card, code, j.level, j.rationale or "recorded", overwrite=True, unresolved=j.unresolved
        )
    return card


def rate_interactively(
    card: ScoreCard,
    response_text: str,
    *,
    ask: Callable[[str], str] | None = None,
    say: Callable[[str], None] | None = None,
) -> ScoreCard:
    """Terminal questionnaire over the card's pending manual criteria."""
    ask = ask or input
    say = say or print
    say(f"=== unit {card.unit} ===")
    say(response_text)
    for code in card.missing:
        crit = CRITERIA[code]
        if crit.mode is not Mode.MANUAL:
            continue
        say(f"\n[{code}] {crit.name}: {crit.description}")
        while True:
            raw = ask("level (1=not met, 2=partially, 3=fully, blank=skip): ").strip()
            if not raw:
                break
            if raw in ("1", "2", "3"):
                rationale = ""
                while not rationale.strip():
                    rationale = ask("rationale: ")
                card = record_manual_judgment(card, code, int(raw), rationale, overwrite=True)
                break
            say("please answer 1, 2 or 3")
    return card


# ---------------------------------------------------------------------------
# aggregation


def category_score(card: ScoreCard, category: Union[Category, str]) -> int:
    category = Category(category)
    codes = [c for c, crit in CRITERIA.items() if crit.category is category]
    missing = [c for c in codes if c in card.missing]
    if missing:
        raise IncompleteCard(card.unit, missing)
    return sum(card.level(c) for c in codes)


def total_score(card: ScoreCard) -> int:
    if card.missing:
        raise IncompleteCard(card.unit, card.missing)
    return sum(category_score(card, cat) for cat in Category)


def rubric_definition() -> dict[str, Any]:
    return {
        "levels": {str(int(l)): l.label for l in Level},
        "categories": [c.value for c in Category],
        "criteria": [
            {
                "code": c.code,
                "name": c.name,
                "category": c.category.value,
                "description": c.description,
                "mode": c.mode.value,
            }
            for c in CRITERIA.values()
        ],
    }
