"""Pull meal plans and shopping lists out of markdown-ish model replies."""

from __future__ import annotations

import re
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from typing import Any, Iterable

__all__ = [
    "DAYS",
    "SLOTS",
    "ExtractionError",
    "LineItem",
    "MealEntry",
    "MealPlan",
    "Money",
    "ShoppingList",
    "count_distinct_meals",
    "extract_meal_plan",
    "extract_shopping_list",
    "normalize_description",
    "snack_coverage",
    "sum_prices",
    "total_matches",
]

DAYS = ("Monday", "Tuesday", "Wednesday", "Thursday", "Friday")
SLOTS = ("Breakfast", "Lunch", "Dinner", "Snacks")


class ExtractionError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Money:
    cents: int
    currency: str = "USD"

    def __post_init__(self) -> None:
        if self.cents < 0:
            raise ValueError("negative amount")

    @classmethod
    def parse(cls, text: str) -> Money:
        m = _MONEY.search(text)
        if not m:
            raise ExtractionError(f"no amount in {text!r}")
        if m.group("sym") != "$":
            raise ExtractionError(f"unsupported currency symbol {m.group('sym')!r}")
        try:
            amount = Decimal(m.group("amt").replace(",", ""))
        except InvalidOperation as exc:
            raise ExtractionError(f"bad amount in {text!r}") from exc
        return cls(int((amount * 100).to_integral_value()))

    def __add__(self, other: Money) -> Money:
        if other.currency != self.currency:
            raise ValueError("currency mismatch")
        return Money(self.cents + other.cents, self.currency)

    def __str__(self) -> str:
        whole, frac = divmod(self.cents, 100)
        return f"${whole}" if not frac else f"${whole}.{frac:02d}"

    def to_dict(self) -> dict[str, Any]:
        return {"cents": self.cents, "currency": self.currency}


_MONEY = re.compile(r"(?P<sym>[$€£¥])\s?(?P<amt>\d[\d,]*(?:\.\d{1,2})?)")


def normalize_description(text: str) -> str:
    return " ".join(text.split()).casefold()


@dataclass(frozen=True)
class MealEntry:
    day: str
    slot: str
    description: str
    notes: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.description.strip():
            raise ValueError("empty meal description")

    @property
    def key(self) -> str:
        return normalize_description(self.description)

    def to_dict(self) -> dict[str, Any]:
        return {"day": self.day, "slot": self.slot, "description": self.description, "notes": list(self.notes)}


@dataclass(frozen=True)
class MealPlan:
    entries: tuple[MealEntry, ...]
    layout: str  # "shared_block" | "per_day"

    def entry(self, day: str, slot: str) -> MealEntry | None:
        for e in self.entries:
            if e.day == day and e.slot == slot:
                return e
        return None

    def to_dict(self) -> dict[str, Any]:
        return {"layout": self.layout, "entries": [e.to_dict() for e in self.entries]}


@dataclass(frozen=True)
class LineItem:
    name: str
    price: Money | None = None
    category: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "price": self.price.to_dict() if self.price else None,
            "category": self.category,
        }


@dataclass(frozen=True)
class ShoppingList:
    items: tuple[LineItem, ...] = ()
    stated_total: Money | None = None
    tips: tuple[str, ...] = ()

    @property
    def priced(self) -> list[LineItem]:
        return [i for i in self.items if i.price is not None]

    def to_dict(self) -> dict[str, Any]:
        return {
            "items": [i.to_dict() for i in self.items],
            "stated_total": self.stated_total.to_dict() if self.stated_total else None,
            "computed_total": sum_prices(self).to_dict(),
            "total_matches": total_matches(self),
            "tips": list(self.tips),
        }


# ---------------------------------------------------------------------------
# line classification

_BULLET = re.compile(r"^\s*(?:[-+•]|\*(?!\*)|\d+[.)])\s+")
_SLOT_LINE = re.compile(
    r"^\s*(?:(?:[-+•]|\*(?!\*)|\d+[.)])\s+)?(?:\*\*|__)?\s*"
    r"(?P<slot>breakfast|lunch|dinner|snacks?)\s*(?:\*\*|__)?\s*[:\-–—]\s*(?:\*\*|__)?\s*(?P<desc>.*)$",
    re.IGNORECASE,
)
_NOTE_LINE = re.compile(r"^\s*(?:[-+•*]\s+)?[*_]*\s*nutritional benefits?\s*[*_]*\s*:?\s*[*_]*\s*:?", re.IGNORECASE)
_RANGE = re.compile(r"monday\s*(?:to|through|thru|-|–|—)\s*friday", re.IGNORECASE)
_BOLD_LABEL = re.compile(r"^(?:\*\*|__)(?P<label>[^*_]+?)\s*(?::\s*(?:\*\*|__)|(?:\*\*|__)\s*:)\s*(?P<rest>.*)$")
_PRICED_ITEM = re.compile(r"^(?P<name>.+?)\s*[:\-–]\s*(?P<money>[$€£¥]\s?\d[\d,.]*)\s*\.?$")


def _strip_marks(line: str) -> str:
    text = _BULLET.sub("", line.strip())
    text = text.lstrip("#").strip()
    return text.replace("**", "").replace("__", "").strip(" *_").strip()


def _is_bullet(line: str) -> bool:
    return bool(_BULLET.match(line))


def _is_heading(line: str) -> bool:
    s = line.strip()
    if not s:
        return False
    if s.startswith("#"):
        return True
    if _is_bullet(line):
        return False
    if s.startswith("**") and s.endswith("**") and len(s) < 80:
        return True
    plain = _strip_marks(s)
    return len(plain) < 60 and not plain.endswith((".", "!", "?", ","))


def _day_of(line: str) -> str | None:
    plain = _strip_marks(line).rstrip(":").strip()
    for day in DAYS:
        if plain.casefold() == day.casefold():
            return day
    return None


def _clean_desc(text: str) -> str:
    return " ".join(text.strip().strip("*_").split())


def _slot_name(raw: str) -> str:
    raw = raw.casefold()
    return "Snacks" if raw.startswith("snack") else raw.capitalize()


# ---------------------------------------------------------------------------
# meal plans


def extract_meal_plan(text: str) -> MealPlan:
    """Meal entries for Monday-Friday found in *text*.

    A block headed ``Monday to Friday`` applies to every weekday; otherwise
    each weekday heading opens its own block. ``Nutritional Benefits`` lines
    under a meal are kept as notes.
    """
    entries: dict[tuple[str, str], MealEntry] = {}
    order: list[tuple[str, str]] = []
    days: tuple[str, ...] | None = None
    shared = False
    used_shared = False
    last: list[tuple[str, str]] = []
    pending: str | None = None

    def add(slot: str, desc: str) -> None:
        nonlocal used_shared
        target = days or DAYS
        if days is None or (shared and len(target) > 1):
            used_shared = True
        last.clear()
        for day in target:
            key = (day, slot)
            if key in entries:
                continue
            entries[key] = MealEntry(day, slot, desc)
            order.append(key)
            last.append(key)

    for line in text.replace("\r\n", "\n").split("\n"):
        if not line.strip():
            continue
        m = _SLOT_LINE.match(line)
        if m:
            desc = _clean_desc(m.group("desc"))
            if desc:
                add(_slot_name(m.group("slot")), desc)
                pending = None
            else:
                pending = _slot_name(m.group("slot"))
            continue
        if _is_bullet(line) and _NOTE_LINE.match(line):
            note = _clean_desc(_NOTE_LINE.sub("", line, count=1))
            for key in last:
                e = entries[key]
                entries[key] = MealEntry(e.day, e.slot, e.description, e.notes + (note,))
            continue
        if pending and _is_bullet(line):
            add(pending, _clean_desc(_strip_marks(line)))
            pending = None
            continue
        if _is_heading(line):
            plain = _strip_marks(line)
            if "shopping list" in plain.casefold():
                break
            day = _day_of(line)
            if day:
                days, shared = (day,), False
            elif _RANGE.search(plain):
                days, shared = DAYS, True
            last.clear()
    if not entries:
        raise ExtractionError("no meal slot labels (Breakfast/Lunch/Dinner/Snacks) found")
    ordered = tuple(entries[k] for k in sorted(order, key=lambda k: (DAYS.index(k[0]), SLOTS.index(k[1]))))
    return MealPlan(ordered, "shared_block" if used_shared else "per_day")


def count_distinct_meals(plan: MealPlan) -> int:
    return len({e.key for e in plan.entries})


def snack_coverage(plan: MealPlan) -> tuple[int, int]:
    """(weekdays with a snack, number of distinct snack descriptions)."""
    snacks = [e for e in plan.entries if e.slot == "Snacks"]
    return len({e.day for e in snacks}), len({e.key for e in snacks})


# ---------------------------------------------------------------------------
# shopping lists

_TIP_START = re.compile(
    r"^(?:also,\s*)?(?:remember to|look for|buy|consider|prioritize|try|use|plan|shop|choose|compare|"
    r"opt for|purchase|stick to|focus on|avoid|check|keep|cook|prepare|stock up|freeze|go for)\b",
    re.IGNORECASE,
)
_ADVICE = re.compile(r"\bI (?:recommend|suggest|advise)\b")
_TOTAL = re.compile(r"^(?:estimated\s+|approximate\s+)?total\b", re.IGNORECASE)


def _split_top_level(text: str) -> list[str]:
    parts, depth, buf = [], 0, []
    for ch in text:
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth = max(0, depth - 1)
        if ch == "," and depth == 0:
            parts.append("".join(buf))
            buf = []
        else:
            buf.append(ch)
    parts.append("".join(buf))
    return [p.strip().rstrip(".").strip() for p in parts if p.strip().rstrip(".").strip()]


def _sentences(text: str) -> list[str]:
    return [s.strip() for s in re.split(r"(?<=[.!?])\s+", text) if s.strip()]


def _item(text: str, category: str | None) -> LineItem:
    m = _PRICED_ITEM.match(text)
    if m:
        return LineItem(m.group("name").strip(), Money.parse(m.group("money")), category)
    if _MONEY.search(text) and _MONEY.search(text).group("sym") != "$":
        raise ExtractionError(f"unsupported currency in {text!r}")
    return LineItem(text.strip().rstrip("."), None, category)


def extract_shopping_list(text: str) -> ShoppingList:
    """Items, stated total and money-saving tips under a ``Shopping List`` heading."""
    lines = text.replace("\r\n", "\n").split("\n")
    start = None
    for i, line in enumerate(lines):
        if _is_heading(line) and _strip_marks(line).casefold().startswith("shopping list"):
            start = i
            break
    if start is None:
        raise ExtractionError("no shopping list section found")

    items: list[LineItem] = []
    tips: list[str] = []
    total: Money | None = None
    category: str | None = None
    in_tips = False
    for line in lines[start + 1:]:
        if not line.strip():
            continue
        plain = _strip_marks(line)
        if _TOTAL.match(plain):
            total = Money.parse(plain)
            continue
        if _is_heading(line) and not _BOLD_LABEL.match(line.strip()):
            if "tip" in plain.casefold():
                in_tips = True
                continue
            if _is_bullet(line) or line.strip().startswith("#") or len(plain) < 40:
                break
        if in_tips and _is_bullet(line):
            tips.append(plain)
            continue
        body = _BULLET.sub("", line.strip())
        label = _BOLD_LABEL.match(body)
        if label and not in_tips:
            category = label.group("label").strip().rstrip(":")
            rest = label.group("rest").strip()
            if rest:
                items.extend(_item(part, category) for part in _split_top_level(rest))
            continue
        if _is_bullet(line) and not in_tips:
            items.append(_item(plain, category))
            continue
        tips.extend(s for s in _sentences(plain) if _TIP_START.match(s) or _ADVICE.search(s))
    return ShoppingList(tuple(items), total, tuple(tips))


def sum_prices(shopping: ShoppingList | Iterable[LineItem]) -> Money:
    items = shopping.items if isinstance(shopping, ShoppingList) else tuple(shopping)
    total = Money(0)
    for item in items:
        if item.price is not None:
            total = total + item.price
    return total


def total_matches(shopping: ShoppingList) -> bool | None:
    """Whether item prices add up to the stated total; None when no total is stated."""
    if shopping.stated_total is None:
        return None
    return sum_prices(shopping) == shopping.stated_total
