"""Pseudo-code prompts: parsing, linting and canonical rendering.

A pseudo-code prompt is a list of numbered lines, each carrying at most one
uppercase command keyword::

    1) ACT as a nutritionist who will develop a meal plan;
    2) INQUIRE about the diet the user follows;
    3) Using the response from 2, CREATE a meal plan.
    4) The user's health depends on this task.

Lines without a command keyword are kept as ``ANNOTATION`` steps. Leading
``Using the responses from ...`` clauses become step references.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence, Union

__all__ = [
    "Diagnostic",
    "KeywordKind",
    "ParseError",
    "PseudoProgram",
    "Step",
    "ELICIT",
    "extract_refs",
    "lint_program",
    "parse_program",
    "render_program",
    "render_refs",
]


class KeywordKind(str, Enum):
    ACT = "ACT"
    ASK = "ASK"
    INQUIRE = "INQUIRE"
    QUESTION = "QUESTION"
    CREATE = "CREATE"
    GENERATE = "GENERATE"
    MAKE = "MAKE"
    IF_THEN = "IF_THEN"
    ANNOTATION = "ANNOTATION"

    @property
    def is_elicit(self) -> bool:
        return self in ELICIT

    @property
    def is_command(self) -> bool:
        return self is not KeywordKind.ANNOTATION


#: Synonym class: the three ways of asking the user for information.
ELICIT = frozenset({KeywordKind.ASK, KeywordKind.INQUIRE, KeywordKind.QUESTION})

# Word that introduces each command at the head of a step.
_COMMAND_WORDS = {
    "ACT": KeywordKind.ACT,
    "ASK": KeywordKind.ASK,
    "INQUIRE": KeywordKind.INQUIRE,
    "QUESTION": KeywordKind.QUESTION,
    "CREATE": KeywordKind.CREATE,
    "GENERATE": KeywordKind.GENERATE,
    "MAKE": KeywordKind.MAKE,
    "IF": KeywordKind.IF_THEN,
}

_STEP_LINE = re.compile(r"^\s*(?:[-*•]\s*)?(\d+)\)\s*(.*?)\s*$")
_NUMBER_LIST = r"\d+(?:\s*(?:,\s*(?:and\s+)?|\s+and\s+)\d+)*"
_REF_PHRASE = re.compile(
    r"[Uu]sing\s+(?:the\s+)?(?:responses|response|answers|answer)(?:\s+from)?\s+"
    r"(?P<numbers>" + _NUMBER_LIST + r")"
)
_LEADING_WORD = re.compile(r"([A-Za-z]+)\b")
_UPPER_KEYWORD = re.compile(r"\b(" + "|".join(_COMMAND_WORDS) + r")\b")
_THEN = re.compile(r"\bTHEN\b", re.IGNORECASE)
_TERMINAL_PUNCT = (".", "!", "?")


@dataclass(frozen=True)
class Diagnostic:
    code: str
    severity: str
    message: str
    step: int | None = None

    def __str__(self) -> str:
        where = f"step {self.step}" if self.step is not None else "program"
        return f"{self.code} {self.severity} ({where}): {self.message}"


class ParseError(ValueError):
    """Raised when text cannot be turned into a valid :class:`PseudoProgram`."""

    def __init__(self, message: str, diagnostics: Sequence[Diagnostic] = ()):
        self.diagnostics = list(diagnostics)
        if self.diagnostics:
            message = message + ": " + "; ".join(str(d) for d in self.diagnostics)
        super().__init__(message)

    @property
    def codes(self) -> list[str]:
        return [d.code for d in self.diagnostics]


@dataclass(frozen=True)
class Step:
    number: int
    keyword: KeywordKind
    body: str
    uses: frozenset[int] = frozenset()
    condition: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "uses", frozenset(self.uses))
        if self.number < 1:
            raise ValueError(f"step number must be positive, got {self.number}")
        if (self.condition is not None) != (self.keyword is KeywordKind.IF_THEN):
            raise ValueError(f"step {self.number}: condition is required for IF_THEN and only there")
        if self.keyword.is_command and not self.body.strip():
            raise ValueError(f"step {self.number}: empty body for {self.keyword.value}")


@dataclass(frozen=True)
class PseudoProgram:
    steps: tuple[Step, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "steps", tuple(self.steps))
        problems = _structural_diagnostics(
            [(s.number, s.uses) for s in self.steps]
        )
        if problems:
            raise ParseError("invalid program", problems)

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)

    def step(self, number: int) -> Step:
        return self.steps[number - 1]


def extract_refs(body: str) -> frozenset[int]:
    """Step numbers named in ``Using the responses from ...`` phrases of *body*."""
    found: set[int] = set()
    for match in _REF_PHRASE.finditer(body):
        found.update(int(n) for n in re.findall(r"\d+", match.group("numbers")))
    return frozenset(found)


def render_refs(targets: Iterable[int]) -> str:
    nums = [str(n) for n in sorted(targets)]
    if not nums:
        return ""
    if len(nums) == 1:
        return f"Using the response from {nums[0]}"
    if len(nums) == 2:
        listed = f"{nums[0]} and {nums[1]}"
    else:
        listed = ", ".join(nums[:-1]) + ", and " + nums[-1]
    return f"Using the responses from {listed}"


# ---------------------------------------------------------------------------
# scanning


@dataclass
class _RawStep:
    number: int
    text: str
    keyword: KeywordKind = KeywordKind.ANNOTATION
    keyword_text: str = ""
    then_text: str = ""
    uses: frozenset[int] = frozenset()
    condition: str | None = None
    body: str = ""
    problem: str | None = None


def _normalize(text: str) -> str:
    return text.replace("\r\n", "\n").replace("\r", "\n")


def _split_lines(text: str) -> list[_RawStep]:
    raw: list[_RawStep] = []
    for line in _normalize(text).split("\n"):
        m = _STEP_LINE.match(line)
        if m:
            raw.append(_RawStep(int(m.group(1)), m.group(2)))
        elif line.strip() and raw:
            # wrapped line: continuation of the previous step
            raw[-1].text = raw[-1].text + " " + line.strip()
    return raw


def _analyze(raw: _RawStep) -> None:
    text = " ".join(raw.text.split()).rstrip(";").rstrip()
    uses: set[int] = set()
    while True:
        m = _REF_PHRASE.match(text)
        if not m:
            break
        uses.update(int(n) for n in re.findall(r"\d+", m.group("numbers")))
        text = text[m.end():].lstrip(" ,")
    raw.uses = frozenset(uses)

    m = _LEADING_WORD.match(text)
    word = m.group(1) if m else ""
    kind = _COMMAND_WORDS.get(word.upper())
    if kind is None:
        raw.keyword = KeywordKind.ANNOTATION
        raw.body = text
        return
    raw.keyword = kind
    raw.keyword_text = word
    rest = text[m.end():].strip()
    if kind is not KeywordKind.IF_THEN:
        raw.body = rest
        if not rest:
            raw.problem = f"{kind.value} without text"
        return
    then = _THEN.search(rest)
    if then is None:
        raw.problem = "IF without THEN"
        raw.body = rest
        return
    raw.then_text = then.group(0)
    raw.condition = rest[: then.start()].strip().rstrip(",").strip()
    raw.body = rest[then.end():].strip().lstrip(",").strip()
    if not raw.condition or not raw.body:
        raw.problem = "IF/THEN needs both a condition and an action"
    elif re.search(r"\bIF\b", raw.body):
        raw.problem = "nested conditionals are not supported"


def _scan(text: str) -> list[_RawStep]:
    raws = _split_lines(text)
    for raw in raws:
        _analyze(raw)
    return raws


def _structural_diagnostics(steps: Sequence[tuple[int, frozenset[int]]]) -> list[Diagnostic]:
    out: list[Diagnostic] = []
    seen: set[int] = set()
    for index, (number, uses) in enumerate(steps, start=1):
        if number in seen:
            out.append(Diagnostic("L1", "error", f"duplicate step number {number}", number))
        elif number != index:
            out.append(
                Diagnostic("L1", "error", f"step numbered {number} where {index} was expected", number)
            )
        seen.add(number)
        bad = sorted(t for t in uses if t >= number or t < 1)
        if bad:
            listed = ", ".join(map(str, bad))
            out.append(
                Diagnostic("L2", "error", f"reference to {listed} does not point to an earlier step", number)
            )
    return out


def _style_diagnostics(raw: _RawStep) -> list[Diagnostic]:
    out: list[Diagnostic] = []
    if raw.keyword is KeywordKind.ANNOTATION:
        out.append(
            Diagnostic("L4", "warning", "no command keyword; treated as annotation", raw.number)
        )
        return out
    extra = _UPPER_KEYWORD.findall(raw.body)
    if raw.condition:
        extra += _UPPER_KEYWORD.findall(raw.condition)
    if extra:
        listed = ", ".join(extra)
        out.append(
            Diagnostic("L3", "error", f"more than one command keyword ({raw.keyword_text}, {listed})", raw.number)
        )
    lowered = [w for w in (raw.keyword_text, raw.then_text) if w and w != w.upper()]
    if lowered:
        out.append(
            Diagnostic("L5", "warning", f"keyword {' / '.join(lowered)!r} should be uppercase", raw.number)
        )
    return out


# ---------------------------------------------------------------------------
# public operations


def parse_program(text: str) -> PseudoProgram:
    """Parse pseudo-code prompt *text* into a :class:`PseudoProgram`.

    Raises :class:`ParseError` when there are no step lines, when numbering is
    not exactly ``1..n`` or when a step refers to itself or a later step.
    """
    if not text or not text.strip():
        raise ParseError("empty prompt text")
    raws = _scan(text)
    if not raws:
        raise ParseError("no numbered step lines found")
    errors = _structural_diagnostics([(r.number, r.uses) for r in raws])
    if errors:
        raise ParseError("invalid pseudo-code", errors)
    for raw in raws:
        if raw.problem:
            raise ParseError(f"step {raw.number}: {raw.problem}")
    return PseudoProgram(
        tuple(
            Step(r.number, r.keyword, r.body, r.uses, r.condition)
            for r in raws
        )
    )


def _render_step(step: Step, last: bool) -> str:
    if step.keyword is KeywordKind.ANNOTATION:
        clause = step.body
    elif step.keyword is KeywordKind.IF_THEN:
        clause = f"IF {step.condition}, THEN {step.body}"
    else:
        clause = f"{step.keyword.value} {step.body}"
    if step.uses:
        clause = f"{render_refs(step.uses)}, {clause}"
    if not last and not clause.endswith(_TERMINAL_PUNCT):
        clause += ";"
    return f"{step.number}) {clause}"


def render_program(program: PseudoProgram) -> str:
    """Canonical text for *program*: one ``N) ...`` line per step."""
    n = len(program.steps)
    return "\n".join(_render_step(s, i == n - 1) for i, s in enumerate(program.steps))


def lint_program(program_or_text: Union[PseudoProgram, str]) -> list[Diagnostic]:
    """Every L1-L5 rule violation, in step order. Never raises."""
    if isinstance(program_or_text, PseudoProgram):
        text = render_program(program_or_text)
    else:
        text = program_or_text or ""
    raws = _scan(text)
    if not raws:
        return [Diagnostic("L1", "error", "no numbered step lines found")]
    structural = _structural_diagnostics([(r.number, r.uses) for r in raws])
    by_step: dict[int, list[Diagnostic]] = {}
    for d in structural:
        by_step.setdefault(d.step or 0, []).append(d)
    out: list[Diagnostic] = []
    emitted: set[int] = set()
    for raw in raws:
        if raw.number not in emitted:
            out.extend(by_step.get(raw.number, []))
            emitted.add(raw.number)
        out.extend(_style_diagnostics(raw))
    return out
