"""Compile a declarative intent into natural-language or pseudo-code prompts.

The compiler works on a :class:`PromptDraft`, a list of tagged segments. Each
enhancement stage is a pure function ``(draft, spec) -> draft``; the last
stage may turn the draft into a :class:`~pce.dsl.PseudoProgram` instead.

Three presets mirror the prompt forms compared in the experiment::

    UNIT_A = []                                       # plain request
    UNIT_B = [GENERALIZE, CHAIN_OF_THOUGHT, ROLE_FRAMING, EMOTION_PRIMING]
    UNIT_C = UNIT_B + [PSEUDOCODIFY]
"""

from __future__ import annotations

import json
import string
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Sequence, Union

from .dsl import KeywordKind, PseudoProgram, Step, render_program

__all__ = [
    "CycleError",
    "EnhancementStage",
    "IntentSpec",
    "Intention",
    "MissingBinding",
    "ParameterSlot",
    "PromptDraft",
    "Segment",
    "SpecError",
    "UNIT_A",
    "UNIT_B",
    "UNIT_C",
    "UNITS",
    "base_prompt",
    "compile_pipeline",
    "compile_text",
    "compile_unit",
    "frame_roles",
    "generalize",
    "load_intent_spec",
    "order_steps",
    "prime_emotion",
    "pseudocodify",
    "render_draft",
]


class SpecError(ValueError):
    """The intent spec is malformed."""


class MissingBinding(SpecError):
    """A slot used by the literal prompt has no bound value."""


class CycleError(SpecError):
    """Segment dependencies cannot be ordered."""


_PURPOSES = ("task", "inquiry", "role", "emotion")
_USER_INFO = "based on the user's information"


@dataclass(frozen=True)
class ParameterSlot:
    name: str
    inquiry_text: str
    inquiry_verb: str = "inquire"
    pseudo_text: str | None = None
    pseudo_keyword: KeywordKind = KeywordKind.INQUIRE

    @property
    def inquiry(self) -> str:
        return f"{self.inquiry_verb} about {self.inquiry_text}"

    @property
    def pseudo_body(self) -> str:
        return f"about {self.pseudo_text or self.inquiry_text}"


@dataclass(frozen=True)
class Intention:
    """One thing the prompt asks the model to do.

    ``literal`` holds clause templates for the non-generalized prompt, with
    ``{slot}`` placeholders; ``general`` and ``pseudo`` hold the phrasing used
    once parameters are asked for instead of stated. All three fall back to
    text assembled from ``verb`` and ``object``.
    """

    verb: str
    object: str
    role: str | None = None
    depends_on: tuple[str, ...] = ()
    followup: str | None = None
    literal: tuple[str, ...] = ()
    general: str | None = None
    pseudo: str | None = None
    pseudo_keyword: KeywordKind | None = None

    def literal_clauses(self) -> tuple[str, ...]:
        if self.literal:
            return self.literal
        return (f"{self.verb} {self.object}",) + tuple(
            f"with {name.replace('_', ' ')} {{{name}}}" for name in self.depends_on
        )

    def general_text(self) -> str:
        if self.general:
            return self.general
        if self.depends_on:
            return f"{self.verb} {self.object} {_USER_INFO}"
        return f"{self.verb} {self.object}"

    def pseudo_body(self) -> str:
        if self.pseudo:
            return self.pseudo
        if self.followup:
            return f"{self.object}, then {self.followup}"
        return self.object

    def keyword(self) -> KeywordKind:
        if self.pseudo_keyword is not None:
            return self.pseudo_keyword
        try:
            kind = KeywordKind(self.verb.upper())
        except ValueError:
            return KeywordKind.CREATE
        return kind if kind in (KeywordKind.CREATE, KeywordKind.MAKE, KeywordKind.GENERATE) else KeywordKind.CREATE


@dataclass(frozen=True)
class IntentSpec:
    intentions: tuple[Intention, ...]
    slots: tuple[ParameterSlot, ...] = ()
    emotion_phrase: str | None = None
    pseudo_emotion_phrase: str | None = None
    bindings: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "intentions", tuple(self.intentions))
        object.__setattr__(self, "slots", tuple(self.slots))
        if not self.intentions:
            raise SpecError("an intent spec needs at least one intention")
        names = [s.name for s in self.slots]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise SpecError(f"duplicate slot names: {', '.join(dupes)}")
        for i, intent in enumerate(self.intentions):
            unknown = [d for d in intent.depends_on if d not in names]
            if unknown:
                raise SpecError(f"intention {i} depends on undeclared slots: {', '.join(unknown)}")

    def slot(self, name: str) -> ParameterSlot:
        for s in self.slots:
            if s.name == name:
                return s
        raise KeyError(name)

    def with_bindings(self, **values: str) -> IntentSpec:
        return replace(self, bindings={**self.bindings, **values})

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> IntentSpec:
        try:
            slots = [
                ParameterSlot(
                    name=s["name"],
                    inquiry_text=s["inquiry_text"],
                    inquiry_verb=s.get("inquiry_verb", "inquire"),
                    pseudo_text=s.get("pseudo_text"),
                    pseudo_keyword=KeywordKind(s.get("pseudo_keyword", "INQUIRE").upper()),
                )
                for s in data.get("slots", [])
            ]
            intentions = [
                Intention(
                    verb=i["verb"],
                    object=i["object"],
                    role=i.get("role"),
                    depends_on=tuple(i.get("depends_on", ())),
                    followup=i.get("followup"),
                    literal=tuple(i.get("literal", ())),
                    general=i.get("general"),
                    pseudo=i.get("pseudo"),
                    pseudo_keyword=KeywordKind(i["pseudo_keyword"].upper()) if i.get("pseudo_keyword") else None,
                )
                for i in data.get("intentions", [])
            ]
        except (KeyError, TypeError, ValueError) as exc:
            raise SpecError(f"malformed intent spec: {exc!r}") from exc
        return cls(
            intentions=tuple(intentions),
            slots=tuple(slots),
            emotion_phrase=data.get("emotion_phrase"),
            pseudo_emotion_phrase=data.get("pseudo_emotion_phrase"),
            bindings=dict(data.get("bindings", {})),
        )


def load_intent_spec(path: Union[str, Path]) -> IntentSpec:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path}: invalid JSON ({exc})") from exc
    return IntentSpec.from_dict(data)


# ---------------------------------------------------------------------------
# drafts


@dataclass(frozen=True)
class Segment:
    purpose: str
    text: str
    intention: int | None = None
    slot: str | None = None
    followup: bool = False
    new_sentence: bool = False
    literal: bool = False

    def __post_init__(self) -> None:
        if self.purpose not in _PURPOSES:
            raise ValueError(f"unknown segment purpose {self.purpose!r}")


@dataclass(frozen=True)
class PromptDraft:
    segments: tuple[Segment, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "segments", tuple(self.segments))

    @property
    def text(self) -> str:
        return render_draft(self)

    def of(self, purpose: str) -> list[Segment]:
        return [s for s in self.segments if s.purpose == purpose]


def _join_items(items: Sequence[str]) -> str:
    if len(items) == 1:
        return items[0]
    if len(items) == 2:
        return f"{items[0]} and {items[1]}"
    return ", ".join(items[:-1]) + ", and " + items[-1]


def _sentence(items: Sequence[str]) -> str:
    text = _join_items(items)
    text = text[:1].upper() + text[1:]
    if not text.endswith((".", "!", "?")):
        text += "."
    return text


def render_draft(draft: PromptDraft) -> str:
    """Natural-language text of *draft*.

    Items within a sentence are joined as an English list; role and emotion
    segments (and segments flagged ``new_sentence``) open a new sentence.
    """
    sentences: list[list[str]] = []
    for seg in draft.segments:
        opens = seg.new_sentence or seg.purpose in ("role", "emotion")
        if opens or not sentences:
            sentences.append([])
        sentences[-1].append(seg.text)
    return " ".join(_sentence(items) for items in sentences if items)


def _article(role: str) -> str:
    lowered = role.lower()
    if lowered.startswith(("a ", "an ", "the ")):
        return role
    return ("an " if lowered[:1] in "aeiou" else "a ") + role


# ---------------------------------------------------------------------------
# stages


def base_prompt(spec: IntentSpec) -> PromptDraft:
    """The plain request: every parameter value written into the text."""
    segments: list[Segment] = []
    followups: list[Segment] = []
    for index, intent in enumerate(spec.intentions):
        for clause in intent.literal_clauses():
            segments.append(
                Segment("task", _fill(clause, intent, spec), intention=index, literal=True)
            )
        if intent.followup:
            followups.append(
                Segment(
                    "task",
                    f"additionally, {intent.followup}",
                    intention=index,
                    followup=True,
                    new_sentence=True,
                    literal=True,
                )
            )
    return PromptDraft(tuple(segments + followups))


class _Strict(dict):
    def __missing__(self, key: str) -> str:
        raise MissingBinding(f"slot {key!r} has no bound value")


def _fill(template: str, intent: Intention, spec: IntentSpec) -> str:
    fields = {name for _, name, _, _ in string.Formatter().parse(template) if name}
    for name in list(fields) + list(intent.depends_on):
        if name not in spec.bindings:
            raise MissingBinding(f"slot {name!r} has no bound value")
    return template.format_map(_Strict(spec.bindings))


def generalize(draft: PromptDraft, spec: IntentSpec) -> PromptDraft:
    """Replace stated parameter values by questions to the user."""
    if not spec.slots or draft.of("inquiry"):
        return draft
    out: list[Segment] = []
    emitted: set[int] = set()
    for seg in draft.segments:
        if seg.purpose == "task" and seg.intention is not None and seg.literal:
            intent = spec.intentions[seg.intention]
            if seg.followup:
                out.append(replace(seg, text=intent.followup or seg.text, new_sentence=False, literal=False))
            elif seg.intention not in emitted:
                emitted.add(seg.intention)
                out.append(replace(seg, text=intent.general_text(), literal=False))
        else:
            out.append(seg)

    # each inquiry goes right after the first task that needs it
    anchors: dict[int, list[Segment]] = {}
    first_task = next((i for i, s in enumerate(out) if s.purpose == "task" and not s.followup), 0)
    for slot in spec.slots:
        anchor = first_task
        for i, seg in enumerate(out):
            if seg.purpose == "task" and not seg.followup and seg.intention is not None:
                if slot.name in spec.intentions[seg.intention].depends_on:
                    anchor = i
                    break
        anchors.setdefault(anchor, []).append(Segment("inquiry", slot.inquiry, slot=slot.name))
    result: list[Segment] = []
    for i, seg in enumerate(out):
        result.append(seg)
        result.extend(anchors.get(i, []))
    if not out:
        result.extend(anchors.get(0, []))
    return PromptDraft(tuple(result))


def order_steps(draft: PromptDraft, spec: IntentSpec) -> PromptDraft:
    """Stable topological order: questions first, follow-ups beside their task.

    Independent segments keep their relative order. Role segments travel with
    the segment that follows them.
    """
    segs = list(draft.segments)
    # group into movable units
    units: list[list[int]] = []
    owner: dict[int, int] = {}
    last_task_unit: dict[int, int] = {}
    pending_roles: list[int] = []
    followups: list[int] = []
    for i, seg in enumerate(segs):
        if seg.purpose == "role":
            pending_roles.append(i)
            continue
        if seg.followup:
            followups.append(i)
            continue
        units.append(pending_roles + [i])
        pending_roles = []
        owner[i] = len(units) - 1
        if seg.purpose == "task" and seg.intention is not None:
            last_task_unit[seg.intention] = len(units) - 1
    if pending_roles:
        units.append(pending_roles)
    for i in followups:
        target = last_task_unit.get(segs[i].intention)  # type: ignore[arg-type]
        if target is None:
            units.append([i])
        else:
            units[target].append(i)

    slot_units: dict[str, list[int]] = {}
    for u, members in enumerate(units):
        for i in members:
            if segs[i].purpose == "inquiry" and segs[i].slot:
                slot_units.setdefault(segs[i].slot, []).append(u)
    preds: dict[int, set[int]] = {u: set() for u in range(len(units))}
    for u, members in enumerate(units):
        for i in members:
            seg = segs[i]
            if seg.purpose == "task" and seg.intention is not None:
                for name in spec.intentions[seg.intention].depends_on:
                    preds[u].update(v for v in slot_units.get(name, []) if v != u)

    order: list[int] = []
    done: set[int] = set()
    while len(order) < len(units):
        ready = [u for u in range(len(units)) if u not in done and preds[u] <= done]
        if not ready:
            raise CycleError("segment dependencies are cyclic")
        order.append(ready[0])
        done.add(ready[0])
    return PromptDraft(tuple(segs[i] for u in order for i in units[u]))


def frame_roles(draft: PromptDraft, spec: IntentSpec) -> PromptDraft:
    """Open each intention's part of the prompt with an ``act as`` clause.

    An intention's part starts at its first task segment, or earlier at the
    first question it is the first consumer of.
    """
    if draft.of("role"):
        return draft
    segs = list(draft.segments)
    task_pos: dict[int, int] = {}
    for i, seg in enumerate(segs):
        if seg.purpose == "task" and seg.intention is not None:
            task_pos.setdefault(seg.intention, i)
    scope_start = dict(task_pos)
    for i, seg in enumerate(segs):
        if seg.purpose != "inquiry" or not seg.slot:
            continue
        consumers = [
            k for k in task_pos if seg.slot in spec.intentions[k].depends_on
        ]
        if consumers:
            first = min(consumers, key=lambda k: task_pos[k])
            scope_start[first] = min(scope_start[first], i)

    inserts: dict[int, Segment] = {}
    framed = 0
    for k in sorted(scope_start, key=lambda k: scope_start[k]):
        role = spec.intentions[k].role
        if not role:
            continue
        lead = "act as" if framed == 0 else "now act as"
        inserts[scope_start[k]] = Segment("role", f"{lead} {_article(role)}", intention=k)
        framed += 1
    if not inserts:
        return draft
    out: list[Segment] = []
    for i, seg in enumerate(segs):
        if i in inserts:
            out.append(inserts[i])
        out.append(seg)
    return PromptDraft(tuple(out))


def prime_emotion(draft: PromptDraft, spec: IntentSpec) -> PromptDraft:
    if not spec.emotion_phrase or draft.of("emotion"):
        return draft
    return PromptDraft(draft.segments + (Segment("emotion", spec.emotion_phrase),))


def pseudocodify(draft: PromptDraft, spec: IntentSpec) -> PseudoProgram:
    """One numbered step per segment; follow-ups fold into their task step."""
    steps: list[Step] = []
    slot_step: dict[str, int] = {}
    seen_tasks: set[int] = set()
    for seg in draft.segments:
        number = len(steps) + 1
        if seg.purpose == "role":
            role = spec.intentions[seg.intention].role if seg.intention is not None else None
            body = f"as {_article(role)}" if role else seg.text.split(" as ", 1)[-1]
            steps.append(Step(number, KeywordKind.ACT, body))
        elif seg.purpose == "inquiry":
            slot = spec.slot(seg.slot) if seg.slot else None
            if slot is None:
                steps.append(Step(number, KeywordKind.INQUIRE, seg.text))
            else:
                steps.append(Step(number, slot.pseudo_keyword, slot.pseudo_body))
                slot_step[slot.name] = number
        elif seg.purpose == "task":
            if seg.followup or seg.intention is None or seg.intention in seen_tasks:
                continue
            seen_tasks.add(seg.intention)
            intent = spec.intentions[seg.intention]
            uses = {slot_step[n] for n in intent.depends_on if n in slot_step}
            steps.append(Step(number, intent.keyword(), intent.pseudo_body(), frozenset(uses)))
        else:
            phrase = spec.pseudo_emotion_phrase or seg.text
            steps.append(Step(number, KeywordKind.ANNOTATION, phrase))
    return PseudoProgram(tuple(steps))


# ---------------------------------------------------------------------------
# pipeline


class EnhancementStage(str, Enum):
    GENERALIZE = "Generalize"
    CHAIN_OF_THOUGHT = "ChainOfThought"
    ROLE_FRAMING = "RoleFraming"
    EMOTION_PRIMING = "EmotionPriming"
    PSEUDOCODIFY = "Pseudocodify"


_TRANSFORMS: dict[EnhancementStage, Callable[[PromptDraft, IntentSpec], PromptDraft]] = {
    EnhancementStage.GENERALIZE: generalize,
    EnhancementStage.CHAIN_OF_THOUGHT: order_steps,
    EnhancementStage.ROLE_FRAMING: frame_roles,
    EnhancementStage.EMOTION_PRIMING: prime_emotion,
}

UNIT_A: tuple[EnhancementStage, ...] = ()
UNIT_B: tuple[EnhancementStage, ...] = (
    EnhancementStage.GENERALIZE,
    EnhancementStage.CHAIN_OF_THOUGHT,
    EnhancementStage.ROLE_FRAMING,
    EnhancementStage.EMOTION_PRIMING,
)
UNIT_C: tuple[EnhancementStage, ...] = UNIT_B + (EnhancementStage.PSEUDOCODIFY,)
UNITS = {"A": UNIT_A, "B": UNIT_B, "C": UNIT_C}


def compile_pipeline(
    spec: IntentSpec, stages: Iterable[Union[EnhancementStage, str]]
) -> Union[str, PseudoProgram]:
    """Fold *stages* over :func:`base_prompt`.

    Returns prompt text, or a :class:`PseudoProgram` when the last stage is
    ``Pseudocodify``.
    """
    stages = [EnhancementStage(s) for s in stages]
    if EnhancementStage.PSEUDOCODIFY in stages[:-1]:
        raise SpecError("Pseudocodify must be the last stage")
    draft = base_prompt(spec) if EnhancementStage.GENERALIZE not in stages else _unbound_base(spec)
    for stage in stages:
        if stage is EnhancementStage.PSEUDOCODIFY:
            return pseudocodify(draft, spec)
        draft = _TRANSFORMS[stage](draft, spec)
    return draft.text


def _unbound_base(spec: IntentSpec) -> PromptDraft:
    # generalized forms never show parameter values, so bindings are optional
    try:
        return base_prompt(spec)
    except MissingBinding:
        placeholders = {s.name: f"<{s.name}>" for s in spec.slots}
        return base_prompt(replace(spec, bindings={**placeholders, **spec.bindings}))


def compile_unit(spec: IntentSpec, unit: str) -> Union[str, PseudoProgram]:
    try:
        stages = UNITS[unit.upper()]
    except KeyError:
        raise SpecError(f"unknown unit {unit!r}; expected one of {', '.join(UNITS)}") from None
    return compile_pipeline(spec, stages)


def compile_text(spec: IntentSpec, unit: str) -> str:
    """Prompt text for *unit*, rendering pseudo-code when needed."""
    out = compile_unit(spec, unit)
    return render_program(out) if isinstance(out, PseudoProgram) else out
