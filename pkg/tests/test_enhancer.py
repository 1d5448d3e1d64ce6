from __future__ import annotations

import json

import pytest

from pce.dsl import KeywordKind, PseudoProgram, lint_program, render_program
from pce.enhancer import (
    UNIT_A,
    UNIT_B,
    UNIT_C,
    CycleError,
    EnhancementStage,
    IntentSpec,
    Intention,
    MissingBinding,
    ParameterSlot,
    PromptDraft,
    Segment,
    SpecError,
    base_prompt,
    compile_pipeline,
    compile_text,
    compile_unit,
    frame_roles,
    generalize,
    load_intent_spec,
    order_steps,
    prime_emotion,
    pseudocodify,
)

from conftest import golden


def norm(text: str) -> str:
    return " ".join(text.split())


def tutor_spec(**kw) -> IntentSpec:
    base = dict(
        intentions=(Intention("make", "a quiz", depends_on=("topic",)),),
        slots=(ParameterSlot("topic", "the topic to study"),),
        bindings={"topic": "algebra"},
    )
    base.update(kw)
    return IntentSpec(**base)


# --- presets and reference outputs ------------------------------------------------


def test_presets():
    assert UNIT_A == ()
    assert [s.value for s in UNIT_B] == ["Generalize", "ChainOfThought", "RoleFraming", "EmotionPriming"]
    assert UNIT_C == UNIT_B + (EnhancementStage.PSEUDOCODIFY,)


def test_unit_a_text(spec):
    assert norm(compile_pipeline(spec, UNIT_A)) == norm(golden("unit_a_prompt.txt"))


def test_unit_b_text(spec):
    assert norm(compile_pipeline(spec, UNIT_B)) == norm(golden("unit_b_prompt.txt"))


def test_unit_c_program(spec):
    prog = compile_pipeline(spec, UNIT_C)
    assert isinstance(prog, PseudoProgram)
    kinds = [s.keyword for s in prog]
    K = KeywordKind
    assert kinds == [K.ACT, K.INQUIRE, K.INQUIRE, K.INQUIRE, K.CREATE, K.ACT, K.CREATE, K.ANNOTATION]
    assert prog.step(5).uses == {2, 3, 4}
    assert prog.step(7).uses == {4}
    assert norm(render_program(prog)) == norm(golden("unit_c_prompt.txt"))


def test_compile_text_and_unit_lookup(spec):
    assert compile_text(spec, "c") == render_program(compile_unit(spec, "C"))
    with pytest.raises(SpecError):
        compile_unit(spec, "D")


def test_pipeline_is_deterministic(spec):
    assert compile_text(spec, "B") == compile_text(spec, "B")


def test_pseudocodify_must_be_last(spec):
    with pytest.raises(SpecError):
        compile_pipeline(spec, [EnhancementStage.PSEUDOCODIFY, EnhancementStage.GENERALIZE])


def test_ablation_without_emotion(spec):
    text = compile_pipeline(spec, UNIT_B[:-1])
    assert "depend" not in text
    assert norm(golden("unit_b_prompt.txt")).startswith(norm(text)[:-1])


# --- base prompt --------------------------------------------------------------------


def test_base_prompt_has_only_tasks(spec):
    draft = base_prompt(spec)
    assert {s.purpose for s in draft.segments} == {"task"}
    assert "paleolithic" in draft.text and "50 dollars per week" in draft.text


def test_base_prompt_single_intention_no_slots():
    spec = IntentSpec((Intention("write", "a haiku"),))
    draft = base_prompt(spec)
    assert len(draft.segments) == 1
    assert draft.text == "Write a haiku."


def test_unbound_slot_raises():
    with pytest.raises(MissingBinding):
        base_prompt(tutor_spec(bindings={}))


def test_generalized_units_do_not_need_bindings(spec):
    unbound = IntentSpec(spec.intentions, spec.slots, spec.emotion_phrase, spec.pseudo_emotion_phrase, {})
    assert compile_text(unbound, "B") == compile_text(spec, "B")


# --- generalize -----------------------------------------------------------------------


def test_generalize_nutrition(spec):
    draft = generalize(base_prompt(spec), spec)
    inquiries = draft.of("inquiry")
    assert [s.slot for s in inquiries] == ["diet", "goal", "budget"]
    assert draft.text.startswith(
        "Create a meal plan for each weekday based on the user's information, inquire about the diet the user follows,"
    )
    assert "paleolithic" not in draft.text


def test_generalize_without_slots_is_identity():
    spec = IntentSpec((Intention("write", "a haiku"),))
    draft = base_prompt(spec)
    assert generalize(draft, spec) == draft


def test_generalize_is_idempotent(spec):
    once = generalize(base_prompt(spec), spec)
    assert generalize(once, spec) == once


# --- chain of thought ------------------------------------------------------------------


def test_order_steps_puts_inquiries_first(spec):
    draft = order_steps(generalize(base_prompt(spec), spec), spec)
    purposes = [(s.purpose, s.intention, s.followup) for s in draft.segments]
    assert [p for p, _, _ in purposes[:3]] == ["inquiry"] * 3
    assert purposes[3] == ("task", 0, False)
    assert purposes[4] == ("task", 0, True)
    assert purposes[5] == ("task", 1, False)


def test_order_safety(spec):
    draft = order_steps(generalize(base_prompt(spec), spec), spec)
    seen = set()
    for seg in draft.segments:
        if seg.purpose == "inquiry":
            seen.add(seg.slot)
        elif seg.purpose == "task":
            assert set(spec.intentions[seg.intention].depends_on) <= seen


def test_order_steps_without_dependencies_is_identity():
    spec = IntentSpec((Intention("write", "a haiku"), Intention("draw", "a cat")))
    draft = base_prompt(spec)
    assert order_steps(draft, spec) == draft


def test_order_steps_is_stable_for_independent_tasks():
    spec = IntentSpec((Intention("create", "a plan"), Intention("make", "a list")))
    draft = base_prompt(spec)
    assert [s.intention for s in order_steps(draft, spec).segments] == [0, 1]


def test_order_steps_cycle_detection():
    spec = IntentSpec(
        (Intention("create", "x", depends_on=("b",)), Intention("make", "y", depends_on=("a",))),
        (ParameterSlot("a", "a"), ParameterSlot("b", "b")),
    )
    # each question is glued to the task that needs the other one
    draft = PromptDraft(
        (
            Segment("task", "create x", intention=0),
            Segment("inquiry", "ask a", intention=0, slot="a", followup=True),
            Segment("task", "make y", intention=1),
            Segment("inquiry", "ask b", intention=1, slot="b", followup=True),
        )
    )
    with pytest.raises(CycleError):
        order_steps(draft, spec)


# --- roles and emotion --------------------------------------------------------------------


def test_roles_nutrition(spec):
    draft = frame_roles(order_steps(generalize(base_prompt(spec), spec), spec), spec)
    roles = draft.of("role")
    assert [r.text for r in roles] == [
        "act as a nutritionist who will develop a meal plan",
        "now act as a domestic economy specialist",
    ]
    assert draft.segments[0].purpose == "role"


def test_single_role_has_no_now():
    spec = IntentSpec((Intention("make", "a quiz", role="patient tutor"),))
    draft = frame_roles(base_prompt(spec), spec)
    assert [r.text for r in draft.of("role")] == ["act as a patient tutor"]
    assert draft.text == "Act as a patient tutor and make a quiz."


def test_roles_absent_is_identity():
    spec = tutor_spec()
    draft = base_prompt(spec)
    assert frame_roles(draft, spec) == draft


def test_roles_and_emotion_idempotent(spec):
    draft = order_steps(generalize(base_prompt(spec), spec), spec)
    framed = frame_roles(draft, spec)
    assert frame_roles(framed, spec) == framed
    primed = prime_emotion(framed, spec)
    assert prime_emotion(primed, spec) == primed
    assert primed.segments[-1].purpose == "emotion"


def test_emotion_absent_is_identity():
    spec = tutor_spec()
    draft = base_prompt(spec)
    assert prime_emotion(draft, spec) == draft


def test_article_for_vowel_roles():
    spec = IntentSpec((Intention("make", "a plan", role="economist"),))
    assert frame_roles(base_prompt(spec), spec).of("role")[0].text == "act as an economist"


# --- pseudocodify -----------------------------------------------------------------------


def test_single_task_program():
    spec = IntentSpec((Intention("create", "a haiku"),))
    prog = pseudocodify(base_prompt(spec), spec)
    assert len(prog) == 1
    assert prog.step(1).keyword is KeywordKind.CREATE


def test_generic_spec_compiles_to_lint_clean_program():
    spec = IntentSpec(
        intentions=(
            Intention("create", "a study plan", role="tutor", depends_on=("topic", "hours")),
            Intention("make", "a reading list", role="librarian", depends_on=("topic",)),
        ),
        slots=(ParameterSlot("topic", "the topic"), ParameterSlot("hours", "the weekly hours")),
        emotion_phrase="This matters a lot.",
    )
    prog = compile_pipeline(spec, UNIT_C)
    assert all(d.severity != "error" for d in lint_program(prog))
    create = next(s for s in prog if s.keyword is KeywordKind.CREATE)
    assert create.uses == {2, 3}
    assert prog.steps[-1].keyword is KeywordKind.ANNOTATION


# --- content preservation -----------------------------------------------------------------


def test_no_stage_drops_or_duplicates_a_task(spec):
    draft = base_prompt(spec)
    stages = [generalize, order_steps, frame_roles, prime_emotion]
    for stage in stages:
        draft = stage(draft, spec)
        mains = sorted(s.intention for s in draft.of("task") if not s.followup)
        assert mains == list(range(len(spec.intentions)))
    prog = pseudocodify(draft, spec)
    commands = [s for s in prog if s.keyword in (KeywordKind.CREATE, KeywordKind.MAKE)]
    assert len(commands) == len(spec.intentions)


# --- spec validation ------------------------------------------------------------------------


def test_spec_invariants():
    with pytest.raises(SpecError):
        IntentSpec(())
    with pytest.raises(SpecError):
        IntentSpec((Intention("make", "x"),), (ParameterSlot("a", "x"), ParameterSlot("a", "y")))
    with pytest.raises(SpecError):
        IntentSpec((Intention("make", "x", depends_on=("nope",)),))


def test_spec_json_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    with pytest.raises(SpecError):
        load_intent_spec(bad)
    bad.write_text(json.dumps({"intentions": [{"verb": "make"}]}), encoding="utf-8")
    with pytest.raises(SpecError):
        load_intent_spec(bad)
