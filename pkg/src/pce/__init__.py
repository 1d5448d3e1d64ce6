"""Structured prompt compilation, conversation replay and rubric scoring."""

from __future__ import annotations

from .dsl import PseudoProgram, Step, lint_program, parse_program, render_program
from .enhancer import IntentSpec, compile_pipeline, compile_text, load_intent_spec

__version__ = "0.1.0"

__all__ = [
    "IntentSpec",
    "PseudoProgram",
    "Step",
    "compile_pipeline",
    "compile_text",
    "lint_program",
    "load_intent_spec",
    "parse_program",
    "render_program",
]
