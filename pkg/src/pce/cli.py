"""``pce`` command line.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Sequence

from . import dsl, extractors, reporting
from .driver import BackendError, ProtocolError, STANDARD_PARAMETERS, Transcript, TranscriptStore
from .enhancer import SpecError, compile_text, load_intent_spec
from .experiment import (
    ALL_UNITS,
    DEFAULT_CONFIG,
    DEFAULT_FIXTURES,
    DEFAULT_SPEC,
    BackendConfig,
    ConfigError,
    ExperimentConfig,
    conversation_ids,
    converse,
    make_backend,
    run_experiment,
    score_responses,
    write_report,
)
from .rubric import IncompleteCard, ScoreCard, load_manual_judgments

log = logging.getLogger("pce")

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _dump(obj: Any) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror or exc}") from exc


def _load_spec(path: str | None):
    path = path or DEFAULT_SPEC
    try:
        return load_intent_spec(path)
    except OSError as exc:
        raise UsageError(f"cannot read spec {path}: {exc.strerror or exc}") from exc


def _response_text(path: str) -> tuple[str, str | None]:
    """Final reply from a transcript JSON, or the file itself as plain text."""
    raw = _read(path)
    try:
        data = json.loads(raw)
    except json.JSONDecodeError:
        return raw, None
    if isinstance(data, dict) and "messages" in data:
        t = Transcript.from_dict(data)
        return t.final_reply, t.unit
    raise UsageError(f"{path}: JSON input must be a transcript")


def _manual(path: str | None):
    if not path:
        return None
    try:
        return load_manual_judgments(path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON: {exc}") from exc


# ---------------------------------------------------------------------------
# subcommands


def cmd_compile(args: argparse.Namespace) -> int:
    spec = _load_spec(args.spec)
    text = compile_text(spec, args.unit)
    _emit(text if text.endswith("\n") else text + "\n", args.out)
    return EXIT_OK


def cmd_lint(args: argparse.Namespace) -> int:
    text = _read(args.file)
    try:
        diagnostics = dsl.lint_program(text)
    except dsl.ParseError as exc:
        diagnostics = exc.diagnostics
    for d in diagnostics:
        where = f"step {d.step}" if d.step is not None else "program"
        print(f"{args.file}: {where}: {d.code} {d.severity}: {d.message}")
    errors = sum(1 for d in diagnostics if d.severity == "error")
    warnings = len(diagnostics) - errors
    print(f"{errors} error(s), {warnings} warning(s)", file=sys.stderr)
    return EXIT_FAILURE if errors else EXIT_OK


def _backend_config(args: argparse.Namespace) -> BackendConfig:
    if args.backend == "replay":
        return BackendConfig("replay", fixture_dir=Path(args.fixtures) if args.fixtures else DEFAULT_FIXTURES)
    return BackendConfig("live", endpoint=args.endpoint, model=args.model)


def cmd_run(args: argparse.Namespace) -> int:
    config = ExperimentConfig(
        spec_path=Path(args.spec or DEFAULT_SPEC), units=(args.unit,), backend=_backend_config(args)
    )
    spec = _load_spec(args.spec)
    prompt = _read(args.prompt) if args.prompt else compile_text(spec, args.unit)
    ids = conversation_ids(config)
    transcript = converse(args.unit, prompt, make_backend(config.backend), STANDARD_PARAMETERS, ids[args.unit])
    if args.out:
        path = TranscriptStore(args.out).save(transcript)
        print(path)
    else:
        sys.stdout.write(transcript.to_json())
    return EXIT_OK


def cmd_extract(args: argparse.Namespace) -> int:
    text, _ = _response_text(args.file)
    plan = extractors.extract_meal_plan(text)
    out: dict[str, Any] = {
        "meal_plan": plan.to_dict(),
        "distinct_meals": extractors.count_distinct_meals(plan),
        "snack_coverage": list(extractors.snack_coverage(plan)),
    }
    try:
        shopping = extractors.extract_shopping_list(text)
    except extractors.ExtractionError as exc:
        out["shopping_list"] = None
        out["shopping_error"] = str(exc)
    else:
        out["shopping_list"] = shopping.to_dict()
        out["items_sum"] = str(extractors.sum_prices(shopping))
    _emit(_dump(out), args.out)
    return EXIT_OK


def cmd_score(args: argparse.Namespace) -> int:
    responses = {}
    if args.unit and len(args.files) > 1:
        raise UsageError("--unit only applies to a single input")
    for path in args.files:
        text, unit = _response_text(path)
        if not unit or unit == "custom":
            unit = args.unit or Path(path).stem
        if unit in responses:
            raise UsageError(f"unit {unit!r} given twice")
        responses[unit] = text
    manual = _manual(args.manual_from)
    cards = score_responses(responses, manual=manual, rate=args.rate)
    if args.out:
        for card in cards:
            print(card.save(Path(args.out) / f"unit_{card.unit}.json"))
    else:
        sys.stdout.write(_dump([c.to_dict() for c in cards]))
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    cards = []
    for path in args.cards:
        try:
            cards.append(ScoreCard.load(path))
        except OSError as exc:
            raise UsageError(f"cannot read {path}: {exc.strerror or exc}") from exc
    report = reporting.build_report(cards)
    if args.out:
        for path in write_report(report, Path(args.out)):
            print(path)
    else:
        sys.stdout.write(_dump(report.to_dict()))
    print(f"ranking: {reporting.format_ranking(report)}", file=sys.stderr)
    return EXIT_OK


def cmd_experiment(args: argparse.Namespace) -> int:
    config = ExperimentConfig.load(args.config or DEFAULT_CONFIG)
    overrides: dict[str, Any] = {}
    if args.unit:
        overrides["units"] = tuple(args.unit)
    if args.spec:
        overrides["spec_path"] = Path(args.spec)
    if args.backend:
        overrides["backend"] = _backend_config(args)
    elif args.fixtures:
        overrides["backend"] = BackendConfig("replay", fixture_dir=Path(args.fixtures))
    if args.out:
        overrides["output_dir"] = Path(args.out)
    if overrides:
        config = replace(config, **overrides)
    if config.output_dir is None:
        raise UsageError("no output directory: pass --out or set output_dir in the config")
    _manual(args.manual_from)
    result = run_experiment(config, manual_from=args.manual_from, rate=args.rate)
    for unit, reason in result.failures.items():
        print(f"unit {unit} failed: {reason}", file=sys.stderr)
    for card in result.cards:
        state = "complete" if card.complete else f"pending: {', '.join(card.missing)}"
        print(f"unit {card.unit}: {state}")
    if result.report is not None:
        totals = ", ".join(f"{u}={t}" for u, t in result.report.totals.items())
        print(f"totals: {totals}")
        print(f"ranking: {reporting.format_ranking(result.report)}")
    print(f"wrote {len(result.written)} file(s) under {config.output_dir}")
    return EXIT_OK if result.ok else EXIT_FAILURE


# ---------------------------------------------------------------------------
# parser


def _add_backend_flags(p: argparse.ArgumentParser, default: str | None) -> None:
    p.add_argument("--backend", choices=("replay", "live"), default=default)
    p.add_argument("--fixtures", help="replay fixture directory (default: bundled transcripts)")
    p.add_argument("--endpoint", help="base URL of an OpenAI-compatible API")
    p.add_argument("--model", help="model name for the live backend")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pce", description="Compile, run and score structured prompts.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compile", help="compile an intent spec into a unit prompt")
    p.add_argument("--spec", help="intent spec JSON (default: bundled nutrition spec)")
    p.add_argument("--unit", choices=ALL_UNITS, required=True)
    p.add_argument("--out", help="write to this file instead of stdout")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("lint", help="check a pseudo-code prompt")
    p.add_argument("file", help="prompt file, or - for stdin")
    p.set_defaults(func=cmd_lint)

    p = sub.add_parser("run", help="run one unit's conversation")
    p.add_argument("--spec")
    p.add_argument("--unit", choices=ALL_UNITS, required=True)
    p.add_argument("--prompt", help="send this file instead of the compiled prompt")
    _add_backend_flags(p, "replay")
    p.add_argument("--out", help="transcript directory (default: print JSON)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("extract", help="extract meal plan and shopping list from a reply")
    p.add_argument("file", help="transcript JSON or plain reply text")
    p.add_argument("--out")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("score", help="score replies against the rubric")
    p.add_argument("files", nargs="+", help="transcript JSON files, one per unit")
    p.add_argument("--unit", choices=ALL_UNITS, help="unit label for a single plain-text reply")
    p.add_argument("--manual-from", help="JSON file of manual judgments")
    p.add_argument("--rate", action="store_true", help="ask for pending manual judgments")
    p.add_argument("--out", help="score card directory (default: print JSON)")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("report", help="build a comparative report from score cards")
    p.add_argument("cards", nargs="+")
    p.add_argument("--out", help="directory for report.json, report.csv and charts")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("experiment", help="run the full A/B/C experiment")
    p.add_argument("--config", help="experiment config JSON (default: bundled replay config)")
    p.add_argument("--spec")
    p.add_argument("--unit", choices=ALL_UNITS, action="append", help="restrict to a unit (repeatable)")
    _add_backend_flags(p, None)
    p.add_argument("--manual-from")
    p.add_argument("--rate", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError, SpecError) as exc:
        print(f"pce: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (BackendError, ProtocolError, IncompleteCard, extractors.ExtractionError, dsl.ParseError, ValueError) as exc:
        print(f"pce: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
