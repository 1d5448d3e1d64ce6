"""End-to-end A/B/C runs: compile, converse, extract, score, report."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Union

from . import extractors, reporting
from .driver import (
    Backend,
    ChatCompletionsBackend,
    ParameterSet,
    ReplayBackend,
    STANDARD_PARAMETERS,
    Transcript,
    TranscriptStore,
    load_fixture,
    run_single,
    run_two_phase,
)
from .enhancer import IntentSpec, compile_text, load_intent_spec
from .rubric import (
    Judgment,
    ScoreCard,
    apply_manual,
    judge_budget_adaptation,
    judge_counting,
    judge_snack_inclusion,
    load_manual_judgments,
    pending_card,
    rate_interactively,
)

log = logging.getLogger(__name__)

DATA_DIR = Path(__file__).parent / "data"
DEFAULT_SPEC = DATA_DIR / "nutrition.json"
DEFAULT_FIXTURES = DATA_DIR / "fixtures"
DEFAULT_CONFIG = DATA_DIR / "experiment.json"
REFERENCE_JUDGMENTS = DATA_DIR / "reference_judgments.json"
ALL_UNITS = ("A", "B", "C")


class ConfigError(ValueError):
    """Invalid experiment configuration (maps to exit code 2)."""


@dataclass(frozen=True)
class BackendConfig:
    kind: str
    fixture_dir: Path | None = None
    endpoint: str | None = None
    model: str | None = None
    options: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind == "replay":
            if self.fixture_dir is None:
                raise ConfigError("replay backend needs a fixture directory")
        elif self.kind == "live":
            if not self.endpoint or not self.model:
                raise ConfigError("live backend needs an endpoint and a model")
        else:
            raise ConfigError(f"unknown backend kind {self.kind!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    spec_path: Path
    units: tuple[str, ...]
    backend: BackendConfig
    parameters: ParameterSet = STANDARD_PARAMETERS
    output_dir: Path | None = None
    manual_judgments: Path | None = None

    def __post_init__(self) -> None:
        if not self.units:
            raise ConfigError("no units selected")
        bad = [u for u in self.units if u not in ALL_UNITS]
        if bad:
            raise ConfigError(f"unknown units: {', '.join(bad)}")
        if len(set(self.units)) != len(self.units):
            raise ConfigError("units listed twice")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], base: Union[str, Path] = ".") -> ExperimentConfig:
        base = Path(base)

        def rel(p: str | None) -> Path | None:
            return None if p is None else base / p

        try:
            b = data["backend"]
            backend = BackendConfig(
                kind=b.get("kind", "replay"),
                fixture_dir=rel(b.get("fixtures")),
                endpoint=b.get("endpoint"),
                model=b.get("model"),
                options=dict(b.get("options", {})),
            )
            params = ParameterSet.from_dict(data["parameters"]) if "parameters" in data else STANDARD_PARAMETERS
            return cls(
                spec_path=rel(data["spec"]),
                units=tuple(data.get("units", ALL_UNITS)),
                backend=backend,
                parameters=params,
                output_dir=rel(data.get("output_dir")),
                manual_judgments=rel(data.get("manual_judgments")),
            )
        except KeyError as exc:
            raise ConfigError(f"config is missing {exc.args[0]!r}") from exc
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad config: {exc}") from exc

    @classmethod
    def load(cls, path: Union[str, Path]) -> ExperimentConfig:
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
        return cls.from_dict(data, path.parent)


def fixture_ids(directory: Union[str, Path]) -> dict[str, str]:
    """Map unit label to conversation id for each fixture in *directory*."""
    directory = Path(directory)
    if not directory.is_dir():
        raise ConfigError(f"fixture directory {directory} does not exist")
    out = {}
    for path in sorted(directory.glob("*.json")):
        try:
            data = load_fixture(path)
        except (ValueError, OSError) as exc:
            raise ConfigError(str(exc)) from exc
        out[str(data.get("unit", data["id"]))] = data["id"]
    return out


def make_backend(cfg: BackendConfig) -> Backend:
    if cfg.kind == "replay":
        return ReplayBackend.from_directory(cfg.fixture_dir)
    return ChatCompletionsBackend(cfg.endpoint, cfg.model, options=cfg.options)


def conversation_ids(config: ExperimentConfig) -> dict[str, str]:
    if config.backend.kind != "replay":
        return {u: f"unit-{u.lower()}" for u in config.units}
    ids = fixture_ids(config.backend.fixture_dir)
    missing = [u for u in config.units if u not in ids]
    if missing:
        raise ConfigError(f"no replay fixture for unit(s) {', '.join(missing)} in {config.backend.fixture_dir}")
    return {u: ids[u] for u in config.units}


def converse(unit: str, prompt: str, backend: Backend, params: ParameterSet, transcript_id: str) -> Transcript:
    """Unit A is a single exchange; the generalized units ask first, then get parameters."""
    if unit == "A":
        return run_single(prompt, backend, transcript_id=transcript_id, unit=unit)
    return run_two_phase(prompt, params, backend, transcript_id=transcript_id, unit=unit)


def auto_card(unit: str, response: str) -> tuple[ScoreCard, int]:
    """Pending card with the automatic criteria filled, plus the distinct-meal count."""
    plan = extractors.extract_meal_plan(response)
    try:
        shopping = extractors.extract_shopping_list(response)
    except extractors.ExtractionError:
        shopping = None
    card = pending_card(unit)
    card = card.with_judgment("1.B", judge_budget_adaptation(shopping, response))
    card = card.with_judgment("3.B", judge_snack_inclusion(extractors.snack_coverage(plan)))
    return card, extractors.count_distinct_meals(plan)


def score_responses(
    responses: Mapping[str, str],
    *,
    manual: Mapping[str, Mapping[str, Judgment]] | None = None,
    rate: bool = False,
    ask: Callable[[str], str] | None = None,
    say: Callable[[str], None] | None = None,
) -> list[ScoreCard]:
    """Score final replies keyed by unit, in the given order."""
    cards, counts = {}, {}
    for unit, text in responses.items():
        cards[unit], counts[unit] = auto_card(unit, text)
    counting = judge_counting(counts)
    for unit in cards:
        card = cards[unit].with_judgment("4.A", counting[unit])
        if manual and unit in manual:
            card = apply_manual(card, manual[unit])
        if rate and card.missing:
            card = rate_interactively(card, responses[unit], ask=ask, say=say)
        cards[unit] = card
    return list(cards.values())


@dataclass
class ExperimentResult:
    transcripts: dict[str, Transcript] = field(default_factory=dict)
    cards: list[ScoreCard] = field(default_factory=list)
    failures: dict[str, str] = field(default_factory=dict)
    report: reporting.ComparativeReport | None = None
    written: list[Path] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def write_report(report: reporting.ComparativeReport, out: Path) -> list[Path]:
    from .rubric import Category

    paths = [reporting.export(report, "json", out / "report.json"), reporting.export(report, "csv", out / "report.csv")]
    for scope, name in [("overall", "overall")] + [(c.value, c.name.lower()) for c in Category]:
        path = out / "charts" / f"{name}.svg"
        reporting.emit_chart(report, scope, path)
        paths.append(path)
    return paths


def run_experiment(
    config: ExperimentConfig,
    *,
    backend: Backend | None = None,
    spec: IntentSpec | None = None,
    manual_from: Union[str, Path, None] = None,
    rate: bool = False,
    ask: Callable[[str], str] | None = None,
    say: Callable[[str], None] | None = None,
) -> ExperimentResult:
    """Run every configured unit; a failing unit does not stop the others."""
    if spec is None:
        try:
            spec = load_intent_spec(config.spec_path)
        except OSError as exc:
            raise ConfigError(f"cannot read spec {config.spec_path}: {exc.strerror or exc}") from exc
    ids = conversation_ids(config)
    backend = backend or make_backend(config.backend)
    manual_path = manual_from or config.manual_judgments
    try:
        manual = load_manual_judgments(manual_path) if manual_path else None
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot load manual judgments from {manual_path}: {exc}") from exc
    out = config.output_dir
    result = ExperimentResult()

    def one(unit: str) -> Transcript:
        prompt = compile_text(spec, unit)
        return converse(unit, prompt, backend, config.parameters, ids[unit])

    with ThreadPoolExecutor(max_workers=len(config.units)) as pool:
        futures = {u: pool.submit(one, u) for u in config.units}
    for unit, fut in futures.items():
        try:
            result.transcripts[unit] = fut.result()
        except Exception as exc:
            log.error("unit %s failed: %s", unit, exc)
            result.failures[unit] = f"{type(exc).__name__}: {exc}"

    responses = {}
    for unit, t in result.transcripts.items():
        responses[unit] = t.final_reply
        if out is not None:
            result.written.append(TranscriptStore(out / "transcripts").save(t))
    if responses:
        try:
            result.cards = score_responses(responses, manual=manual, rate=rate, ask=ask, say=say)
        except Exception as exc:
            log.error("scoring failed: %s", exc)
            result.failures["scoring"] = f"{type(exc).__name__}: {exc}"
    if out is not None:
        for card in result.cards:
            result.written.append(card.save(out / "cards" / f"unit_{card.unit}.json"))
    if result.cards and all(c.complete for c in result.cards):
        result.report = reporting.build_report(result.cards)
        if out is not None:
            result.written.extend(write_report(result.report, out))
    return result
