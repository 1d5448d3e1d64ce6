"""Comparative reports over score cards: tables, ranking, SVG charts, exports."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Sequence, Union
from xml.sax.saxutils import escape

from .rubric import CODES, CRITERIA, Category, ScoreCard, category_score, total_score, IncompleteCard

__all__ = [
    "ComparativeReport",
    "DuplicateUnit",
    "build_report",
    "emit_chart",
    "export",
    "format_ranking",
    "load_report",
    "report_from_dict",
]


class DuplicateUnit(ValueError):
    pass


@dataclass(frozen=True)
class ComparativeReport:
    units: tuple[str, ...]
    per_criterion: Mapping[str, Mapping[str, int]]
    per_category: Mapping[str, Mapping[str, int]]
    totals: Mapping[str, int]
    ranking: tuple[tuple[str, int], ...]

    def rank_of(self, unit: str) -> int:
        return dict(self.ranking)[unit]

    def to_dict(self) -> dict[str, Any]:
        return {
            "units": list(self.units),
            "per_criterion": {u: dict(v) for u, v in self.per_criterion.items()},
            "per_category": {u: dict(v) for u, v in self.per_category.items()},
            "totals": dict(self.totals),
            "ranking": [{"unit": u, "rank": r} for u, r in self.ranking],
        }


def report_from_dict(data: Mapping[str, Any]) -> ComparativeReport:
    return ComparativeReport(
        units=tuple(data["units"]),
        per_criterion={u: {c: int(v) for c, v in row.items()} for u, row in data["per_criterion"].items()},
        per_category={u: {c: int(v) for c, v in row.items()} for u, row in data["per_category"].items()},
        totals={u: int(v) for u, v in data["totals"].items()},
        ranking=tuple((r["unit"], int(r["rank"])) for r in data["ranking"]),
    )


def build_report(cards: Sequence[ScoreCard]) -> ComparativeReport:
    if not cards:
        raise ValueError("a report needs at least one score card")
    units = [c.unit for c in cards]
    dupes = sorted({u for u in units if units.count(u) > 1})
    if dupes:
        raise DuplicateUnit(f"duplicate units: {', '.join(dupes)}")
    for card in cards:
        if card.missing:
            raise IncompleteCard(card.unit, card.missing)

    per_criterion = {c.unit: {code: c.level(code) for code in CODES} for c in cards}
    per_category = {c.unit: {cat.value: category_score(c, cat) for cat in Category} for c in cards}
    totals = {c.unit: total_score(c) for c in cards}

    # competition ranking: ties share a rank, the next rank skips
    ordered = sorted(range(len(units)), key=lambda i: (-totals[units[i]], i))
    ranking = []
    for pos, i in enumerate(ordered):
        unit = units[i]
        if pos and totals[unit] == totals[ranking[-1][0]]:
            ranking.append((unit, ranking[-1][1]))
        else:
            ranking.append((unit, pos + 1))
    return ComparativeReport(tuple(units), per_criterion, per_category, totals, tuple(ranking))


def format_ranking(report: ComparativeReport) -> str:
    """``B=C > A`` style summary."""
    groups: list[list[str]] = []
    last = None
    for unit, rank in report.ranking:
        if rank != last:
            groups.append([])
            last = rank
        groups[-1].append(unit)
    return " > ".join("=".join(g) for g in groups)


# ---------------------------------------------------------------------------
# charts

_PALETTE = ("#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#edc948", "#b07aa1", "#ff9da7")
_W, _H = 640, 360
_LEFT, _RIGHT, _TOP, _BOTTOM = 56, 24, 40, 64


def _chart_data(report: ComparativeReport, scope: str) -> tuple[str, list[str], list[str], dict, int]:
    if scope == "overall":
        groups = list(report.units)
        series = ["total"]
        values = {(u, "total"): report.totals[u] for u in report.units}
        return "Overall results", groups, series, values, 8 * 3
    category = Category(scope)
    codes = [c for c, crit in CRITERIA.items() if crit.category is category]
    values = {(code, u): report.per_criterion[u][code] for code in codes for u in report.units}
    return category.value, codes, list(report.units), values, 3


def emit_chart(
    report: ComparativeReport,
    scope: Union[str, Category] = "overall",
    path: Union[str, Path, None] = None,
) -> str:
    """Grouped bar chart as an SVG 1.1 document.

    ``scope="overall"`` draws one bar per unit (its total); a category name
    draws one group per criterion with a bar per unit.
    """
    scope = scope.value if isinstance(scope, Category) else scope
    title, groups, series, values, ymax = _chart_data(report, scope)
    plot_w = _W - _LEFT - _RIGHT
    plot_h = _H - _TOP - _BOTTOM
    group_w = plot_w / len(groups)
    bar_w = group_w * 0.7 / len(series)

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="12">',
        f'<title>{escape(title)}</title>',
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="#ffffff"/>',
        f'<text x="{_W / 2:.1f}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
    ]
    step = 1 if ymax <= 3 else 4
    for tick in range(0, ymax + 1, step):
        y = _TOP + plot_h - plot_h * tick / ymax
        out.append(f'<line x1="{_LEFT}" y1="{y:.1f}" x2="{_W - _RIGHT}" y2="{y:.1f}" stroke="#dddddd"/>')
        out.append(f'<text x="{_LEFT - 6}" y="{y + 4:.1f}" text-anchor="end">{tick}</text>')
    for gi, group in enumerate(groups):
        gx = _LEFT + gi * group_w + group_w * 0.15
        for si, name in enumerate(series):
            value = values[(group, name)]
            h = plot_h * value / ymax
            x = gx + si * bar_w
            y = _TOP + plot_h - h
            color = _PALETTE[(gi if len(series) == 1 else si) % len(_PALETTE)]
            label = f"{group} {name}" if len(series) > 1 else group
            out.append(
                f'<rect class="bar" data-group="{escape(group)}" data-series="{escape(name)}" '
                f'data-value="{value}" x="{x:.1f}" y="{y:.1f}" width="{bar_w:.1f}" height="{h:.1f}" '
                f'fill="{color}"><title>{escape(label)}: {value}</title></rect>'
            )
            out.append(f'<text x="{x + bar_w / 2:.1f}" y="{y - 4:.1f}" text-anchor="middle">{value}</text>')
        out.append(
            f'<text x="{_LEFT + gi * group_w + group_w / 2:.1f}" y="{_TOP + plot_h + 18}" '
            f'text-anchor="middle">{escape(group)}</text>'
        )
    if len(series) > 1:
        for si, name in enumerate(series):
            lx = _LEFT + si * 90
            ly = _H - 16
            out.append(f'<rect x="{lx}" y="{ly - 10}" width="12" height="12" fill="{_PALETTE[si % len(_PALETTE)]}"/>')
            out.append(f'<text x="{lx + 16}" y="{ly}">Unit {escape(name)}</text>')
    out.append(f'<line x1="{_LEFT}" y1="{_TOP + plot_h}" x2="{_W - _RIGHT}" y2="{_TOP + plot_h}" stroke="#333333"/>')
    out.append("</svg>")
    svg = "\n".join(out) + "\n"
    if path is not None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(svg, encoding="utf-8")
    return svg


# ---------------------------------------------------------------------------
# export


def _csv_text(report: ComparativeReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(["unit", "criterion", "category", "level", "unit_total"])
    for unit in report.units:
        for code in CODES:
            writer.writerow([unit, code, CRITERIA[code].category.value, report.per_criterion[unit][code], report.totals[unit]])
    return buf.getvalue()


def export(report: ComparativeReport, fmt: str, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        path.write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
    elif fmt == "csv":
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(_csv_text(report))
    else:
        raise ValueError(f"unknown export format {fmt!r}")
    return path


def load_report(path: Union[str, Path]) -> ComparativeReport:
    return report_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
