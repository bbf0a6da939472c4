"""Report rows, file emission, and the sweep chart.

Numeric artifacts (CSV for condition tables, TSV for sweep series) are the
source of truth; the SVG chart is decorative.  Numbers are written with six
significant digits so identical runs produce byte-identical files.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyInput
from .harness import EvalSummary, display_estimator_tag

REPORT_HEADER = "condition,logging_mode,estimator,bias,sd,rmse,reps,mc_iters,seed"
SWEEP_HEADER = "size,estimator,bias,bias_se,rmse,rmse_se"

_SVG_PALETTE = ("#1b6ca8", "#d1495b", "#66a182", "#8d5a97", "#edae49", "#2e4057")


@dataclass(frozen=True)
class ReportRow:
    """One (condition, estimator) line of a results table."""

    condition: str
    logging_mode: str
    estimator: str
    bias: float
    sd: float
    rmse: float
    reps: int
    mc_iters: int
    seed: int


@dataclass(frozen=True)
class SweepRow:
    """One (size, estimator) point of a sample-size series."""

    size: int
    estimator: str
    bias: float
    bias_se: float
    rmse: float
    rmse_se: float


def format_number(value: float) -> str:
    """Six significant digits, trailing zeros trimmed (e.g. 0.5863219 -> 0.586322)."""
    return f"{value:.6g}"


def rows_from_summary(summary: EvalSummary) -> list[ReportRow]:
    return [
        ReportRow(
            condition=summary.condition,
            logging_mode=summary.logging_mode,
            estimator=display_estimator_tag(tag),
            bias=summary.bias[tag],
            sd=summary.sd[tag],
            rmse=summary.rmse[tag],
            reps=summary.n_repetitions,
            mc_iters=summary.mc_iterations,
            seed=summary.master_seed,
        )
        for tag in summary.estimator_tags
    ]


def sweep_rows(series: list[tuple[int, EvalSummary]]) -> list[SweepRow]:
    """Flatten a sweep into rows with standard errors across repetitions.

    With a single repetition the standard errors are reported as NaN.
    """
    rows = []
    for size, summary in series:
        for tag in summary.estimator_tags:
            biases = np.array([rec.stats[tag].bias for rec in summary.records])
            rmses = np.array([rec.stats[tag].rmse for rec in summary.records])
            reps = biases.size
            if reps > 1:
                bias_se = float(np.std(biases, ddof=1) / math.sqrt(reps))
                rmse_se = float(np.std(rmses, ddof=1) / math.sqrt(reps))
            else:
                bias_se = rmse_se = math.nan
            rows.append(
                SweepRow(
                    size=size,
                    estimator=display_estimator_tag(tag),
                    bias=float(np.mean(biases)),
                    bias_se=bias_se,
                    rmse=float(np.mean(rmses)),
                    rmse_se=rmse_se,
                )
            )
    return rows


def _report_cells(row: ReportRow) -> list[str]:
    return [
        row.condition,
        row.logging_mode,
        row.estimator,
        format_number(row.bias),
        format_number(row.sd),
        format_number(row.rmse),
        str(row.reps),
        str(row.mc_iters),
        str(row.seed),
    ]


def _sweep_cells(row: SweepRow) -> list[str]:
    return [
        str(row.size),
        row.estimator,
        format_number(row.bias),
        format_number(row.bias_se),
        format_number(row.rmse),
        format_number(row.rmse_se),
    ]


def write_report(rows, path, fmt: str = "csv") -> None:
    """Write report or sweep rows to ``path`` as csv, tsv, or json.

    The header is fixed by the row type; values carry six significant digits.
    """
    rows = list(rows)
    if not rows:
        raise EmptyInput("no rows to write")
    kinds = {type(r) for r in rows}
    if len(kinds) != 1 or kinds.pop() not in (ReportRow, SweepRow):
        raise ValueError("rows must be all ReportRow or all SweepRow")
    is_sweep = isinstance(rows[0], SweepRow)

    if fmt == "json":
        payload = [
            dict(zip((SWEEP_HEADER if is_sweep else REPORT_HEADER).split(","),
                     _sweep_cells(r) if is_sweep else _report_cells(r)))
            for r in rows
        ]
        text = json.dumps(payload, indent=2) + "\n"
    elif fmt in ("csv", "tsv"):
        sep = "\t" if fmt == "tsv" else ","
        header = SWEEP_HEADER if is_sweep else REPORT_HEADER
        lines = [header.replace(",", sep)]
        for r in rows:
            lines.append(sep.join(_sweep_cells(r) if is_sweep else _report_cells(r)))
        text = "\n".join(lines) + "\n"
    else:
        raise ValueError(f"unknown format {fmt!r}; expected csv, tsv, or json")
    Path(path).write_text(text)


def read_report(path) -> list[ReportRow]:
    """Parse a CSV report written by :func:`write_report`."""
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != REPORT_HEADER:
        raise ValueError(f"{path} does not start with the report header")
    rows = []
    for line in lines[1:]:
        c = line.split(",")
        rows.append(
            ReportRow(
                condition=c[0], logging_mode=c[1], estimator=c[2],
                bias=float(c[3]), sd=float(c[4]), rmse=float(c[5]),
                reps=int(c[6]), mc_iters=int(c[7]), seed=int(c[8]),
            )
        )
    return rows


def read_sweep(path) -> list[SweepRow]:
    """Parse a TSV sweep series written by :func:`write_report`."""
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != SWEEP_HEADER.replace(",", "\t"):
        raise ValueError(f"{path} does not start with the sweep header")
    rows = []
    for line in lines[1:]:
        c = line.split("\t")
        rows.append(
            SweepRow(
                size=int(c[0]), estimator=c[1],
                bias=float(c[2]), bias_se=float(c[3]),
                rmse=float(c[4]), rmse_se=float(c[5]),
            )
        )
    return rows


def render_sweep_svg(series, path) -> None:
    """Line chart of RMSE against sample size, one polyline per estimator.

    Error bars show plus/minus one standard error where available.  Purely
    decorative; the TSV series is the numeric artifact.
    """
    rows = list(series)
    if not rows:
        raise EmptyInput("empty sweep series")
    sizes = sorted({r.size for r in rows})
    if len(sizes) < 2:
        raise ValueError("need at least two sizes to draw a sweep")
    estimators = list(dict.fromkeys(r.estimator for r in rows))

    width, height = 640, 420
    left, right, top, bottom = 70, 20, 20, 60
    plot_w, plot_h = width - left - right, height - top - bottom

    x_lo, x_hi = min(sizes), max(sizes)
    y_candidates = [r.rmse + (r.rmse_se if math.isfinite(r.rmse_se) else 0.0) for r in rows]
    y_hi = max(y_candidates) * 1.05 or 1.0
    y_lo = 0.0

    def sx(v):
        return left + plot_w * (v - x_lo) / (x_hi - x_lo)

    def sy(v):
        return top + plot_h * (1.0 - (v - y_lo) / (y_hi - y_lo))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{left}" y1="{top + plot_h}" x2="{left + plot_w}" y2="{top + plot_h}" '
        'stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + plot_h}" stroke="black"/>',
        f'<text x="{left + plot_w / 2:.1f}" y="{height - 12}" text-anchor="middle" '
        'font-size="14">sample size</text>',
        f'<text x="18" y="{top + plot_h / 2:.1f}" text-anchor="middle" font-size="14" '
        f'transform="rotate(-90 18 {top + plot_h / 2:.1f})">RMSE</text>',
    ]
    for v in sizes:
        parts.append(
            f'<text x="{sx(v):.1f}" y="{top + plot_h + 18}" text-anchor="middle" '
            f'font-size="11">{v}</text>'
        )
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        v = y_lo + frac * (y_hi - y_lo)
        parts.append(
            f'<text x="{left - 6}" y="{sy(v) + 4:.1f}" text-anchor="end" '
            f'font-size="11">{format_number(v)}</text>'
        )

    for i, est in enumerate(estimators):
        color = _SVG_PALETTE[i % len(_SVG_PALETTE)]
        pts = sorted(
            ((r.size, r) for r in rows if r.estimator == est), key=lambda t: t[0]
        )
        points = " ".join(f"{sx(s):.1f},{sy(r.rmse):.1f}" for s, r in pts)
        parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{points}"/>'
        )
        for s, r in pts:
            parts.append(
                f'<circle cx="{sx(s):.1f}" cy="{sy(r.rmse):.1f}" r="3" fill="{color}"/>'
            )
            if math.isfinite(r.rmse_se) and r.rmse_se > 0:
                y0, y1 = sy(r.rmse - r.rmse_se), sy(r.rmse + r.rmse_se)
                x = sx(s)
                parts.append(
                    f'<line x1="{x:.1f}" y1="{y0:.1f}" x2="{x:.1f}" y2="{y1:.1f}" '
                    f'stroke="{color}" stroke-width="1"/>'
                )
        parts.append(
            f'<text x="{left + plot_w - 6}" y="{top + 16 + 16 * i}" text-anchor="end" '
            f'font-size="12" fill="{color}">{est}</text>'
        )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")
