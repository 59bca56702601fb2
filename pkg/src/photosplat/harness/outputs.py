"""Comparison artifacts: the per-iteration trace CSV, the mean/stddev summary
CSV, and an SVG chart of mean PSNR per label over iterations.

Trace rows are `label,seed,iteration,psnr,loss,gaussians,ms` with psnr
serialized as "inf" for identical images; the ms column is empty when timing
was disabled (timings are wall-clock and would break byte-level determinism).
"""

from __future__ import annotations

import math
from pathlib import Path

from ..errors import InvalidArgumentError, LoadError
from ..splat.metrics import format_psnr
from .compare import ComparisonResult, SummaryRow, TraceRecord, TrainingTrace

TRACE_HEADER = "label,seed,iteration,psnr,loss,count,ms"
SUMMARY_HEADER = "label,iteration,psnr_mean,psnr_std,loss_mean,count_mean"

_PALETTE = ("#1f6fb2", "#c43d3d", "#3d9950", "#8b5aa8", "#c08a2e", "#47a5a5")


def _trace_lines(traces: list[TrainingTrace]) -> list[str]:
    lines = [TRACE_HEADER]
    for trace in traces:
        for rec in trace.records:
            ms = "" if rec.ms is None else f"{rec.ms:.3f}"
            lines.append(
                f"{trace.label},{trace.seed},{rec.iteration},"
                f"{format_psnr(rec.psnr)},{rec.loss:.10e},{rec.count},{ms}"
            )
    return lines


def write_trace_csv(traces: list[TrainingTrace], path) -> None:
    if not traces or all(not t.records for t in traces):
        raise InvalidArgumentError("no trace records to write")
    Path(path).write_text("\n".join(_trace_lines(traces)) + "\n")


def parse_trace_csv(path) -> list[TrainingTrace]:
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise LoadError(f"cannot read {path}: {exc}") from exc
    if not lines or lines[0] != TRACE_HEADER:
        raise LoadError(f"{path}: missing trace header")
    traces: dict[tuple[str, int], TrainingTrace] = {}
    for ln, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 7:
            raise LoadError(f"{path}:{ln}: expected 7 fields")
        label, seed, iteration, psnr_s, loss, count, ms = parts
        key = (label, int(seed))
        trace = traces.setdefault(key, TrainingTrace(label=label, seed=int(seed)))
        trace.records.append(
            TraceRecord(
                iteration=int(iteration),
                psnr=math.inf if psnr_s == "inf" else float(psnr_s),
                loss=float(loss),
                count=int(count),
                ms=None if ms == "" else float(ms),
            )
        )
    return list(traces.values())


def write_summary_csv(summary: list[SummaryRow], path) -> None:
    lines = [SUMMARY_HEADER]
    for row in summary:
        loss = "" if row.loss_mean is None else f"{row.loss_mean:.10e}"
        count = "" if row.count_mean is None else f"{row.count_mean:.3f}"
        lines.append(
            f"{row.label},{row.iteration},{format_psnr(row.psnr_mean)},"
            f"{row.psnr_std:.6f},{loss},{count}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def _svg_chart(summary: list[SummaryRow], width=640, height=400) -> str:
    labeled = [r for r in summary if r.label != "gap" and math.isfinite(r.psnr_mean)]
    if not labeled:
        raise InvalidArgumentError("nothing to chart")
    labels = sorted({r.label for r in labeled})
    xs = sorted({r.iteration for r in labeled})
    ymin = min(r.psnr_mean for r in labeled)
    ymax = max(r.psnr_mean for r in labeled)
    pad_y = max(0.5, 0.05 * (ymax - ymin))
    ymin -= pad_y
    ymax += pad_y
    ml, mr, mt, mb = 56, 16, 24, 44
    pw, ph = width - ml - mr, height - mt - mb

    def px(it):
        return ml + pw * (it - xs[0]) / max(xs[-1] - xs[0], 1)

    def py(v):
        return mt + ph * (1.0 - (v - ymin) / (ymax - ymin))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{mt + ph}" stroke="black"/>',
        f'<line x1="{ml}" y1="{mt + ph}" x2="{ml + pw}" y2="{mt + ph}" stroke="black"/>',
        f'<text x="{ml + pw / 2:.0f}" y="{height - 8}" text-anchor="middle" '
        f'font-size="12">iteration</text>',
        f'<text x="14" y="{mt + ph / 2:.0f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 14 {mt + ph / 2:.0f})">PSNR (dB)</text>',
    ]
    for tick in (xs[0], xs[len(xs) // 2], xs[-1]):
        parts.append(
            f'<text x="{px(tick):.1f}" y="{mt + ph + 16}" text-anchor="middle" '
            f'font-size="10">{tick}</text>'
        )
    for frac in (0.0, 0.5, 1.0):
        val = ymin + frac * (ymax - ymin)
        parts.append(
            f'<text x="{ml - 6}" y="{py(val):.1f}" text-anchor="end" '
            f'font-size="10">{val:.1f}</text>'
        )
    for li, label in enumerate(labels):
        color = _PALETTE[li % len(_PALETTE)]
        pts = [
            f"{px(r.iteration):.2f},{py(r.psnr_mean):.2f}"
            for r in sorted((r for r in labeled if r.label == label), key=lambda r: r.iteration)
        ]
        parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
            f'points="{" ".join(pts)}"/>'
        )
        parts.append(
            f'<text x="{ml + pw - 8}" y="{mt + 14 + 14 * li}" text-anchor="end" '
            f'font-size="11" fill="{color}">{label}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts)


def write_outputs(result: ComparisonResult, out_dir) -> dict[str, Path]:
    """Write trace.csv, summary.csv, and psnr.svg; returns the paths."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "trace": out / "trace.csv",
            "summary": out / "summary.csv",
            "chart": out / "psnr.svg",
        }
        write_trace_csv(result.traces, paths["trace"])
        write_summary_csv(result.summary, paths["summary"])
        paths["chart"].write_text(_svg_chart(result.summary) + "\n")
    except OSError as exc:
        raise LoadError(f"cannot write outputs to {out}: {exc}") from exc
    return paths
