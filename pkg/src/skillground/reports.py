"""CSV and SVG report writers for database stats and evaluation tables."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import IO

from .db import DbStats, Histogram
from .descriptors import GaitClass
from .retrieval import EvalCell, Method, QueryKind


def write_gait_dist_csv(stats: DbStats, fp: IO[str]) -> None:
    writer = csv.writer(fp)
    writer.writerow(["gait", "probability"])
    for gait in GaitClass:
        writer.writerow([gait.value, repr(stats.gait_dist[gait])])


def write_histogram_csv(hist: Histogram, fp: IO[str]) -> None:
    # full-precision floats so downstream sums reproduce exactly
    writer = csv.writer(fp)
    writer.writerow(["bin_lo", "bin_hi", "probability"])
    for lo, hi, p in zip(hist.edges, hist.edges[1:], hist.probs):
        writer.writerow([lo, hi, repr(float(p))])


def _svg_bars(labels: list[str], values: list[float], title: str) -> str:
    width, height, margin = 640, 360, 48
    plot_w, plot_h = width - 2 * margin, height - 2 * margin
    vmax = max(values) if values and max(values) > 0 else 1.0
    bar_w = plot_w / max(len(values), 1)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<text x="{width / 2}" y="24" text-anchor="middle" '
        f'font-family="sans-serif" font-size="16">{title}</text>',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
        f'y2="{height - margin}" stroke="black"/>',
    ]
    for i, (label, value) in enumerate(zip(labels, values)):
        bar_h = plot_h * value / vmax
        x = margin + i * bar_w
        y = height - margin - bar_h
        parts.append(
            f'<rect x="{x + 2:.1f}" y="{y:.1f}" width="{bar_w - 4:.1f}" '
            f'height="{bar_h:.1f}" fill="#4878a8"/>'
        )
        parts.append(
            f'<text x="{x + bar_w / 2:.1f}" y="{height - margin + 16}" '
            f'text-anchor="middle" font-family="sans-serif" font-size="10">'
            f"{label}</text>"
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_stats_reports(stats: DbStats, out_dir: str | Path, svg: bool = False) -> list[Path]:
    """Write gait/period/velocity reports; returns the created files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    created = []

    path = out / "gait_dist.csv"
    with path.open("w", newline="", encoding="utf-8") as fp:
        write_gait_dist_csv(stats, fp)
    created.append(path)
    for name, hist in (("period_hist", stats.period_hist), ("vel_hist", stats.vel_hist)):
        path = out / f"{name}.csv"
        with path.open("w", newline="", encoding="utf-8") as fp:
            write_histogram_csv(hist, fp)
        created.append(path)

    if svg:
        gait_labels = [g.value for g in GaitClass]
        gait_values = [stats.gait_dist[g] for g in GaitClass]
        svgs = [
            ("gait_dist.svg", gait_labels, gait_values, "gait distribution"),
            (
                "period_hist.svg",
                [f"{lo:g}" for lo in stats.period_hist.edges[:-1]],
                list(stats.period_hist.probs),
                "gait cycle period (s)",
            ),
            (
                "vel_hist.svg",
                [f"{lo:g}" for lo in stats.vel_hist.edges[:-1]],
                list(stats.vel_hist.probs),
                "velocity limit (m/s)",
            ),
        ]
        for filename, labels, values, title in svgs:
            path = out / filename
            path.write_text(_svg_bars(labels, values, title), encoding="utf-8")
            created.append(path)
    return created


def write_eval_csv(
    report: dict[tuple[Method, QueryKind], EvalCell], fp: IO[str]
) -> None:
    """Accuracy table: one method per row, one representation per column."""
    representations = []
    for _, rep in report:
        if rep not in representations:
            representations.append(rep)
    writer = csv.writer(fp)
    writer.writerow(["method"] + [rep.value for rep in representations])
    for method in Method:
        cells = [
            report[(method, rep)]
            for rep in representations
            if (method, rep) in report
        ]
        if not cells:
            continue
        writer.writerow(
            [method.value] + [f"{cell.correct}/{cell.total}" for cell in cells]
        )
