"""Deterministic SVG renderings of analysis tables.

The SVG is assembled from plain strings with fixed 2-decimal coordinates, so
identical inputs always produce identical bytes (suitable for golden-file
comparison).  No styling or font dependencies; everything is shapes and
default SVG text.
"""

from __future__ import annotations

from pathlib import Path

from .analysis import GapRecord, SubgroupRow
from .errors import MlpcError

WIDTH, HEIGHT = 720, 420
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 60, 20, 36, 50
SERIES_A = "#1f77b4"
SERIES_B = "#ff7f0e"
SERIES_DIFF = "#7f7f7f"


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _svg(body: list[str]) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
            f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">')
    return "\n".join([head, *body, "</svg>"]) + "\n"


class _Axes:
    """Linear mapping from data space to the plot rectangle."""

    def __init__(self, x_min, x_max, y_min, y_max):
        self.x_min, self.x_max = x_min, x_max
        self.y_min, self.y_max = y_min, y_max
        self.px0, self.px1 = MARGIN_L, WIDTH - MARGIN_R
        self.py0, self.py1 = HEIGHT - MARGIN_B, MARGIN_T

    def x(self, v: float) -> float:
        span = self.x_max - self.x_min or 1.0
        return self.px0 + (v - self.x_min) / span * (self.px1 - self.px0)

    def y(self, v: float) -> float:
        span = self.y_max - self.y_min or 1.0
        return self.py0 + (v - self.y_min) / span * (self.py1 - self.py0)

    def frame(self, body: list[str], *, x_label: str, y_label: str,
              y_ticks: list[float], title: str) -> None:
        body.append(f'<rect x="{self.px0}" y="{self.py1}" '
                    f'width="{self.px1 - self.px0}" height="{self.py0 - self.py1}" '
                    f'fill="none" stroke="#000000"/>')
        for tick in y_ticks:
            py = self.y(tick)
            body.append(f'<line x1="{self.px0 - 4}" y1="{_fmt(py)}" x2="{self.px0}" '
                        f'y2="{_fmt(py)}" stroke="#000000"/>')
            body.append(f'<text x="{self.px0 - 8}" y="{_fmt(py + 4)}" '
                        f'font-size="11" text-anchor="end">{_fmt(tick)}</text>')
        body.append(f'<text x="{(self.px0 + self.px1) // 2}" y="{HEIGHT - 12}" '
                    f'font-size="12" text-anchor="middle">{x_label}</text>')
        body.append(f'<text x="16" y="{(self.py0 + self.py1) // 2}" font-size="12" '
                    f'text-anchor="middle" transform="rotate(-90 16 '
                    f'{(self.py0 + self.py1) // 2})">{y_label}</text>')
        body.append(f'<text x="{(self.px0 + self.px1) // 2}" y="20" font-size="13" '
                    f'text-anchor="middle">{title}</text>')


def _polyline(axes: _Axes, points: list[tuple[float, float]], color: str) -> str:
    coords = " ".join(f"{_fmt(axes.x(px))},{_fmt(axes.y(py))}" for px, py in points)
    return f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.5"/>'


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    step = (hi - lo) / n or 1.0
    return [lo + i * step for i in range(n + 1)]


def render_gap_svg(records: list[GapRecord], path: str | Path, *,
                   title: str = "accuracy gap") -> None:
    """Two accuracy series plus their per-model difference, one x slot per model."""
    if not records:
        raise MlpcError("cannot render an empty gap table")
    values_a = [float(r.value_a) for r in records]
    values_b = [float(r.value_b) for r in records]
    diffs = [float(r.difference) for r in records]
    lo = min(0.0, min(values_a + values_b + diffs))
    hi = max(1.0, max(values_a + values_b + diffs))
    axes = _Axes(1, len(records), lo, hi)
    body: list[str] = []
    axes.frame(body, x_label=f"models (n={len(records)}, sorted by first series)",
               y_label=records[0].metric, y_ticks=_ticks(lo, hi), title=title)
    xs = list(range(1, len(records) + 1))
    if len(records) == 1:
        for v, color in ((values_a[0], SERIES_A), (values_b[0], SERIES_B),
                         (diffs[0], SERIES_DIFF)):
            body.append(f'<circle cx="{_fmt(axes.x(1))}" cy="{_fmt(axes.y(v))}" '
                        f'r="3" fill="{color}"/>')
    else:
        body.append(_polyline(axes, list(zip(xs, values_a)), SERIES_A))
        body.append(_polyline(axes, list(zip(xs, values_b)), SERIES_B))
        body.append(_polyline(axes, list(zip(xs, diffs)), SERIES_DIFF))
    for x in xs:
        px = axes.x(x)
        body.append(f'<line x1="{_fmt(px)}" y1="{axes.py0}" x2="{_fmt(px)}" '
                    f'y2="{axes.py0 + 4}" stroke="#000000"/>')
    Path(path).write_text(_svg(body), encoding="utf-8")


def _quartiles(values: list[float]) -> tuple[float, float, float]:
    """Q1/median/Q3 with linear interpolation between order statistics."""
    data = sorted(values)
    n = len(data)

    def q(frac: float) -> float:
        if n == 1:
            return data[0]
        pos = frac * (n - 1)
        lo = int(pos)
        hi = min(lo + 1, n - 1)
        return data[lo] + (pos - lo) * (data[hi] - data[lo])

    return q(0.25), q(0.5), q(0.75)


def render_subgroup_box_svg(rows: list[SubgroupRow], path: str | Path, *,
                            title: str = "subgroup accuracy by label count") -> None:
    """Box plots of per-model subgroup accuracy, one box per (label count, dataset).

    Whiskers extend to the most extreme points within 1.5 IQR of the quartile
    box; points beyond that are drawn individually.
    """
    if not rows:
        raise MlpcError("cannot render an empty subgroup table")
    datasets = sorted({r.dataset_id for r in rows})
    counts = sorted({r.label_count for r in rows})
    groups: dict[tuple[int, str], list[float]] = {}
    for r in rows:
        groups.setdefault((r.label_count, r.dataset_id), []).append(float(r.accuracy))
    axes = _Axes(0, len(counts), 0.0, 1.0)
    body: list[str] = []
    axes.frame(body, x_label="label count", y_label=f"accuracy ({rows[0].mode})",
               y_ticks=_ticks(0.0, 1.0), title=title)
    slot_w = (axes.px1 - axes.px0) / len(counts)
    box_w = min(28.0, slot_w / (len(datasets) + 1))
    palette = [SERIES_A, SERIES_B, "#2ca02c", "#d62728", "#9467bd", "#8c564b"]
    for ci, g in enumerate(counts):
        cx_slot = axes.px0 + (ci + 0.5) * slot_w
        body.append(f'<text x="{_fmt(cx_slot)}" y="{axes.py0 + 18}" font-size="11" '
                    f'text-anchor="middle">{g}</text>')
        for di, dataset in enumerate(datasets):
            values = groups.get((g, dataset))
            if not values:
                continue
            color = palette[di % len(palette)]
            cx = cx_slot + (di - (len(datasets) - 1) / 2) * (box_w + 6)
            q1, med, q3 = _quartiles(values)
            iqr = q3 - q1
            lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
            inliers = [v for v in values if lo_fence <= v <= hi_fence]
            whisk_lo, whisk_hi = min(inliers), max(inliers)
            x0, x1 = cx - box_w / 2, cx + box_w / 2
            body.append(f'<rect x="{_fmt(x0)}" y="{_fmt(axes.y(q3))}" '
                        f'width="{_fmt(box_w)}" height="{_fmt(axes.y(q1) - axes.y(q3))}" '
                        f'fill="none" stroke="{color}"/>')
            body.append(f'<line x1="{_fmt(x0)}" y1="{_fmt(axes.y(med))}" '
                        f'x2="{_fmt(x1)}" y2="{_fmt(axes.y(med))}" stroke="{color}" '
                        f'stroke-width="2"/>')
            for w in (whisk_lo, whisk_hi):
                body.append(f'<line x1="{_fmt(cx)}" y1="{_fmt(axes.y(q1 if w == whisk_lo else q3))}" '
                            f'x2="{_fmt(cx)}" y2="{_fmt(axes.y(w))}" stroke="{color}"/>')
                body.append(f'<line x1="{_fmt(cx - box_w / 4)}" y1="{_fmt(axes.y(w))}" '
                            f'x2="{_fmt(cx + box_w / 4)}" y2="{_fmt(axes.y(w))}" '
                            f'stroke="{color}"/>')
            for v in values:
                if v < lo_fence or v > hi_fence:
                    body.append(f'<circle cx="{_fmt(cx)}" cy="{_fmt(axes.y(v))}" '
                                f'r="2" fill="{color}"/>')
    for di, dataset in enumerate(datasets):
        color = palette[di % len(palette)]
        lx = axes.px0 + 10
        ly = MARGIN_T + 14 * (di + 1)
        body.append(f'<rect x="{lx}" y="{ly - 8}" width="10" height="10" fill="{color}"/>')
        body.append(f'<text x="{lx + 14}" y="{ly}" font-size="11">{dataset}</text>')
    Path(path).write_text(_svg(body), encoding="utf-8")


def render_plots(output_dir: str | Path, *, gap_records: list[GapRecord] | None = None,
                 subgroup_rows: list[SubgroupRow] | None = None) -> list[Path]:
    """Render whichever tables were provided into ``output_dir``."""
    if not gap_records and not subgroup_rows:
        raise MlpcError("nothing to render: no non-empty tables provided")
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    if gap_records:
        target = out / "gaps.svg"
        render_gap_svg(gap_records, target)
        written.append(target)
    if subgroup_rows:
        target = out / "subgroups.svg"
        render_subgroup_box_svg(subgroup_rows, target)
        written.append(target)
    return written
