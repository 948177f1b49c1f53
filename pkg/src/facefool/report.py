"""Evaluation metrics, CSV reports, and SVG bar charts.

Two metrics describe every attack run: the relative decrease in the
classifier's confidence in the true class, and the fraction of attacked
images whose predicted class flipped. Reports aggregate per-image rows,
serialize to a fixed CSV layout, and render to standalone SVG figures
with no display dependency.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence


def conf_decrease(baseline_conf: float, attacked_conf: float) -> float:
    """Relative drop in true-class confidence: (baseline - attacked) / baseline.

    Negative when the attack raised the confidence; that information is
    kept, not clamped. Undefined for a zero baseline.
    """
    if not (0.0 < baseline_conf <= 1.0):
        raise ValueError(f"baseline confidence must be in (0, 1], got {baseline_conf}")
    if not (0.0 <= attacked_conf <= 1.0):
        raise ValueError(f"attacked confidence must be in [0, 1], got {attacked_conf}")
    return (baseline_conf - attacked_conf) / baseline_conf


def misclass_rate(outcomes: Sequence) -> float:
    """Fraction of outcomes whose predicted class differs from the true one."""
    if not outcomes:
        raise ValueError("misclassification rate over zero outcomes is undefined")
    return sum(1 for o in outcomes if o.misclassified) / len(outcomes)


@dataclass(frozen=True)
class ImageResult:
    """One row of an evaluation report."""

    image_id: str
    true_class: str
    baseline_conf: float
    attacked_conf: float
    conf_decrease: float
    misclassified: bool
    queries: int


@dataclass(frozen=True)
class EvaluationReport:
    """Per-image and aggregate results for one attack over a test set."""

    attack_kind: str
    per_image: tuple[ImageResult, ...]
    mean_conf_decrease: float
    misclass_rate: float
    seed: int
    oracle_descriptor: str

    def __post_init__(self):
        if not self.per_image:
            raise ValueError("a report needs at least one image")
        mean = sum(r.conf_decrease for r in self.per_image) / len(self.per_image)
        rate = sum(1 for r in self.per_image if r.misclassified) / len(self.per_image)
        # 1e-6 tolerance so reports re-read from 6-decimal CSVs stay valid
        if abs(mean - self.mean_conf_decrease) > 1e-6:
            raise ValueError(
                f"mean_conf_decrease {self.mean_conf_decrease} != recomputed {mean}"
            )
        if abs(rate - self.misclass_rate) > 1e-6:
            raise ValueError(
                f"misclass_rate {self.misclass_rate} != recomputed {rate}"
            )


def build_report(
    attack_kind: str,
    outcomes: Sequence,
    image_ids: Sequence[str],
    *,
    seed: int = 0,
    oracle_descriptor: str = "unknown",
) -> EvaluationReport:
    """Aggregate attack outcomes into a report, sorted by image id."""
    if not outcomes:
        raise ValueError("cannot build a report from zero outcomes")
    if len(outcomes) != len(image_ids):
        raise ValueError(f"{len(outcomes)} outcomes but {len(image_ids)} image ids")
    kinds = {o.kind for o in outcomes}
    if kinds != {attack_kind}:
        raise ValueError(f"mixed or mismatched attack kinds: {sorted(kinds)}")
    rows = []
    for image_id, o in sorted(zip(image_ids, outcomes), key=lambda p: p[0]):
        base = o.baseline_probs[o.true_label]
        hit = o.attacked_probs[o.true_label]
        rows.append(
            ImageResult(
                image_id=image_id,
                true_class=str(o.true_label),
                baseline_conf=base,
                attacked_conf=hit,
                conf_decrease=conf_decrease(base, hit),
                misclassified=o.misclassified,
                queries=o.queries_used,
            )
        )
    return EvaluationReport(
        attack_kind=attack_kind,
        per_image=tuple(rows),
        mean_conf_decrease=sum(r.conf_decrease for r in rows) / len(rows),
        misclass_rate=sum(1 for r in rows if r.misclassified) / len(rows),
        seed=seed,
        oracle_descriptor=oracle_descriptor,
    )


CSV_HEADER = "image_id,true_class,baseline_conf,attacked_conf,conf_decrease,misclassified,queries"


def write_csv(report: EvaluationReport, destination: str | Path) -> int:
    """Write the report; returns the byte count.

    Layout: the header, one row per image (floats at 6 decimals, booleans
    as true/false), then an aggregate row prefixed '#aggregate' carrying
    the attack kind, mean baseline/attacked confidences, the two aggregate
    metrics, and the total query count.
    """
    lines = [CSV_HEADER]
    for r in report.per_image:
        if "," in r.image_id or "," in r.true_class:
            raise ValueError(f"comma in CSV field: {r.image_id!r}/{r.true_class!r}")
        lines.append(
            f"{r.image_id},{r.true_class},{r.baseline_conf:.6f},"
            f"{r.attacked_conf:.6f},{r.conf_decrease:.6f},"
            f"{'true' if r.misclassified else 'false'},{r.queries}"
        )
    n = len(report.per_image)
    mean_base = sum(r.baseline_conf for r in report.per_image) / n
    mean_hit = sum(r.attacked_conf for r in report.per_image) / n
    total_q = sum(r.queries for r in report.per_image)
    lines.append(
        f"#aggregate,{report.attack_kind},{mean_base:.6f},{mean_hit:.6f},"
        f"{report.mean_conf_decrease:.6f},{report.misclass_rate:.6f},{total_q}"
    )
    data = ("\n".join(lines) + "\n").encode("utf-8")
    Path(destination).write_bytes(data)
    return len(data)


def read_csv(path: str | Path) -> EvaluationReport:
    """Parse a CSV written by :func:`write_csv` back into a report."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError(f"{path}: missing or wrong CSV header")
    rows: list[ImageResult] = []
    kind = None
    mean = rate = None
    for line in lines[1:]:
        if not line:
            continue
        cols = line.split(",")
        if len(cols) != 7:
            raise ValueError(f"{path}: expected 7 columns, got {len(cols)}: {line!r}")
        if cols[0] == "#aggregate":
            kind = cols[1]
            mean = float(cols[4])
            rate = float(cols[5])
            continue
        if cols[5] not in ("true", "false"):
            raise ValueError(f"{path}: bad misclassified literal {cols[5]!r}")
        rows.append(
            ImageResult(
                image_id=cols[0],
                true_class=cols[1],
                baseline_conf=float(cols[2]),
                attacked_conf=float(cols[3]),
                conf_decrease=float(cols[4]),
                misclassified=cols[5] == "true",
                queries=int(cols[6]),
            )
        )
    if kind is None or not rows:
        raise ValueError(f"{path}: missing aggregate row or image rows")
    return EvaluationReport(
        attack_kind=kind,
        per_image=tuple(rows),
        mean_conf_decrease=mean,
        misclass_rate=rate,
        seed=0,
        oracle_descriptor="parsed-csv",
    )


# ---------------------------------------------------------------------------
# SVG bar charts

CHART_WIDTH = 720
CHART_HEIGHT = 420
MARGIN_LEFT = 70
MARGIN_RIGHT = 20
MARGIN_TOP = 40
MARGIN_BOTTOM = 70
PLOT_WIDTH = CHART_WIDTH - MARGIN_LEFT - MARGIN_RIGHT
PLOT_HEIGHT = CHART_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM

METRICS = ("conf_decrease", "misclass_rate")

_METRIC_TITLES = {
    "conf_decrease": "mean confidence decrease in true class",
    "misclass_rate": "misclassification rate",
}


def _svg_bars(labels: Sequence[str], values: Sequence[float],
              title: str, y_label: str) -> str:
    y_min = min(0.0, min(values))
    y_max = max(1.0, max(values))
    span = y_max - y_min

    def y_pos(v: float) -> float:
        return MARGIN_TOP + (y_max - v) / span * PLOT_HEIGHT

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{CHART_WIDTH}" '
        f'height="{CHART_HEIGHT}" viewBox="0 0 {CHART_WIDTH} {CHART_HEIGHT}">',
        f'<rect width="{CHART_WIDTH}" height="{CHART_HEIGHT}" fill="white"/>',
        f'<text x="{CHART_WIDTH / 2}" y="24" text-anchor="middle" '
        f'font-family="sans-serif" font-size="16">{title}</text>',
    ]
    # horizontal gridlines with percentage labels at five even stops
    for k in range(5):
        v = y_min + span * k / 4
        y = y_pos(v)
        parts.append(
            f'<line x1="{MARGIN_LEFT}" y1="{y:.1f}" '
            f'x2="{MARGIN_LEFT + PLOT_WIDTH}" y2="{y:.1f}" '
            f'stroke="#cccccc" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{MARGIN_LEFT - 8}" y="{y + 4:.1f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{v * 100:.0f}%</text>'
        )
    parts.append(
        f'<text x="16" y="{MARGIN_TOP + PLOT_HEIGHT / 2}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 16 {MARGIN_TOP + PLOT_HEIGHT / 2})">{y_label}</text>'
    )
    slot = PLOT_WIDTH / len(values)
    bar_width = slot * 0.6
    zero_y = y_pos(0.0)
    for i, (label, value) in enumerate(zip(labels, values)):
        x = MARGIN_LEFT + i * slot + (slot - bar_width) / 2
        top = y_pos(max(value, 0.0))
        height = abs(y_pos(value) - zero_y)
        parts.append(
            f'<rect x="{x:.1f}" y="{top:.1f}" width="{bar_width:.1f}" '
            f'height="{height:.1f}" fill="#4878a8"/>'
        )
        caption_y = top - 5 if value >= 0 else y_pos(value) + 14
        parts.append(
            f'<text x="{x + bar_width / 2:.1f}" y="{caption_y:.1f}" '
            f'text-anchor="middle" font-family="sans-serif" font-size="11">'
            f"{value * 100:.1f}%</text>"
        )
        label_x = x + bar_width / 2
        label_y = MARGIN_TOP + PLOT_HEIGHT + 16
        transform = (
            f' transform="rotate(-60 {label_x:.1f} {label_y:.1f})"'
            if len(labels) > 12 else ""
        )
        anchor = "end" if len(labels) > 12 else "middle"
        parts.append(
            f'<text x="{label_x:.1f}" y="{label_y}" text-anchor="{anchor}" '
            f'font-family="sans-serif" font-size="11"{transform}>{label}</text>'
        )
    parts.append(
        f'<line x1="{MARGIN_LEFT}" y1="{zero_y:.1f}" '
        f'x2="{MARGIN_LEFT + PLOT_WIDTH}" y2="{zero_y:.1f}" '
        f'stroke="black" stroke-width="1"/>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_bar_chart(
    reports: Iterable[EvaluationReport],
    metric: str,
    destination: str | Path,
    per_image: bool = False,
) -> Path:
    """Render one bar per report (or per image) to a standalone SVG file."""
    reports = list(reports)
    if not reports:
        raise ValueError("need at least one report to render")
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; pick one of {METRICS}")
    if per_image:
        if len(reports) != 1:
            raise ValueError("per-image mode renders exactly one report")
        report = reports[0]
        labels = [r.image_id for r in report.per_image]
        if metric == "conf_decrease":
            values = [r.conf_decrease for r in report.per_image]
        else:
            values = [1.0 if r.misclassified else 0.0 for r in report.per_image]
        title = f"attack {report.attack_kind}: per-image {_METRIC_TITLES[metric]}"
        y_label = _METRIC_TITLES[metric]
    else:
        labels = [r.attack_kind for r in reports]
        values = [
            r.mean_conf_decrease if metric == "conf_decrease" else r.misclass_rate
            for r in reports
        ]
        title = _METRIC_TITLES[metric] + " by attack"
        y_label = _METRIC_TITLES[metric]
    destination = Path(destination)
    destination.write_text(_svg_bars(labels, values, title, y_label), encoding="utf-8")
    return destination
