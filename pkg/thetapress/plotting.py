"""
Static SVG line plot of the lower and upper surrogates against theta.
"""

import logging
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

from thetapress.models import PressureProfile

logger = logging.getLogger(__name__)

WIDTH, HEIGHT = 800, 500
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 70, 180, 40, 60
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
TICKS = 5


def _scale(value: float, low: float, high: float, start: float, end: float) -> float:
    if high == low:
        return (start + end) / 2
    return start + (value - low) / (high - low) * (end - start)


def _series(profiles: Sequence[PressureProfile]) -> dict[str, list[PressureProfile]]:
    groups: dict[str, list[PressureProfile]] = {}
    for profile in profiles:
        label = "strings" if profile.epsilon is None else f"eps={profile.epsilon:g}"
        groups.setdefault(label, []).append(profile)
    return {label: sorted(group, key=lambda p: p.theta) for label, group in groups.items()}


def render_pressure_svg(profiles: Sequence[PressureProfile], title: str = "pressure vs theta") -> str:
    """Solid lines for upper surrogates, dashed for lower, one color per radius"""
    if not profiles:
        raise ValueError("nothing to plot")
    values = [v for p in profiles for v in (p.lower, p.upper)]
    y_low, y_high = min(values), max(values)
    pad = 0.05 * (y_high - y_low) if y_high > y_low else 0.5
    y_low, y_high = y_low - pad, y_high + pad
    left, right = MARGIN_LEFT, WIDTH - MARGIN_RIGHT
    top, bottom = MARGIN_TOP, HEIGHT - MARGIN_BOTTOM

    def point(theta: float, value: float) -> str:
        return f"{_scale(theta, 0.0, 1.0, left, right):.2f},{_scale(value, y_low, y_high, bottom, top):.2f}"

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.0f}" y="24" text-anchor="middle" font-size="16">{escape(title)}</text>',
        f'<line x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{bottom}" stroke="black"/>',
    ]
    for i in range(TICKS + 1):
        theta = i / TICKS
        x = _scale(theta, 0.0, 1.0, left, right)
        parts.append(f'<line x1="{x:.2f}" y1="{bottom}" x2="{x:.2f}" y2="{bottom + 5}" stroke="black"/>')
        parts.append(f'<text x="{x:.2f}" y="{bottom + 20}" text-anchor="middle">{theta:g}</text>')
        value = y_low + (y_high - y_low) * i / TICKS
        y = _scale(value, y_low, y_high, bottom, top)
        parts.append(f'<line x1="{left - 5}" y1="{y:.2f}" x2="{left}" y2="{y:.2f}" stroke="black"/>')
        parts.append(f'<text x="{left - 8}" y="{y + 4:.2f}" text-anchor="end">{value:.3f}</text>')
    parts.append(f'<text x="{(left + right) / 2:.0f}" y="{HEIGHT - 15}" text-anchor="middle">theta</text>')

    for index, (label, group) in enumerate(_series(profiles).items()):
        color = PALETTE[index % len(PALETTE)]
        for attribute, dash in (("upper", ""), ("lower", ' stroke-dasharray="6,4"')):
            path = " ".join(point(p.theta, getattr(p, attribute)) for p in group)
            parts.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="2"{dash}/>')
        for p in group:
            x, y = point(p.theta, p.upper).split(",")
            parts.append(f'<circle cx="{x}" cy="{y}" r="3" fill="{color}"/>')
        legend_y = top + 20 * index
        parts.append(
            f'<line x1="{right + 15}" y1="{legend_y}" x2="{right + 40}" y2="{legend_y}" stroke="{color}" '
            f'stroke-width="2"/>'
        )
        parts.append(f'<text x="{right + 45}" y="{legend_y + 4}">{escape(label)}</text>')
    parts.append(
        f'<text x="{right + 15}" y="{bottom}" font-size="11">solid: upper, dashed: lower</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_pressure_svg(path: Path, profiles: Sequence[PressureProfile], title: str = "pressure vs theta") -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_pressure_svg(profiles, title), encoding="utf-8")
    logger.info(f"wrote {path}")
    return path
