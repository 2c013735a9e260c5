"""Minimal SVG plots for window-selection curves and effect bars."""
from __future__ import annotations

from xml.sax.saxutils import escape

W, H = 640, 400
LEFT, RIGHT, TOP, BOTTOM = 60, 20, 40, 50


def _frame(title: str, xlabel: str, ylabel: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2:.1f}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
        f'<text x="{W / 2:.1f}" y="{H - 10}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
        f'<text x="16" y="{H / 2:.1f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 16 {H / 2:.1f})">{escape(ylabel)}</text>',
        f'<line x1="{LEFT}" y1="{H - BOTTOM}" x2="{W - RIGHT}" y2="{H - BOTTOM}" stroke="black"/>',
        f'<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{H - BOTTOM}" stroke="black"/>',
    ]


def _scale(lo, hi, a, b):
    span = (hi - lo) or 1.0
    return lambda v: a + (v - lo) / span * (b - a)


def _yticks(lines, lo, hi, sy, k=5):
    for j in range(k + 1):
        v = lo + (hi - lo) * j / k
        y = sy(v)
        lines.append(f'<line x1="{LEFT - 4}" y1="{y:.1f}" x2="{LEFT}" y2="{y:.1f}" stroke="black"/>')
        lines.append(f'<text x="{LEFT - 6}" y="{y + 4:.1f}" text-anchor="end" font-size="10">{v:.2f}</text>')


def _xticks(lines, xs, sx):
    step = max(1, len(xs) // 15)
    for x in xs[::step]:
        px = sx(x)
        lines.append(f'<text x="{px:.1f}" y="{H - BOTTOM + 15}" text-anchor="middle" font-size="10">{x}</text>')


def pvalue_curve(taus, pvalues, threshold: float, title: str, tau_star: int | None = None) -> str:
    """p-value against window half-length with the selection threshold drawn."""
    taus = list(taus)
    lines = _frame(title, "tau (half-length of window)", "p-value")
    sx = _scale(min(taus) - 0.5, max(taus) + 0.5, LEFT, W - RIGHT)
    sy = _scale(0.0, 1.0, H - BOTTOM, TOP)
    _yticks(lines, 0.0, 1.0, sy)
    _xticks(lines, taus, sx)
    yt = sy(threshold)
    lines.append(
        f'<line x1="{LEFT}" y1="{yt:.1f}" x2="{W - RIGHT}" y2="{yt:.1f}" '
        'stroke="red" stroke-dasharray="6,4"/>'
    )
    if tau_star:
        xs = sx(tau_star + 0.5)
        lines.append(
            f'<line x1="{xs:.1f}" y1="{TOP}" x2="{xs:.1f}" y2="{H - BOTTOM}" '
            'stroke="gray" stroke-dasharray="2,3"/>'
        )
    pts = " ".join(f"{sx(t):.1f},{sy(p):.1f}" for t, p in zip(taus, pvalues))
    lines.append(f'<polyline points="{pts}" fill="none" stroke="navy" stroke-width="1.5"/>')
    for t, p in zip(taus, pvalues):
        lines.append(f'<circle cx="{sx(t):.1f}" cy="{sy(p):.1f}" r="3" fill="navy"/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def effect_bars(taus, estimates, pvalues, title: str) -> str:
    """Bars of the estimate per window, each labelled with its p-value."""
    taus = list(taus)
    lo = min(0.0, min(estimates))
    hi = max(0.0, max(estimates))
    pad = 0.1 * ((hi - lo) or 1.0)
    lo, hi = lo - pad, hi + pad
    lines = _frame(title, "tau", "estimate")
    sx = _scale(-0.5, len(taus) - 0.5, LEFT, W - RIGHT)
    sy = _scale(lo, hi, H - BOTTOM, TOP)
    _yticks(lines, lo, hi, sy)
    y0 = sy(0.0)
    bw = 0.6 * (W - LEFT - RIGHT) / len(taus)
    for j, (t, e, p) in enumerate(zip(taus, estimates, pvalues)):
        cx = sx(j)
        top, bot = sorted((sy(e), y0))
        lines.append(
            f'<rect x="{cx - bw / 2:.1f}" y="{top:.1f}" width="{bw:.1f}" '
            f'height="{bot - top:.1f}" fill="steelblue"/>'
        )
        lines.append(f'<text x="{cx:.1f}" y="{H - BOTTOM + 15}" text-anchor="middle" font-size="10">{t}</text>')
        label = "-" if p is None else f"p={p:.3f}"
        lines.append(f'<text x="{cx:.1f}" y="{top - 4:.1f}" text-anchor="middle" font-size="10">{label}</text>')
    lines.append(f'<line x1="{LEFT}" y1="{y0:.1f}" x2="{W - RIGHT}" y2="{y0:.1f}" stroke="gray"/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
