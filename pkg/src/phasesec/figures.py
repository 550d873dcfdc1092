"""Deterministic SVG rendering of section scatters and scan histograms.

Everything is emitted as standalone SVG 1.1 with fixed-precision
coordinates and no timestamps or random ids, so equal inputs give equal
bytes. That keeps figures diffable and lets the determinism tests
compare renders directly instead of approximating pixels.
"""

from __future__ import annotations

from xml.sax.saxutils import escape

from .sections import plane_basis

__all__ = [
    "axis_label",
    "render_scatter_svg",
    "render_heatmap_svg",
    "render_marginal_svg",
]

_FONT = 'font-family="DejaVu Sans, sans-serif"'

# panel geometry (pixels)
_PANEL_W = 270.0
_PANEL_H = 240.0
_MARGIN_L = 52.0
_MARGIN_R = 12.0
_MARGIN_T = 30.0
_MARGIN_B = 40.0


def _fmt(value):
    """Fixed two-decimal pixel coordinate."""
    return f"{value:.2f}"


def _fmtv(value):
    """Tick/annotation value, compact but unambiguous."""
    return f"{value:.4g}"


def axis_label(row, names):
    """Readable linear-combination label for one plane basis vector."""
    terms = []
    for coeff, name in zip(row, names):
        if abs(coeff) < 1e-9:
            continue
        if abs(abs(coeff) - 1.0) < 1e-9:
            term = name
        else:
            term = f"{abs(coeff):.3g} {name}"
        terms.append(("- " if coeff < 0 else "+ ") + term)
    if not terms:
        return "0"
    first = terms[0]
    first = "-" + first[2:] if first.startswith("- ") else first[2:]
    return " ".join([first] + terms[1:])


def _bounds(values, fallback=(-1.0, 1.0)):
    if len(values) == 0:
        return fallback
    lo = float(min(values))
    hi = float(max(values))
    if hi - lo < 1e-12:
        pad = max(1e-6, abs(hi) * 0.1, 0.5)
        return lo - pad, hi + pad
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def _panel_transform(bounds_u, bounds_v, origin_x, origin_y):
    """Affine data->pixel maps for one panel's plot box."""
    box_w = _PANEL_W - _MARGIN_L - _MARGIN_R
    box_h = _PANEL_H - _MARGIN_T - _MARGIN_B
    su = box_w / (bounds_u[1] - bounds_u[0])
    sv = box_h / (bounds_v[1] - bounds_v[0])

    def to_x(u):
        return origin_x + _MARGIN_L + (u - bounds_u[0]) * su

    def to_y(v):
        return origin_y + _MARGIN_T + box_h - (v - bounds_v[0]) * sv

    return to_x, to_y


def _text(x, y, s, size=11, anchor="middle", extra=""):
    return (f'<text x="{_fmt(x)}" y="{_fmt(y)}" {_FONT} '
            f'font-size="{size}" text-anchor="{anchor}"{extra}>'
            f'{escape(s)}</text>')


def _scatter_panel(cloud, verdict, names, origin_x, origin_y, index):
    parts = []
    box_x = origin_x + _MARGIN_L
    box_y = origin_y + _MARGIN_T
    box_w = _PANEL_W - _MARGIN_L - _MARGIN_R
    box_h = _PANEL_H - _MARGIN_T - _MARGIN_B
    pts = cloud.plane_points
    n = 0 if pts is None else len(pts)

    label = verdict.label.value if verdict is not None else "unclassified"
    parts.append(_text(origin_x + _PANEL_W / 2.0, origin_y + 18.0,
                       f"plane {index + 1}: {label} ({n})", size=12))
    parts.append(f'<rect x="{_fmt(box_x)}" y="{_fmt(box_y)}" '
                 f'width="{_fmt(box_w)}" height="{_fmt(box_h)}" '
                 f'fill="none" stroke="black" stroke-width="1"/>')

    bu = _bounds(pts[:, 0] if n else ())
    bv = _bounds(pts[:, 1] if n else ())
    to_x, to_y = _panel_transform(bu, bv, origin_x, origin_y)

    for value, px in ((bu[0], to_x(bu[0])), (bu[1], to_x(bu[1]))):
        parts.append(_text(px, box_y + box_h + 14.0, _fmtv(value), size=9))
    for value, py in ((bv[0], to_y(bv[0])), (bv[1], to_y(bv[1]))):
        parts.append(_text(box_x - 4.0, py + 3.0, _fmtv(value), size=9,
                           anchor="end"))

    basis = plane_basis(cloud.plane)
    parts.append(_text(origin_x + _PANEL_W / 2.0,
                       origin_y + _PANEL_H - 6.0,
                       axis_label(basis[0], names), size=10))
    parts.append(_text(origin_x + 12.0, origin_y + _PANEL_H / 2.0,
                       axis_label(basis[1], names), size=10,
                       extra=(f' transform="rotate(-90 {_fmt(origin_x + 12.0)}'
                              f' {_fmt(origin_y + _PANEL_H / 2.0)})"')))

    if n == 0:
        parts.append(_text(box_x + box_w / 2.0, box_y + box_h / 2.0,
                           "Empty", size=14))
    else:
        for u, v in pts:
            parts.append(f'<circle cx="{_fmt(to_x(float(u)))}" '
                         f'cy="{_fmt(to_y(float(v)))}" r="1.20" '
                         f'fill="black"/>')
    return "\n".join(parts)


def _auto_layout(n):
    if n <= 3:
        return 1, max(n, 1)
    if n == 4:
        return 2, 2
    cols = 3
    return (n + cols - 1) // cols, cols


def render_scatter_svg(panels, coord_names, layout=None):
    """One scatter panel per (cloud, verdict) pair, verdict as title.

    `panels` is a sequence of (SectionCloud, Verdict or None). layout
    is (rows, cols); by default six panels render as 2 x 3, mirroring
    the section figures this package produces for the two models.
    """
    panels = list(panels)
    rows, cols = layout if layout is not None else _auto_layout(len(panels))
    if rows * cols < len(panels):
        raise ValueError("layout too small for the panel count")
    width = cols * _PANEL_W
    height = rows * _PANEL_H
    body = []
    for k, (cloud, verdict) in enumerate(panels):
        r, c = divmod(k, cols)
        body.append(_scatter_panel(cloud, verdict, coord_names,
                                   c * _PANEL_W, r * _PANEL_H, k))
    return _document(width, height, "\n".join(body))


def _gray(proportion):
    v = min(max(proportion, 0.0), 1.0)
    level = round(255.0 * (1.0 - v))
    return f"#{level:02x}{level:02x}{level:02x}"


def _document(width, height, body):
    return (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{_fmt(width)}" height="{_fmt(height)}" '
        f'viewBox="0 0 {_fmt(width)} {_fmt(height)}">\n'
        f'<rect width="{_fmt(width)}" height="{_fmt(height)}" '
        f'fill="white"/>\n'
        f"{body}\n</svg>\n"
    )


def _axis_ticks(values):
    """Indices to label: all if few, else an even thinning."""
    n = len(values)
    if n <= 12:
        return list(range(n))
    step = (n + 11) // 12
    return list(range(0, n, step))


def render_heatmap_svg(eps1_values, eps2_values, proportions,
                       title="proportion of point-like sections"):
    """Grid heatmap, white at 0 to black at 1, axis 1 horizontal."""
    n1 = len(eps1_values)
    n2 = len(eps2_values)
    cell = 34.0 if max(n1, n2) <= 15 else 510.0 / max(n1, n2)
    ml, mt, mr, mb = 64.0, 40.0, 16.0, 46.0
    width = ml + n1 * cell + mr
    height = mt + n2 * cell + mb
    body = [_text(ml + n1 * cell / 2.0, 22.0, title, size=13)]
    for i in range(n1):
        for j in range(n2):
            x = ml + i * cell
            y = mt + (n2 - 1 - j) * cell
            body.append(
                f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(cell)}" '
                f'height="{_fmt(cell)}" fill="{_gray(proportions[i][j])}"/>')
    body.append(f'<rect x="{_fmt(ml)}" y="{_fmt(mt)}" '
                f'width="{_fmt(n1 * cell)}" height="{_fmt(n2 * cell)}" '
                f'fill="none" stroke="black" stroke-width="1"/>')
    for i in _axis_ticks(eps1_values):
        body.append(_text(ml + (i + 0.5) * cell, mt + n2 * cell + 14.0,
                          _fmtv(eps1_values[i]), size=9))
    for j in _axis_ticks(eps2_values):
        body.append(_text(ml - 6.0, mt + (n2 - 1 - j + 0.5) * cell + 3.0,
                          _fmtv(eps2_values[j]), size=9, anchor="end"))
    body.append(_text(ml + n1 * cell / 2.0, height - 8.0, "eps1", size=11))
    body.append(_text(16.0, mt + n2 * cell / 2.0, "eps2", size=11,
                      extra=(f' transform="rotate(-90 16.00 '
                             f'{_fmt(mt + n2 * cell / 2.0)})"')))
    return _document(width, height, "\n".join(body))


def render_marginal_svg(eps1_values, marginal,
                        title="mean proportion by eps1"):
    """Bar chart of the axis-1 marginal, y fixed to [0, 1]."""
    n = len(eps1_values)
    bar = 40.0 if n <= 13 else 520.0 / n
    ml, mt, mr, mb = 56.0, 40.0, 16.0, 46.0
    plot_h = 220.0
    width = ml + n * bar + mr
    height = mt + plot_h + mb
    body = [_text(ml + n * bar / 2.0, 22.0, title, size=13)]
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = mt + plot_h * (1.0 - frac)
        body.append(f'<line x1="{_fmt(ml)}" y1="{_fmt(y)}" '
                    f'x2="{_fmt(ml + n * bar)}" y2="{_fmt(y)}" '
                    f'stroke="#cccccc" stroke-width="1"/>')
        body.append(_text(ml - 6.0, y + 3.0, _fmtv(frac), size=9,
                          anchor="end"))
    for i, value in enumerate(marginal):
        v = min(max(float(value), 0.0), 1.0)
        h = plot_h * v
        x = ml + i * bar + 0.1 * bar
        body.append(f'<rect x="{_fmt(x)}" y="{_fmt(mt + plot_h - h)}" '
                    f'width="{_fmt(0.8 * bar)}" height="{_fmt(h)}" '
                    f'fill="#555555"/>')
        body.append(_text(ml + (i + 0.5) * bar, mt + plot_h - h - 4.0,
                          f"{float(value):.3f}", size=8))
    body.append(f'<rect x="{_fmt(ml)}" y="{_fmt(mt)}" '
                f'width="{_fmt(n * bar)}" height="{_fmt(plot_h)}" '
                f'fill="none" stroke="black" stroke-width="1"/>')
    for i in _axis_ticks(eps1_values):
        body.append(_text(ml + (i + 0.5) * bar, mt + plot_h + 14.0,
                          _fmtv(eps1_values[i]), size=9))
    body.append(_text(ml + n * bar / 2.0, height - 8.0, "eps1", size=11))
    return _document(width, height, "\n".join(body))
