"""A small deterministic SVG writer and the color maps used by the figures."""
from __future__ import annotations

from xml.sax.saxutils import escape, quoteattr

import numpy as np

EMPTY_FILL = "#d9d9d9"

COLORMAPS = {
    # viridis-like sequential ramp for probabilities
    "sequential": ["#440154", "#3b528b", "#21918c", "#5ec962", "#fde725"],
    # blue-white-red for signed projections
    "diverging": ["#2166ac", "#92c5de", "#f7f7f7", "#f4a582", "#b2182b"],
}


def _num(v: float) -> str:
    s = f"{float(v):.2f}"
    return "0" if s in ("-0.00", "0.00") else s.rstrip("0").rstrip(".")


def _hex_to_rgb(h: str) -> np.ndarray:
    return np.array([int(h[i:i + 2], 16) for i in (1, 3, 5)], dtype=float)


def colormap(name: str, value, vmin: float = 0.0, vmax: float = 1.0) -> str:
    """Hex color for ``value`` on a linear ramp; None maps to the empty fill."""
    if value is None:
        return EMPTY_FILL
    stops = COLORMAPS[name]
    x = 0.0 if vmax == vmin else (float(value) - vmin) / (vmax - vmin)
    x = min(max(x, 0.0), 1.0) * (len(stops) - 1)
    i = min(int(x), len(stops) - 2)
    frac = x - i
    rgb = (1 - frac) * _hex_to_rgb(stops[i]) + frac * _hex_to_rgb(stops[i + 1])
    return "#" + "".join(f"{int(round(c)):02x}" for c in rgb)


class SvgCanvas:
    def __init__(self, width: float, height: float):
        self.width, self.height = width, height
        self._items: list[str] = []

    @staticmethod
    def _attrs(**kw) -> str:
        parts = []
        for key, val in kw.items():
            if val is None:
                continue
            name = key.rstrip("_").replace("_", "-")
            if isinstance(val, (int, float, np.floating, np.integer)):
                val = _num(val)
            parts.append(f"{name}={quoteattr(str(val))}")
        return " ".join(parts)

    def rect(self, x, y, w, h, fill="none", stroke=None, **kw):
        self._items.append(f"<rect {self._attrs(x=x, y=y, width=w, height=h, fill=fill, stroke=stroke, **kw)}/>")

    def line(self, x1, y1, x2, y2, stroke="#000000", **kw):
        self._items.append(f"<line {self._attrs(x1=x1, y1=y1, x2=x2, y2=y2, stroke=stroke, **kw)}/>")

    def circle(self, cx, cy, r, fill="#000000", **kw):
        self._items.append(f"<circle {self._attrs(cx=cx, cy=cy, r=r, fill=fill, **kw)}/>")

    def polyline(self, xs, ys, stroke="#000000", fill="none", **kw):
        pts = " ".join(f"{_num(x)},{_num(y)}" for x, y in zip(xs, ys))
        self._items.append(f"<polyline {self._attrs(points=pts, stroke=stroke, fill=fill, **kw)}/>")

    def polygon(self, xs, ys, fill="#000000", **kw):
        pts = " ".join(f"{_num(x)},{_num(y)}" for x, y in zip(xs, ys))
        self._items.append(f"<polygon {self._attrs(points=pts, fill=fill, **kw)}/>")

    def text(self, x, y, s, size=11, anchor="start", rotate=None, **kw):
        transform = None if rotate is None else f"rotate({_num(rotate)} {_num(x)} {_num(y)})"
        attrs = self._attrs(x=x, y=y, font_size=size, text_anchor=anchor, transform=transform,
                            font_family="sans-serif", **kw)
        self._items.append(f"<text {attrs}>{escape(str(s))}</text>")

    def to_string(self) -> str:
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{_num(self.width)}" '
                f'height="{_num(self.height)}" viewBox="0 0 {_num(self.width)} {_num(self.height)}">')
        body = "\n".join(self._items)
        return f"{head}\n<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n{body}\n</svg>\n"
