"""Minimal SVG canvas: lines, circles and text in data coordinates."""
from __future__ import annotations

from xml.sax.saxutils import escape


class SvgCanvas:
    def __init__(self, width=480, height=480, xlim=(-1.0, 1.0), ylim=(-1.0, 1.0), margin=40):
        self.width, self.height, self.margin = width, height, margin
        self.xlim, self.ylim = xlim, ylim
        self._items: list[str] = []

    def _x(self, x):
        lo, hi = self.xlim
        return self.margin + (x - lo) / (hi - lo) * (self.width - 2 * self.margin)

    def _y(self, y):
        lo, hi = self.ylim
        return self.height - self.margin - (y - lo) / (hi - lo) * (self.height - 2 * self.margin)

    def line(self, x0, y0, x1, y1, color="black", width=1.0, dash=None):
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        self._items.append(
            f'<line x1="{self._x(x0):.2f}" y1="{self._y(y0):.2f}" x2="{self._x(x1):.2f}" '
            f'y2="{self._y(y1):.2f}" stroke="{color}" stroke-width="{width:g}"{extra}/>')

    def circle(self, x, y, r=1.5, color="black", opacity=1.0):
        self._items.append(f'<circle cx="{self._x(x):.2f}" cy="{self._y(y):.2f}" r="{r:g}" '
                           f'fill="{color}" fill-opacity="{opacity:g}"/>')

    def text(self, x, y, label, size=11, color="black", anchor="start", data=True):
        px, py = (self._x(x), self._y(y)) if data else (x, y)
        self._items.append(f'<text x="{px:.2f}" y="{py:.2f}" font-size="{size}" fill="{color}" '
                           f'text-anchor="{anchor}" font-family="sans-serif">'
                           f'{escape(label)}</text>')

    def to_string(self) -> str:
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" '
                f'height="{self.height}" viewBox="0 0 {self.width} {self.height}">')
        body = [f'<rect width="{self.width}" height="{self.height}" fill="white"/>']
        return "\n".join([head, *body, *self._items, "</svg>"]) + "\n"
