"""Deterministic SVG drawings of configurations, boundary curves and circuits.

Lattice y grows upwards, SVG y downwards; every coordinate is flipped about
the window. Numbers are printed with a fixed format so output is byte-stable.
"""
from __future__ import annotations

from fractions import Fraction
from pathlib import Path

from .clusters import BoundaryCurve
from .flows import Necklet
from .lattice import Box, Circuit, Configuration, PathTrace

CELL = 20


def _num(v) -> str:
    v = Fraction(v)
    if v.denominator == 1:
        return str(v.numerator)
    return f"{float(v):.2f}".rstrip("0")


class _Frame:
    def __init__(self, box: Box, scale: int):
        self.box = box
        self.scale = scale
        self.margin = scale

    def x(self, x) -> str:
        return _num((Fraction(x) - self.box.xmin + Fraction(1, 2)) * self.scale + self.margin)

    def y(self, y) -> str:
        return _num((self.box.ymax - Fraction(y) + Fraction(1, 2)) * self.scale + self.margin)

    @property
    def size(self) -> int:
        return self.box.side * self.scale + 2 * self.margin


def _bounding_box(points) -> Box:
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    lo_x, hi_x, lo_y, hi_y = min(xs), max(xs), min(ys), max(ys)
    half = int(max(hi_x - lo_x, hi_y - lo_y) // 2) + 1
    return Box(half, (int((lo_x + hi_x) // 2), int((lo_y + hi_y) // 2)))


def svg_document(cfg: Configuration | None = None, overlays=(), scale: int = CELL) -> str:
    overlays = list(overlays)
    if cfg is not None:
        box = cfg.window
    else:
        pts = []
        for ov in overlays:
            if isinstance(ov, BoundaryCurve):
                pts += [p for poly in ov.vertices() for p in poly]
            else:
                pts += list(_sites_of(ov))
        if not pts:
            raise ValueError("nothing to draw")
        box = _bounding_box(pts)
    f = _Frame(box, scale)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{f.size}" height="{f.size}" '
           f'viewBox="0 0 {f.size} {f.size}">',
           f'<rect x="0" y="0" width="{f.size}" height="{f.size}" fill="white"/>']
    if cfg is not None:
        half = Fraction(1, 2)
        out.append('<g fill="black" stroke="none">')
        for (x, y) in cfg.sites_with(1):
            out.append(f'<rect class="cell" x="{f.x(x - half)}" y="{f.y(y + half)}" width="{scale}" height="{scale}"/>')
        out.append("</g>")
        out.append(f'<rect x="{f.margin}" y="{f.margin}" width="{box.side * scale}" height="{box.side * scale}" '
                   'fill="none" stroke="gray" stroke-width="1"/>')
    for ov in overlays:
        if isinstance(ov, BoundaryCurve):
            for poly in ov.vertices():
                pts = " ".join(f"{f.x(x)},{f.y(y)}" for x, y in poly)
                out.append(f'<polyline class="curve" points="{pts}" fill="none" stroke="red" stroke-width="2"/>')
        else:
            sites = _sites_of(ov)
            pts = " ".join(f"{f.x(x)},{f.y(y)}" for x, y in sites)
            tag = "polygon" if isinstance(ov, (Circuit, Necklet)) else "polyline"
            out.append(f'<{tag} class="circuit" points="{pts}" fill="none" stroke="blue" stroke-width="2"/>')
            if isinstance(ov, Necklet):
                for x, y in ov.pearls:
                    out.append(f'<circle class="pearl" cx="{f.x(x)}" cy="{f.y(y)}" r="{scale // 4}" fill="gold"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _sites_of(ov):
    if isinstance(ov, Necklet):
        return ov.circuit.sites
    if isinstance(ov, PathTrace):
        return ov.sites
    return tuple(ov)


def render_svg(obj, path, overlays=(), scale: int = CELL) -> Path:
    """Write ``obj`` (a Configuration, BoundaryCurve, Circuit or Necklet) as SVG."""
    path = Path(path)
    if isinstance(obj, Configuration):
        text = svg_document(obj, overlays, scale)
    else:
        text = svg_document(None, [obj, *overlays], scale)
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path
