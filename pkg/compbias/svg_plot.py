"""
Standalone SVG charts for learning curves and per-mapping scatter plots.

Output is byte-deterministic: attributes are written in insertion order and
every number goes through ``fmt_num``.
"""
import math
import xml.etree.ElementTree as ET
from enum import Enum
from typing import List, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .common.errors import EmptyData
from .mapping_core import MappingKind

SVG_NS = "http://www.w3.org/2000/svg"

CLASS_COLORS = {
    MappingKind.COMPOSITIONAL: "#1f4fd8",
    MappingKind.HOLISTIC: "#d62728",
    MappingKind.NON_BIJECTION: "#9a9a9a",
    MappingKind.FULLY_DEGENERATE: "#2ca02c",
}
CLASS_LABELS = {
    MappingKind.COMPOSITIONAL: "compositional",
    MappingKind.HOLISTIC: "holistic",
    MappingKind.NON_BIJECTION: "non-bijection",
    MappingKind.FULLY_DEGENERATE: "degenerate",
}
# grey first so coloured classes are drawn on top
DRAW_ORDER = (MappingKind.NON_BIJECTION, MappingKind.HOLISTIC, MappingKind.COMPOSITIONAL, MappingKind.FULLY_DEGENERATE)

MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 70, 150, 40, 50
MARKER_RADIUS = 3


class PlotKind(str, Enum):
    CURVES = "curves"
    SCATTER = "scatter"


class PlotSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: PlotKind
    x_label: str
    y_label: str
    title: str = ""
    width: int = Field(720, ge=200)
    height: int = Field(480, ge=150)


class PlotSeries(BaseModel):
    """One mapping's points; a curve for ``curves`` plots, markers for ``scatter``."""
    model_config = ConfigDict(frozen=True)

    mapping_id: int
    kind: MappingKind
    xs: Tuple[float, ...]
    ys: Tuple[float, ...]

    @model_validator(mode="after")
    def _same_length(self):
        if len(self.xs) != len(self.ys):
            raise ValueError("xs and ys must have the same length")
        return self

    def finite_points(self) -> List[Tuple[float, float]]:
        return [(x, y) for x, y in zip(self.xs, self.ys) if math.isfinite(x) and math.isfinite(y)]


def fmt_num(n: float) -> str:
    """Fixed three-decimal rendering without trailing zeros."""
    text = f"{n:.3f}".rstrip("0").rstrip(".")
    return "0" if text in ("-0", "") else text


class _Frame:
    """Data-to-pixel transform for the plotting area."""

    def __init__(self, spec: PlotSpec, points: Sequence[Tuple[float, float]]):
        xs = [p[0] for p in points]
        ys = [p[1] for p in points]
        self.x0, self.x1 = _padded(min(xs), max(xs))
        self.y0, self.y1 = _padded(min(ys), max(ys))
        self.left = MARGIN_LEFT
        self.right = spec.width - MARGIN_RIGHT
        self.top = MARGIN_TOP
        self.bottom = spec.height - MARGIN_BOTTOM

    def x(self, value: float) -> float:
        return self.left + (value - self.x0) / (self.x1 - self.x0) * (self.right - self.left)

    def y(self, value: float) -> float:
        return self.bottom - (value - self.y0) / (self.y1 - self.y0) * (self.bottom - self.top)


def _padded(lo: float, hi: float) -> Tuple[float, float]:
    if hi > lo:
        return lo, hi
    pad = abs(lo) * 0.05 or 1.0
    return lo - pad, hi + pad


def _sub(parent: ET.Element, tag: str, text: Optional[str] = None, **attrs: str) -> ET.Element:
    element = ET.SubElement(parent, tag, {k.replace("_", "-"): v for k, v in attrs.items()})
    if text is not None:
        element.text = text
    return element


def _axes(svg: ET.Element, spec: PlotSpec, frame: _Frame):
    axes = _sub(svg, "g", id="axes", stroke="#000000")
    _sub(axes, "line", x1=fmt_num(frame.left), y1=fmt_num(frame.bottom), x2=fmt_num(frame.right), y2=fmt_num(frame.bottom))
    _sub(axes, "line", x1=fmt_num(frame.left), y1=fmt_num(frame.top), x2=fmt_num(frame.left), y2=fmt_num(frame.bottom))

    labels = _sub(svg, "g", id="labels", font_family="sans-serif", font_size="12")
    for value, anchor in ((frame.x0, "start"), (frame.x1, "end")):
        _sub(labels, "text", fmt_num(value), x=fmt_num(frame.x(value)), y=fmt_num(frame.bottom + 16), text_anchor=anchor)
    for value in (frame.y0, frame.y1):
        _sub(labels, "text", fmt_num(value), x=fmt_num(frame.left - 6), y=fmt_num(frame.y(value) + 4), text_anchor="end")
    _sub(labels, "text", spec.x_label, x=fmt_num((frame.left + frame.right) / 2), y=fmt_num(spec.height - 12),
         text_anchor="middle")
    middle = (frame.top + frame.bottom) / 2
    _sub(labels, "text", spec.y_label, x="16", y=fmt_num(middle), text_anchor="middle",
         transform=f"rotate(-90 16 {fmt_num(middle)})")
    if spec.title:
        _sub(labels, "text", spec.title, x=fmt_num(spec.width / 2), y="20", text_anchor="middle")


def _legend(svg: ET.Element, spec: PlotSpec):
    legend = _sub(svg, "g", id="legend", font_family="sans-serif", font_size="12")
    x = spec.width - MARGIN_RIGHT + 16
    for row, kind in enumerate(CLASS_COLORS):
        y = MARGIN_TOP + 18 * row
        _sub(legend, "rect", x=fmt_num(x), y=fmt_num(y), width="10", height="10", fill=CLASS_COLORS[kind])
        _sub(legend, "text", CLASS_LABELS[kind], x=fmt_num(x + 16), y=fmt_num(y + 9))


def emit_svg(spec: PlotSpec, series: Sequence[PlotSeries], annotation: Optional[str] = None) -> str:
    """Render ``series`` as one SVG document; every drawn element is tagged with its mapping and class."""
    points = [p for s in series for p in s.finite_points()]
    if not points:
        raise EmptyData("nothing to plot")

    frame = _Frame(spec, points)
    svg = ET.Element("svg", {
        "xmlns": SVG_NS,
        "width": str(spec.width),
        "height": str(spec.height),
        "viewBox": f"0 0 {spec.width} {spec.height}",
    })
    _sub(svg, "rect", x="0", y="0", width=str(spec.width), height=str(spec.height), fill="#ffffff")
    _axes(svg, spec, frame)

    data = _sub(svg, "g", id="data")
    ordered = sorted(series, key=lambda s: (DRAW_ORDER.index(s.kind), s.mapping_id))
    for s in ordered:
        pts = s.finite_points()
        if not pts:
            continue
        tags = {"data-mapping-id": str(s.mapping_id), "data-class": s.kind.value}
        color = CLASS_COLORS[s.kind]
        if spec.kind is PlotKind.CURVES:
            coords = " ".join(f"{fmt_num(frame.x(x))},{fmt_num(frame.y(y))}" for x, y in pts)
            ET.SubElement(data, "polyline", {**tags, "points": coords, "fill": "none", "stroke": color,
                                             "stroke-width": "1", "stroke-opacity": "0.7"})
        else:
            for x, y in pts:
                ET.SubElement(data, "circle", {**tags, "cx": fmt_num(frame.x(x)), "cy": fmt_num(frame.y(y)),
                                               "r": str(MARKER_RADIUS), "fill": color})

    _legend(svg, spec)
    if annotation:
        _sub(svg, "text", annotation, id="annotation", x=fmt_num(frame.left + 8), y=fmt_num(frame.top + 14),
             font_family="sans-serif", font_size="12")
    return '<?xml version="1.0" encoding="UTF-8"?>\n' + ET.tostring(svg, encoding="unicode") + "\n"
