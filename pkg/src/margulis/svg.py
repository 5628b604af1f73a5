"""Poincare-disk SVG plotting: hyperboloid points map by
(x, y, z) -> (x/(1+z), y/(1+z)); geodesics are drawn as circular arcs
orthogonal to the unit circle.  Output is deterministic byte-for-byte for a
fixed element list."""

from __future__ import annotations

import numpy as np

VIEW = 420.0        # svg canvas is VIEW x VIEW, disk of radius SCALE
SCALE = 200.0
STRAIGHT_TOL = 1e-9


def disk(p) -> np.ndarray:
    p = np.asarray(p, float)
    return p[:2] / (1.0 + p[2])


def _fmt(x: float) -> str:
    return "%.6f" % (x + 0.0)     # normalize -0.0


def _to_canvas(xy) -> tuple:
    return (VIEW / 2.0 + SCALE * xy[0], VIEW / 2.0 - SCALE * xy[1])


def geodesic_circle(a, b):
    """Center and radius of the circle through disk points a, b orthogonal
    to the unit circle, or None when the geodesic is a diameter."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    if abs(a[0] * b[1] - a[1] * b[0]) < STRAIGHT_TOL:
        return None
    # orthogonality: |c|^2 = r^2 + 1, with |p - c|^2 = r^2 for p = a, b
    M = 2.0 * np.array([a, b])
    rhs = np.array([a @ a + 1.0, b @ b + 1.0])
    c = np.linalg.solve(M, rhs)
    r = np.sqrt(c @ c - 1.0)
    return c, r


def _arc_path(a, b) -> str:
    pa = _to_canvas(a)
    pb = _to_canvas(b)
    circ = geodesic_circle(a, b)
    if circ is None:
        return "M %s %s L %s %s" % (_fmt(pa[0]), _fmt(pa[1]),
                                    _fmt(pb[0]), _fmt(pb[1]))
    c, r = circ
    # sweep flag: the arc must bend toward the origin side of chord a-b
    crossz = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    sweep = 1 if crossz > 0 else 0    # canvas y is flipped
    return "M %s %s A %s %s 0 0 %d %s %s" % (
        _fmt(pa[0]), _fmt(pa[1]), _fmt(SCALE * r), _fmt(SCALE * r),
        sweep, _fmt(pb[0]), _fmt(pb[1]))


def render_svg(elements, path=None) -> str:
    """elements: iterable of dicts with "type" in
    {"chord", "segment", "point", "label"}; hyperboloid coordinates.
    chord: {"p", "q", "color", "width"} geodesic arc between two points.
    segment: straight disk segment.  point: filled dot.  label: text."""
    out = []
    out.append('<svg xmlns="http://www.w3.org/2000/svg" '
               'width="%d" height="%d" viewBox="0 0 %d %d">'
               % (int(VIEW), int(VIEW), int(VIEW), int(VIEW)))
    out.append('<rect width="%d" height="%d" fill="white"/>'
               % (int(VIEW), int(VIEW)))
    out.append('<circle cx="%s" cy="%s" r="%s" fill="none" '
               'stroke="black" stroke-width="1"/>'
               % (_fmt(VIEW / 2), _fmt(VIEW / 2), _fmt(SCALE)))
    for el in elements:
        kind = el["type"]
        color = el.get("color", "black")
        width = el.get("width", 1.0)
        if kind == "chord":
            d = _arc_path(disk(el["p"]), disk(el["q"]))
            out.append('<path d="%s" fill="none" stroke="%s" '
                       'stroke-width="%s"/>' % (d, color, _fmt(width)))
        elif kind == "segment":
            pa = _to_canvas(disk(el["p"]))
            pb = _to_canvas(disk(el["q"]))
            out.append('<line x1="%s" y1="%s" x2="%s" y2="%s" '
                       'stroke="%s" stroke-width="%s"/>'
                       % (_fmt(pa[0]), _fmt(pa[1]), _fmt(pb[0]),
                          _fmt(pb[1]), color, _fmt(width)))
        elif kind == "point":
            pa = _to_canvas(disk(el["p"]))
            out.append('<circle cx="%s" cy="%s" r="%s" fill="%s"/>'
                       % (_fmt(pa[0]), _fmt(pa[1]),
                          _fmt(el.get("r", 2.0)), color))
        elif kind == "label":
            pa = _to_canvas(disk(el["p"]))
            out.append('<text x="%s" y="%s" font-size="12" fill="%s">%s'
                       '</text>' % (_fmt(pa[0]), _fmt(pa[1]), color,
                                    el["text"]))
        else:
            raise ValueError("unknown svg element type %r" % kind)
    out.append("</svg>")
    text = "\n".join(out) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text
