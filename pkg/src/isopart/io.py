"""Partition files, report serialization, SVG drawings and grid snapshots.

Partition files are canonical JSON: sorted keys, floats written with Python's
shortest round-trip representation, and the string ``"inf"`` standing in for
infinite measures.  Saving the same partition twice gives identical bytes.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from . import network as nw
from .grid import GridPartition, band_mask
from .network import ArcEdge, ArcPartition, Line, Ray, Region, Vertex

SCHEMA_VERSION = 1


class PartitionParseError(ValueError):
    pass


class SchemaVersionError(ValueError):
    pass


class PartitionValidationError(ValueError):
    def __init__(self, message: str, diagnostics: nw.TopologyDiagnostics | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics


# ---------------------------------------------------------------------------
# generic JSON


def to_jsonable(obj: Any) -> Any:
    """Plain JSON data for dataclasses, numpy values and non-finite floats."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {_key(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def _key(k) -> str:
    if isinstance(k, tuple):
        return "-".join(str(x) for x in k)
    return str(k)


def dumps(obj: Any) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


# ---------------------------------------------------------------------------
# partition files


def partition_to_dict(p: ArcPartition) -> dict:
    ff = nw.classify_far_field(p)
    return {
        "schema_version": SCHEMA_VERSION,
        "window_radius": p.window_radius,
        "far_field": {"kind": p.far_field, "directions": [list(d) for d in ff.directions]},
        "regions": [{"label": r.label, "measure": "inf" if r.infinite else r.measure} for r in p.regions],
        "vertices": [
            {
                "id": v.id,
                "kind": v.kind,
                "position": list(v.position),
                "direction": None if v.direction is None else list(v.direction),
                "pinned": v.pinned,
            }
            for v in p.vertices
        ],
        "edges": [
            {
                "id": e.id,
                "v_start": e.v_start,
                "v_end": e.v_end,
                "kappa": e.kappa,
                "left": e.left,
                "right": e.right,
                "major": e.major,
            }
            for e in p.edges
        ],
    }


def _field(d: dict, name: str, where: str, kind=None):
    if not isinstance(d, dict) or name not in d:
        raise PartitionParseError(f"missing field '{where}{name}'")
    val = d[name]
    if kind is not None and not isinstance(val, kind) or isinstance(val, bool) and kind in (int, float, (int, float)):
        raise PartitionParseError(f"field '{where}{name}' has the wrong type ({type(val).__name__})")
    return val


def _num(d, name, where) -> float:
    return float(_field(d, name, where, (int, float)))


def _measure(val, where) -> float:
    if val == "inf":
        return math.inf
    if isinstance(val, (int, float)) and not isinstance(val, bool):
        return float(val)
    raise PartitionParseError(f"field '{where}measure' must be a number or \"inf\"")


def partition_from_dict(d: dict, validate: bool = True) -> ArcPartition:
    if not isinstance(d, dict):
        raise PartitionParseError("top level must be an object")
    ver = _field(d, "schema_version", "", int)
    if ver != SCHEMA_VERSION:
        raise SchemaVersionError(f"schema version {ver} is not supported (expected {SCHEMA_VERSION})")
    regions = []
    for i, r in enumerate(_field(d, "regions", "", list)):
        w = f"regions[{i}]."
        regions.append(Region(_field(r, "label", w, int), _measure(_field(r, "measure", w), w)))
    verts = []
    for i, v in enumerate(_field(d, "vertices", "", list)):
        w = f"vertices[{i}]."
        pos = _field(v, "position", w, list)
        if len(pos) != 2:
            raise PartitionParseError(f"field '{w}position' must have two coordinates")
        direc = v.get("direction")
        if direc is not None and (not isinstance(direc, list) or len(direc) != 2):
            raise PartitionParseError(f"field '{w}direction' must be null or a pair")
        verts.append(Vertex(_field(v, "id", w, int), _field(v, "kind", w, str), tuple(pos),
                            None if direc is None else tuple(direc), bool(v.get("pinned", False))))
    edges = []
    for i, e in enumerate(_field(d, "edges", "", list)):
        w = f"edges[{i}]."
        edges.append(ArcEdge(_field(e, "id", w, int), _field(e, "v_start", w, int), _field(e, "v_end", w, int),
                             _num(e, "kappa", w), _field(e, "left", w, int), _field(e, "right", w, int),
                             bool(e.get("major", False))))
    ff = _field(d, "far_field", "", dict)
    p = ArcPartition(tuple(regions), tuple(verts), tuple(edges), _num(d, "window_radius", ""),
                     _field(ff, "kind", "far_field.", str))
    if validate:
        diag = nw.validate_topology(p)
        if not diag.ok:
            msgs = "; ".join(f"{v.code}: {v.message}" for v in diag.violations)
            raise PartitionValidationError(f"partition failed validation: {msgs}", diag)
    return p


def save_partition(p: ArcPartition, path) -> None:
    Path(path).write_text(dumps(partition_to_dict(p)))


def loads_partition(text: str, validate: bool = True) -> ArcPartition:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PartitionParseError(f"malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return partition_from_dict(d, validate)


def load_partition(path, validate: bool = True) -> ArcPartition:
    return loads_partition(Path(path).read_text(), validate)


# ---------------------------------------------------------------------------
# SVG


@dataclass(frozen=True)
class SvgStyle:
    size: int = 480
    stroke: str = "#1f2d3d"
    stroke_width: float | None = None  # default: window radius / 150
    background: str = "#ffffff"
    window: bool = True


def _f(x: float) -> str:
    s = format(float(x), ".10g")
    return "0" if s == "-0" else s


def render_svg(p: ArcPartition, style: SvgStyle | None = None) -> str:
    """SVG drawing of the network inside its window; arcs are exact SVG arc segments."""
    style = style or SvgStyle()
    R = p.window_radius
    sw = style.stroke_width or R / 150
    vm = p.vertex_map
    paths = []
    for e in sorted(p.edges, key=lambda e: e.id):
        curve = nw.edge_curve(p, e, vm)
        if isinstance(curve, (Ray, Line)):
            clip = nw._clip_curve(curve, (0.0, 0.0), R)
            if not clip.pieces:
                continue
            seg = clip.pieces[0]
            d = f"M {_f(seg.start[0])} {_f(seg.start[1])} L {_f(seg.end[0])} {_f(seg.end[1])}"
            kind = "line" if isinstance(curve, Line) else "ray"
        elif e.kappa == 0.0:
            a, b = curve.start, curve.end
            d = f"M {_f(a[0])} {_f(a[1])} L {_f(b[0])} {_f(b[1])}"
            kind = "segment"
        else:
            a, b = curve.start, curve.end
            rho = abs(1.0 / e.kappa)
            sweep = 1 if e.kappa > 0 else 0  # counterclockwise in the flipped frame
            d = (f"M {_f(a[0])} {_f(a[1])} A {_f(rho)} {_f(rho)} 0 {int(e.major)} {sweep} "
                 f"{_f(b[0])} {_f(b[1])}")
            kind = "arc"
        paths.append(f'    <path class="{kind}" data-edge="{e.id}" d="{d}"/>')
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{style.size}" height="{style.size}" '
        f'viewBox="{_f(-R)} {_f(-R)} {_f(2 * R)} {_f(2 * R)}">',
        f'  <rect x="{_f(-R)}" y="{_f(-R)}" width="{_f(2 * R)}" height="{_f(2 * R)}" fill="{style.background}"/>',
        f'  <g transform="scale(1,-1)" fill="none" stroke="{style.stroke}" stroke-width="{_f(sw)}" '
        'stroke-linecap="round">',
    ]
    if style.window:
        lines.append(f'    <circle class="window" cx="0" cy="0" r="{_f(R)}" stroke-dasharray="{_f(4 * sw)}" '
                     f'stroke-width="{_f(sw / 2)}"/>')
    lines += paths
    lines += ["  </g>", "</svg>", ""]
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# grid snapshots


def save_grid(g, prefix) -> tuple[Path, Path]:
    """Write labels as a binary PGM raster plus JSON metadata; returns both paths."""
    prefix = Path(prefix)
    lab = np.asarray(g.labels)
    if lab.min() < 0 or lab.max() > 255:
        raise ValueError("PGM snapshots hold labels 0..255")
    pgm = prefix.with_suffix(".pgm")
    meta = prefix.with_suffix(".json")
    # PGM rows run top to bottom; grid rows run bottom to top
    body = np.ascontiguousarray(lab[::-1].astype(np.uint8)).tobytes()
    pgm.write_bytes(f"P5\n{lab.shape[1]} {lab.shape[0]}\n255\n".encode() + body)
    frozen_width = int(np.argmin(g.frozen[g.n // 2])) if g.frozen.any() else 0
    meta.write_text(dumps({"n": g.n, "h": g.h, "targets": g.targets, "frozen_band": frozen_width}))
    return pgm, meta


def load_grid(prefix):
    prefix = Path(prefix)
    raw = prefix.with_suffix(".pgm").read_bytes()
    header = raw.split(b"\n", 3)
    if header[0] != b"P5":
        raise PartitionParseError("not a binary PGM file")
    w, h = (int(x) for x in header[1].split())
    lab = np.frombuffer(header[3], dtype=np.uint8).reshape(h, w)[::-1].astype(np.int64)
    meta = json.loads(prefix.with_suffix(".json").read_text())
    return GridPartition(lab, float(meta["h"]), band_mask(w, meta["frozen_band"]),
                         {int(k): int(v) for k, v in meta["targets"].items()})
