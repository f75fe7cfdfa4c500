"""JSON instance and report documents.

Instance schema (version 1)::

    {
      "version": 1,
      "dimension": 2,
      "domain": [[[0, 6], [0, 1]], ...],          # boxes, one [lo, hi] per axis
      "pieces": [{"boxes": [...], "value": 1.5}],  # or "dense", never both
      "dense": {"planes": [[...], [...]], "values": [...]},
      "alpha": 0.5                                  # optional
    }

``dense.values`` lists one entry per grid box in C order (last axis fastest),
with ``null`` for boxes outside the domain. With a dense form the domain may
be omitted; it is then the union of the non-null boxes.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from .geometry import HyperRect, Interval, RectPolytope
from .pcr import PcrPieces

SCHEMA_VERSION = 1
REPORT_VERSION = 1
MAX_DENSE_DIM = 3


class DocumentError(ValueError):
    """Schema or syntax violation, with the offending field path and line if known."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


@dataclass
class InstanceDocument:
    dimension: int
    domain: list[list[list[float]]] | None
    pieces: list[dict] | None = None
    dense: dict | None = None
    alpha: float | None = None
    version: int = SCHEMA_VERSION

    def to_json(self) -> dict:
        out: dict[str, Any] = {"version": self.version, "dimension": self.dimension}
        if self.domain is not None:
            out["domain"] = self.domain
        if self.pieces is not None:
            out["pieces"] = self.pieces
        if self.dense is not None:
            out["dense"] = self.dense
        if self.alpha is not None:
            out["alpha"] = self.alpha
        return out

    def digest(self) -> str:
        return hashlib.sha256(serialize_instance(self).encode()).hexdigest()[:16]

    def to_pcr(self) -> PcrPieces:
        if self.dense is not None:
            return _dense_to_pcr(self)
        domain = RectPolytope([_rect(b) for b in self.domain])
        pieces = [(RectPolytope([_rect(b) for b in p["boxes"]]), p["value"]) for p in self.pieces]
        try:
            return PcrPieces(pieces, domain)
        except ValueError as exc:
            raise DocumentError(str(exc), field="pieces") from exc


def _rect(b) -> HyperRect:
    return HyperRect(tuple(Interval(lo, hi) for lo, hi in b))


def _dense_to_pcr(doc: InstanceDocument) -> PcrPieces:
    planes = [np.asarray(p, dtype=float) for p in doc.dense["planes"]]
    shape = tuple(len(p) - 1 for p in planes)
    vals = doc.dense["values"]
    cells, pieces = [], []
    for flat, k in enumerate(np.ndindex(*shape)):
        v = vals[flat]
        if v is None:
            continue
        r = HyperRect.from_bounds([planes[i][k[i]] for i in range(len(k))],
                                  [planes[i][k[i] + 1] for i in range(len(k))])
        cells.append(r)
        pieces.append((RectPolytope([r]), v))
    if not cells:
        raise DocumentError("dense form has no cells inside the domain", field="dense.values")
    domain = RectPolytope(cells)
    if doc.domain is not None:
        given = RectPolytope([_rect(b) for b in doc.domain])
        if not given.same_set(domain):
            raise DocumentError("non-null dense cells do not match the domain", field="dense.values")
    return PcrPieces(pieces, domain)


def _type_error(field: str, expected: str, got) -> DocumentError:
    return DocumentError(f"expected {expected}, got {type(got).__name__}", field=field)


def _number(x, field: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise _type_error(field, "a number", x)
    if not math.isfinite(x):
        raise DocumentError("value must be finite", field=field)
    return x


def _box(b, n: int, field: str) -> list[list[float]]:
    if not isinstance(b, list) or len(b) != n:
        raise DocumentError(f"a box is a list of {n} [lo, hi] pairs", field=field)
    out = []
    for i, pair in enumerate(b):
        f = f"{field}[{i}]"
        if not isinstance(pair, list) or len(pair) != 2:
            raise DocumentError("expected a [lo, hi] pair", field=f)
        lo, hi = _number(pair[0], f + "[0]"), _number(pair[1], f + "[1]")
        if not lo < hi:
            raise DocumentError(f"box {field} is not proper on axis {i}: [{lo}, {hi}]", field=f)
        out.append([lo, hi])
    return out


def _boxes(bs, n: int, field: str) -> list:
    if not isinstance(bs, list) or not bs:
        raise DocumentError("expected a non-empty list of boxes", field=field)
    return [_box(b, n, f"{field}[{k}]") for k, b in enumerate(bs)]


def _check_keys(obj: dict, allowed: set, required: set, field: str):
    extra = sorted(set(obj) - allowed)
    if extra:
        raise DocumentError(f"unknown key(s) {extra}", field=field)
    missing = sorted(required - set(obj))
    if missing:
        raise DocumentError(f"missing key(s) {missing}", field=field)


def _key_line(text: str, key: str) -> int | None:
    """Line of the first occurrence of ``"key"`` in the source, for diagnostics."""
    pos = text.find(f'"{key}"')
    return text.count("\n", 0, pos) + 1 if pos >= 0 else None


def document_from_json(obj, text: str = "") -> InstanceDocument:
    if not isinstance(obj, dict):
        raise _type_error("<root>", "an object", obj)
    try:
        return _from_json(obj)
    except DocumentError as exc:
        if exc.line is None and exc.field:
            top = exc.field.split("[")[0].split(".")[0]
            raise DocumentError(str(exc).split(": ", 1)[-1], exc.field, _key_line(text, top)) from None
        raise


def _from_json(obj: dict) -> InstanceDocument:
    _check_keys(obj, {"version", "dimension", "domain", "pieces", "dense", "alpha"}, {"dimension"}, "<root>")
    version = obj.get("version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise DocumentError(f"unsupported version {version!r}", field="version")
    n = obj["dimension"]
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise DocumentError("dimension must be a positive integer", field="dimension")
    has_p, has_d = "pieces" in obj, "dense" in obj
    if has_p == has_d:
        raise DocumentError("exactly one of 'pieces' and 'dense' is required", field="<root>")
    domain = _boxes(obj["domain"], n, "domain") if "domain" in obj else None
    alpha = None
    if obj.get("alpha") is not None:
        alpha = _number(obj["alpha"], "alpha")
        if alpha <= 0:
            raise DocumentError("alpha must be positive", field="alpha")
    pieces = dense = None
    if has_p:
        if domain is None:
            raise DocumentError("'domain' is required with 'pieces'", field="<root>")
        if not isinstance(obj["pieces"], list) or not obj["pieces"]:
            raise DocumentError("expected a non-empty list", field="pieces")
        pieces = []
        for k, p in enumerate(obj["pieces"]):
            f = f"pieces[{k}]"
            if not isinstance(p, dict):
                raise _type_error(f, "an object", p)
            _check_keys(p, {"boxes", "value"}, {"boxes", "value"}, f)
            pieces.append({"boxes": _boxes(p["boxes"], n, f + ".boxes"), "value": _number(p["value"], f + ".value")})
    else:
        d = obj["dense"]
        if not isinstance(d, dict):
            raise _type_error("dense", "an object", d)
        _check_keys(d, {"planes", "values"}, {"planes", "values"}, "dense")
        if n > MAX_DENSE_DIM:
            raise DocumentError(f"dense form supports dimension <= {MAX_DENSE_DIM}", field="dense")
        planes = d["planes"]
        if not isinstance(planes, list) or len(planes) != n:
            raise DocumentError(f"expected {n} coordinate lists", field="dense.planes")
        clean = []
        for i, axis in enumerate(planes):
            f = f"dense.planes[{i}]"
            if not isinstance(axis, list) or len(axis) < 2:
                raise DocumentError("need at least two coordinates", field=f)
            xs = [_number(x, f"{f}[{j}]") for j, x in enumerate(axis)]
            if any(b <= a for a, b in zip(xs, xs[1:])):
                raise DocumentError("coordinates must be strictly increasing", field=f)
            clean.append(xs)
        count = int(np.prod([len(a) - 1 for a in clean]))
        vals = d["values"]
        if not isinstance(vals, list) or len(vals) != count:
            raise DocumentError(f"expected {count} values", field="dense.values")
        vals = [None if v is None else _number(v, f"dense.values[{j}]") for j, v in enumerate(vals)]
        dense = {"planes": clean, "values": vals}
    return InstanceDocument(n, domain, pieces, dense, alpha, version)


def parse_instance(text: str) -> InstanceDocument:
    """Parse and validate an instance; geometry errors are raised here too."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentError(exc.msg, line=exc.lineno) from None
    doc = document_from_json(obj, text)
    try:
        doc.to_pcr()
    except DocumentError:
        raise
    except ValueError as exc:
        raise DocumentError(str(exc), field="pieces" if doc.pieces is not None else "dense") from None
    return doc


def serialize_instance(doc: InstanceDocument) -> str:
    return json.dumps(doc.to_json(), indent=2) + "\n"


def instance_from_pcr(f: PcrPieces, alpha: float | None = None) -> InstanceDocument:
    """Document with one piece per level set and the domain as raster boxes."""
    dom = f.domain.canonical()
    pieces = [{"boxes": [r.as_pairs() for r in P.pieces], "value": c} for P, c in f.level_sets()]
    return InstanceDocument(f.dim, [r.as_pairs() for r in dom.pieces], pieces, None, alpha)


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


def make_report(command: list[str], digest: str | None, outputs: dict, status: str, timings: dict | None = None) -> dict:
    rep = {
        "version": REPORT_VERSION,
        "command": list(command),
        "instance_digest": digest,
        "status": status,
        "outputs": outputs,
    }
    if timings is not None:
        rep["timings"] = timings
    return rep


def serialize_report(report: dict) -> str:
    """Sorted keys and non-finite floats as null, so equal reports are equal bytes."""
    return json.dumps(_clean(report), indent=2, sort_keys=True, allow_nan=False) + "\n"
