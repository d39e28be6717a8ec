"""
Point-set files and CSV tables.

Point sets are stored as JSON ("angleset-v1") with one point per line.
Integer coordinates are JSON integers; real coordinates are decimal strings
carrying enough digits to reproduce the mantissa they were written from.
Every write goes to a temporary file in the target directory and is moved
into place with ``os.replace``.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, List, Optional, Sequence, TextIO, Tuple, Union

from pydantic import ValidationError

from models.errors import InvalidInputError
from models.schemas import (
    EuclideanPointSet,
    LatticePointSet,
    PointSet,
    PointSetFile,
    PointSetMeta,
    real_to_str,
)
from models.settings import precision_bits

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def write_text_atomic(path: PathLike, text: str) -> None:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, target)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


# -------------------------
# Point-set JSON
# -------------------------


def dump_point_set(points: PointSet, meta: Optional[PointSetMeta] = None) -> str:
    meta = meta or PointSetMeta()
    if isinstance(points, LatticePointSet):
        rows = [json.dumps(list(p)) for p in points.points]
    else:
        rows = [json.dumps([real_to_str(x) for x in p]) for p in points.points]
    head = [
        "{",
        '  "format": "angleset-v1",',
        f'  "d": {points.d},',
        f'  "coord_type": {json.dumps(points.coord_type)},',
        f'  "meta": {json.dumps(meta.model_dump(exclude_none=True))},',
    ]
    if not rows:
        return "\n".join(head + ['  "points": []', "}"]) + "\n"
    body = ",\n".join(f"    {row}" for row in rows)
    return "\n".join(head + ['  "points": [', body, "  ]", "}"]) + "\n"


def write_point_set(path: PathLike, points: PointSet, meta: Optional[PointSetMeta] = None) -> None:
    write_text_atomic(path, dump_point_set(points, meta))
    logger.info("wrote %s points to %s", len(points), path)


def _point_offsets(text: str) -> List[int]:
    """Character offset of each element of the top-level "points" array."""
    decoder = json.JSONDecoder()
    start = text.find('"points"')
    if start < 0:
        return []
    pos = text.find("[", start)
    offsets: List[int] = []
    if pos < 0:
        return offsets
    pos += 1
    while pos < len(text):
        while pos < len(text) and text[pos] in " \t\r\n,":
            pos += 1
        if pos >= len(text) or text[pos] == "]":
            break
        offsets.append(pos)
        try:
            _, pos = decoder.raw_decode(text, pos)
        except json.JSONDecodeError:
            break
    return offsets


def _line_of(text: str, offset: int) -> int:
    return text.count("\n", 0, offset) + 1


def _diagnose(source: str, text: str, exc: ValidationError) -> InvalidInputError:
    err = exc.errors()[0]
    loc = err.get("loc", ())
    where = ".".join(str(part) for part in loc) or "file"
    line = None
    if len(loc) >= 2 and loc[0] == "points" and isinstance(loc[1], int):
        offsets = _point_offsets(text)
        if loc[1] < len(offsets):
            line = _line_of(text, offsets[loc[1]])
    prefix = f"{source}:{line}" if line is not None else source
    return InvalidInputError(f"{prefix}: {where}: {err.get('msg', 'invalid value')}")


def parse_point_set(text: str, source: str = "<string>", prec: Optional[int] = None) -> Tuple[PointSet, PointSetMeta]:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    try:
        doc = PointSetFile.model_validate(data)
        if doc.coord_type == "int":
            for i, p in enumerate(doc.points):
                if any(not isinstance(x, int) for x in p):
                    offsets = _point_offsets(text)
                    line = _line_of(text, offsets[i]) if i < len(offsets) else "?"
                    raise InvalidInputError(f"{source}:{line}: points.{i}: integer file holds a non-integer coordinate")
            points: PointSet = LatticePointSet(d=doc.d, points=doc.points)
        else:
            points = EuclideanPointSet(
                d=doc.d,
                points=doc.points,
                precision=precision_bits() if prec is None else prec,
            )
    except ValidationError as exc:
        raise _diagnose(source, text, exc) from exc
    return points, doc.meta


def read_point_set(path: PathLike, prec: Optional[int] = None) -> Tuple[PointSet, PointSetMeta]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InvalidInputError(f"cannot read {path}: {exc.strerror}") from exc
    return parse_point_set(text, str(path), prec)


# -------------------------
# CSV
# -------------------------


def _cell(value: Any) -> str:
    if hasattr(value, "_mpf_"):
        return real_to_str(value)
    if value is None:
        return ""
    return str(value)


def render_csv(columns: Sequence[str], rows: Iterable[Sequence[Any]], comment: Optional[str] = None) -> str:
    """CSV with a leading '#' line describing the columns."""
    buf = io.StringIO()
    buf.write(f"# {comment or ', '.join(columns)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def write_csv(target: Union[PathLike, TextIO], columns: Sequence[str], rows: Iterable[Sequence[Any]], comment: Optional[str] = None) -> None:
    text = render_csv(columns, rows, comment)
    if hasattr(target, "write"):
        target.write(text)
    else:
        write_text_atomic(target, text)
