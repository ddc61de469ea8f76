"""
Structured-text (JSON) and CSV serialization for reports, certificates,
trial summaries and run configurations.

Dataclasses are encoded field by field; complex numbers become [re, im]
pairs, tuples become lists, and non-finite floats are written as JSON's
Infinity/NaN extensions. Decoding is driven by the dataclass type hints, so
parse(emit(x)) == x for every report type in the package.
"""

import csv
import dataclasses
import io
import json
import types
import typing
from pathlib import Path
from typing import Any, TypeVar, get_args, get_origin, get_type_hints

import numpy as np
import structlog

from link_multiplicity.errors import ReportIOError, ValidationError

logger = structlog.get_logger(__name__)

T = TypeVar("T")

TRIAL_COLUMNS = (
    "trial",
    "seed",
    "sample_size",
    "slab_size",
    "estimate",
    "expected",
    "max_diameter",
    "min_intercluster_gap",
    "well_separated",
    "success",
    "separated_at_slab_radius",
)
PLOT_COLUMNS = ("multiplier", "success_rate", "trial_count", "curve_id")


def to_dict(value: Any) -> Any:
    """Plain JSON-ready structure for a dataclass (recursively)."""
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return {f.name: to_dict(getattr(value, f.name)) for f in dataclasses.fields(value) if f.compare}
    if isinstance(value, complex | np.complexfloating):
        return [float(value.real), float(value.imag)]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, tuple | list):
        return [to_dict(v) for v in value]
    if isinstance(value, dict):
        return {str(k): to_dict(v) for k, v in value.items()}
    if isinstance(value, Path):
        return str(value)
    return value


def decode_value(tp: Any, value: Any) -> Any:
    if tp is Any:
        return value
    origin = get_origin(tp)
    if origin in (typing.Union, types.UnionType):
        if value is None:
            return None
        candidates = [a for a in get_args(tp) if a is not type(None)]
        errors = []
        for candidate in candidates:
            try:
                return decode_value(candidate, value)
            except (TypeError, ValueError, KeyError) as e:
                errors.append(str(e))
        raise ValueError(f"No variant of {tp} accepts {value!r}: {errors}")
    if value is None:
        return None
    if dataclasses.is_dataclass(tp):
        return from_dict(tp, value)
    if origin is tuple:
        args = get_args(tp)
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(decode_value(args[0], v) for v in value)
        return tuple(decode_value(a, v) for a, v in zip(args, value, strict=True))
    if origin is list:
        (arg,) = get_args(tp)
        return [decode_value(arg, v) for v in value]
    if origin is dict:
        key_type, value_type = get_args(tp)
        return {key_type(k): decode_value(value_type, v) for k, v in value.items()}
    if tp is complex:
        re, im = value
        return complex(re, im)
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, int | float):
            raise TypeError(f"expected a number, got {value!r}")
        return float(value)
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise TypeError(f"expected an integer, got {value!r}")
        return value
    if tp is bool:
        if not isinstance(value, bool):
            raise TypeError(f"expected a boolean, got {value!r}")
        return value
    if tp is str:
        if not isinstance(value, str):
            raise TypeError(f"expected a string, got {value!r}")
        return value
    if tp is Path:
        return Path(value)
    return value


def from_dict(cls: type[T], data: dict) -> T:
    """Rebuild a dataclass from to_dict output; fields computed in __post_init__ are recomputed."""
    if not isinstance(data, dict):
        raise TypeError(f"{cls.__name__} expects an object, got {type(data).__name__}")
    hints = get_type_hints(cls)
    kwargs = {
        f.name: decode_value(hints[f.name], data[f.name])
        for f in dataclasses.fields(cls)
        if f.init and f.name in data
    }
    return cls(**kwargs)


def dumps(value: Any, kind: str) -> str:
    """JSON document {"kind": kind, kind: payload}; keys sorted, two-space indent, trailing newline."""
    return json.dumps({"kind": kind, kind: to_dict(value)}, sort_keys=True, indent=2) + "\n"


def loads(text: str, cls: type[T], kind: str) -> T:
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise ValidationError(f"Malformed {kind} document", [str(e)]) from e
    if not isinstance(document, dict) or document.get("kind") != kind:
        found = document.get("kind") if isinstance(document, dict) else type(document).__name__
        raise ValidationError(f"Expected a {kind!r} document", [f"kind = {found!r}"])
    try:
        return from_dict(cls, document[kind])
    except (TypeError, ValueError, KeyError) as e:
        raise ValidationError(f"Malformed {kind} document", [str(e)]) from e


def write_text(text: str, path: Path | str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(text)
    except OSError as e:
        logger.error("Could not write report", error=str(e), path=str(path))
        raise ReportIOError(f"Could not write report: {e}", path) from e
    logger.info("Report written", output_file=str(path), bytes=len(text))
    return path


def read_text(path: Path | str) -> str:
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as f:
            return f.read()
    except OSError as e:
        logger.error("Could not read file", error=str(e), path=str(path))
        raise ReportIOError(f"Could not read file: {e}", path) from e


def _format_cell(value: Any) -> str:
    if isinstance(value, bool | np.bool_):
        return "true" if value else "false"
    if isinstance(value, float | np.floating):
        return repr(float(value))
    return "" if value is None else str(value)


def csv_table(columns: tuple[str, ...], rows: list[tuple]) -> str:
    """CSV text with a header row; every row must have len(columns) cells."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        if len(row) != len(columns):
            raise ValueError(f"Row has {len(row)} cells, table has {len(columns)} columns")
        writer.writerow([_format_cell(v) for v in row])
    return buffer.getvalue()
