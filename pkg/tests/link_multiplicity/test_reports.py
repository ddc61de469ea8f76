import json
import math
from dataclasses import dataclass, field

import pytest

from link_multiplicity.errors import ReportIOError, ValidationError
from link_multiplicity.geometry import SliceFunctional
from link_multiplicity.oracle import certify
from link_multiplicity.reports import csv_table, decode_value, dumps, loads, read_text, to_dict, write_text


@dataclass(frozen=True)
class Probe:
    name: str
    level: complex
    radii: tuple[float, ...]
    gap: float = math.inf
    note: str | None = None
    cached: float = field(default=0.0, compare=False)


def test_encoding():
    data = to_dict(Probe("a", 1 - 2j, (0.5, 1.0), cached=3.0))
    assert data == {"name": "a", "level": [1.0, -2.0], "radii": [0.5, 1.0], "gap": math.inf, "note": None}


def test_document_layout():
    text = dumps(Probe("a", 1j, ()), "probe")
    assert text.endswith("}\n")
    document = json.loads(text)
    assert document["kind"] == "probe"
    assert document["probe"]["gap"] == math.inf
    assert '"gap": Infinity' in text


def test_round_trip_with_nested_types(transverse_slice, annulus, cusp):
    cert = certify(cusp, transverse_slice, annulus)
    restored = loads(dumps(cert, "certificate"), type(cert), "certificate")
    assert restored == cert
    assert isinstance(restored.slice, SliceFunctional)
    assert restored.slice.direction == transverse_slice.direction


def test_decode_value_checks_types():
    assert decode_value(int | None, None) is None
    assert decode_value(tuple[complex, ...], [[1, 2]]) == (1 + 2j,)
    with pytest.raises(TypeError):
        decode_value(int, 1.5)
    with pytest.raises(TypeError):
        decode_value(float, True)


@pytest.mark.parametrize(
    "text", ["not json", '{"kind": "other", "other": {}}', "[1, 2]", '{"kind": "probe", "probe": {"name": 1}}']
)
def test_loads_rejects(text):
    with pytest.raises(ValidationError):
        loads(text, Probe, "probe")


def test_csv_cells():
    text = csv_table(("flag", "value", "missing", "count"), [(True, 0.1, None, 3), (False, math.inf, "x", 0)])
    assert text.splitlines() == ["flag,value,missing,count", "true,0.1,,3", "false,inf,x,0"]


def test_csv_row_width():
    with pytest.raises(ValueError):
        csv_table(("a", "b"), [(1,)])


def test_text_io(tmp_path):
    path = write_text("hello\n", tmp_path / "nested" / "out.txt")
    assert read_text(path) == "hello\n"
    with pytest.raises(ReportIOError):
        read_text(tmp_path / "absent.txt")
    (tmp_path / "file").write_text("")
    with pytest.raises(ReportIOError):
        write_text("x", tmp_path / "file" / "out.txt")
