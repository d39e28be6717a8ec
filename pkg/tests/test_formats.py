import io

import pytest

from models.errors import InvalidInputError
from models.schemas import EuclideanPointSet, LatticePointSet, PointSetMeta, real_context
from services.formats import (
    dump_point_set,
    parse_point_set,
    read_point_set,
    render_csv,
    write_csv,
    write_point_set,
)
from services.oracle import regular_simplex


def test_lattice_file_layout(tetrahedron):
    text = dump_point_set(tetrahedron, PointSetMeta(k=2, c="0.5"))
    lines = text.splitlines()
    assert lines[0] == "{"
    assert '"format": "angleset-v1"' in text
    assert '"meta": {"k": 2, "c": "0.5"}' in text
    assert "    [0, 0, 0]," in lines
    assert "    [0, 1, 1]" in lines


def test_lattice_file_reads_back(tmp_path, tetrahedron):
    path = tmp_path / "out" / "points.json"
    write_point_set(path, tetrahedron, PointSetMeta(seed=3))
    points, meta = read_point_set(path)
    assert points == tetrahedron
    assert meta.seed == 3
    assert not list(path.parent.glob(".*.tmp"))


def test_real_coordinates_keep_their_mantissa(tmp_path):
    simplex = regular_simplex(3, prec=200)
    path = tmp_path / "simplex.json"
    write_point_set(path, simplex)
    points, _ = read_point_set(path, prec=200)
    assert isinstance(points, EuclideanPointSet)
    for p, q in zip(points.points, simplex.points):
        assert all(x == y for x, y in zip(p, q))


def test_empty_point_list():
    text = dump_point_set(LatticePointSet(d=2, points=[]))
    points, _ = parse_point_set(text)
    assert len(points) == 0


def test_malformed_json_reports_the_position():
    with pytest.raises(InvalidInputError, match=r"bad\.json:2:"):
        parse_point_set('{\n  "d": ,\n}', "bad.json")


def test_fractional_coordinate_in_integer_file_reports_the_line():
    text = '{\n"format": "angleset-v1",\n"d": 2,\n"coord_type": "int",\n"points": [\n  [0, 0],\n  [1, "0.5"]\n]\n}'
    with pytest.raises(InvalidInputError, match=r"in\.json:7: points\.1"):
        parse_point_set(text, "in.json")


def test_wrong_length_point_is_rejected():
    text = '{"format": "angleset-v1", "d": 3, "coord_type": "int", "points": [[0, 0, 0], [1, 1]]}'
    with pytest.raises(InvalidInputError, match="expected 3"):
        parse_point_set(text, "short.json")


def test_unknown_format_is_rejected():
    text = '{"format": "other", "d": 1, "coord_type": "int", "points": [[0]]}'
    with pytest.raises(InvalidInputError, match="format"):
        parse_point_set(text)


def test_missing_file(tmp_path):
    with pytest.raises(InvalidInputError, match="cannot read"):
        read_point_set(tmp_path / "absent.json")


def test_csv_rendering():
    ctx = real_context(64)
    text = render_csv(["d", "value", "note"], [(3, ctx.mpf(1) / 4, None)], comment="test table")
    assert text.splitlines() == ["# test table", "d,value,note", "3,0.25,"]


def test_csv_to_stream_and_file(tmp_path):
    stream = io.StringIO()
    write_csv(stream, ["a"], [(1,), (2,)])
    assert stream.getvalue() == "# a\na\n1\n2\n"
    path = tmp_path / "table.csv"
    write_csv(path, ["a"], [(1,)])
    assert path.read_text() == "# a\na\n1\n"
