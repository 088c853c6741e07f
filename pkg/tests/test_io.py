import json

import numpy as np
import pytest

from flagstat import FlagSignature, RigidMotion
from flagstat.io import (
    FormatError,
    dumps,
    format_real,
    parse_flag_set,
    parse_motion_set,
    read_flag_set,
    read_motion_set,
    read_weights,
    write_flag_set,
    write_motion_set,
    write_text,
)
from flagstat.synthlab import random_motion

from conftest import random_flag


def test_flag_set_round_trip_is_bit_exact(tmp_path, gen, sig13):
    pts = [random_flag(gen, sig13) for _ in range(4)]
    path = tmp_path / "pts.json"
    write_flag_set(path, pts)
    sig, back = read_flag_set(path)
    assert sig == sig13
    for a, b in zip(pts, back):
        assert np.array_equal(a.rep, b.rep)


def test_motion_set_round_trip_is_bit_exact(tmp_path, gen):
    ms = [random_motion(gen, 2.0) for _ in range(5)]
    path = tmp_path / "m.json"
    write_motion_set(path, ms)
    back = read_motion_set(path)
    for a, b in zip(ms, back):
        assert np.array_equal(a.rotation, b.rotation)
        assert np.array_equal(a.translation, b.translation)


def test_format_real_17_digits():
    assert format_real(0.1) == "0.10000000000000001"
    for x in (np.pi, 1e-300, -2.5e17, 1 / 3):
        assert float(format_real(x)) == x


def test_dumps_is_valid_json():
    doc = {"a": [0.1, 1, 2.5e-300], "b": {"c": "x", "d": [[1.0, 2.0], [3.0]]}, "e": True, "f": None}
    back = json.loads(dumps(doc))
    assert back["a"] == [0.1, 1, 2.5e-300]
    assert back["b"]["d"] == [[1, 2], [3]]
    with pytest.raises(ValueError):
        dumps({"x": float("nan")})


@pytest.mark.parametrize(
    "doc, field",
    [
        ([], "top level"),
        ({"ambient": 3, "points": [[1, 0, 0]]}, "signature"),
        ({"signature": [1], "points": [[1, 0, 0]]}, "ambient"),
        ({"signature": [1], "ambient": 3}, "points"),
        ({"signature": "1", "ambient": 3, "points": [[1, 0, 0]]}, "signature"),
        ({"signature": [1], "ambient": 3, "points": [[1, 0]]}, "points[0]"),
        ({"signature": [1], "ambient": 3, "points": [[1, 0, 0], [1, "a", 0]]}, "points[1]"),
        ({"signature": [1], "ambient": 3, "points": [[2, 0, 0]]}, "points[0]"),
        ({"signature": [3], "ambient": 3, "points": [[1, 0, 0]]}, "signature"),
    ],
)
def test_flag_set_errors_name_the_field(doc, field):
    with pytest.raises(FormatError) as info:
        parse_flag_set(doc, "f.json")
    assert field in str(info.value)


def test_invalid_json_reports_line(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"signature": [1],\n "ambient": 3,\n "points": [[1, 0, 0]\n')
    with pytest.raises(FormatError) as info:
        read_flag_set(path)
    assert "line" in str(info.value)


def test_missing_file(tmp_path):
    with pytest.raises(FormatError):
        read_flag_set(tmp_path / "nope.json")


def test_motion_set_tolerance_and_snapping():
    r = np.eye(3)
    r[0, 1] = 5e-7
    snapped = parse_motion_set({"motions": [{"rotation": list(r.reshape(-1)), "translation": [0, 0, 0]}]})
    assert np.allclose(snapped[0].rotation.T @ snapped[0].rotation, np.eye(3), atol=1e-14)
    r[0, 1] = 1e-4
    with pytest.raises(FormatError) as info:
        parse_motion_set({"motions": [{"rotation": list(r.reshape(-1)), "translation": [0, 0, 0]}]})
    assert "motions[0]" in str(info.value)
    with pytest.raises(FormatError) as info:
        parse_motion_set({"motions": [{"rotation": [1, 0, 0, 0, 1, 0, 0, 0, 1]}]})
    assert "translation" in str(info.value)


def test_read_weights(tmp_path):
    p = tmp_path / "w.json"
    p.write_text("[1, 2, 3]")
    assert np.array_equal(read_weights(p, 3), [1, 2, 3])
    p.write_text('{"weights": [1, 0.5]}')
    assert np.array_equal(read_weights(p, 2), [1, 0.5])
    with pytest.raises(FormatError):
        read_weights(p, 3)
    p.write_text("[0, 0]")
    with pytest.raises(FormatError):
        read_weights(p, 2)


def test_write_text_atomic_leaves_no_temp_files(tmp_path):
    target = tmp_path / "out.txt"
    write_text(target, "one")
    write_text(target, "two")
    assert target.read_text() == "two"
    assert [p.name for p in tmp_path.iterdir()] == ["out.txt"]
