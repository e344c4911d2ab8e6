import hashlib
import json
import math
import re

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import E1
from hjvanish.ergodic import eigenvalue
from hjvanish.errors import SchemaError, ValidationError
from hjvanish.hj_solver import SolveConfig
from hjvanish.report_io import (
    ExperimentReport,
    jsonable,
    read_csv,
    read_report,
    write_csv,
    write_report,
    write_svg_profile,
)


def test_small_table(tmp_path):
    p = tmp_path / "t.csv"
    write_csv(["a", "b"], [(1, 2.5), (3, 4.0)], p)
    text = p.read_text()
    assert text.count("\n") == 3
    assert text.splitlines()[0] == "a,b"
    assert "\r" not in text


def test_empty_table(tmp_path):
    p = tmp_path / "t.csv"
    write_csv(["a", "b"], [], p)
    assert p.read_text() == "a,b\n"


def test_row_length_checked(tmp_path):
    with pytest.raises(ValidationError):
        write_csv(["a", "b"], [(1,)], tmp_path / "t.csv")


def test_booleans_and_nonfinite(tmp_path):
    p = tmp_path / "t.csv"
    write_csv(["flag", "v"], [(True, math.inf), (False, math.nan)], p)
    _, rows = read_csv(p)
    assert rows == [["true", "inf"], ["false", "nan"]]


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=20))
def test_float_round_trip(tmp_path_factory, values):
    p = tmp_path_factory.mktemp("csv") / "v.csv"
    write_csv(["v"], [(v,) for v in values], p)
    _, rows = read_csv(p)
    assert [float(r[0]) for r in rows] == values


def test_jsonable_nonfinite():
    assert jsonable({"a": [math.nan, math.inf, -math.inf, np.float64(1.5)]}) == {"a": ["nan", "inf", "-inf", 1.5]}


def test_ergodic_report(tmp_path, h_exp, unit):
    res = eigenvalue(h_exp, unit, cfg=SolveConfig())
    path = write_report(ExperimentReport("eigenvalue", {"title": "t"}, res, wall_time=1.0), tmp_path / "e.json")
    doc = read_report(path)
    assert doc["payload_type"] == "ergodic"
    assert doc["payload"]["c"] == pytest.approx(-E1, abs=1e-3)
    prov = json.loads((tmp_path / "e.provenance.json").read_text())
    assert prov["wall_time_s"] == 1.0


def test_unknown_payload(tmp_path):
    with pytest.raises(SchemaError):
        write_report(ExperimentReport("x", {}, object()), tmp_path / "x.json")


def test_wrong_schema(tmp_path):
    p = tmp_path / "r.json"
    p.write_text('{"schema_version": "0"}')
    with pytest.raises(SchemaError):
        read_report(p)


def test_constant_profile_is_horizontal(tmp_path):
    p = tmp_path / "c.svg"
    write_svg_profile([0.0, 0.5, 1.0], {"flat": [2.0, 2.0, 2.0]}, p)
    pts = re.search(r'id="profile-0"[^>]*points="([^"]+)"', p.read_text()).group(1)
    ys = {xy.split(",")[1] for xy in pts.split()}
    assert len(ys) == 1


def test_two_profiles_distinct_ids(tmp_path):
    p = tmp_path / "two.svg"
    write_svg_profile([0.0, 1.0], {"a": [0.0, 1.0], "b": [1.0, 0.0]}, p, title="a < b")
    text = p.read_text()
    assert text.count("<polyline") == 2
    assert 'id="profile-0"' in text and 'id="profile-1"' in text
    assert "a &lt; b" in text


def test_svg_is_deterministic(tmp_path):
    x = np.linspace(-1, 1, 50)
    digests = []
    for name in ("a.svg", "b.svg"):
        write_svg_profile(x, {"sin": np.sin(3 * x), "cos": np.cos(3 * x)}, tmp_path / name)
        digests.append(hashlib.sha256((tmp_path / name).read_bytes()).hexdigest())
    assert digests[0] == digests[1]


def test_svg_validation(tmp_path):
    with pytest.raises(ValidationError):
        write_svg_profile([0.0, 1.0], {}, tmp_path / "e.svg")
    with pytest.raises(ValidationError):
        write_svg_profile([0.0, 1.0], {"a": [1.0]}, tmp_path / "e.svg")
