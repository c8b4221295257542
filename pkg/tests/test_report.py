import json
import math

from gappde.equations import Residual, ResidualReport
from gappde.report import document, dumps, loads, merge, residual_document, to_csv


def test_float_format_and_nonfinite():
    assert dumps(0.1) == "0.10000000000000001"
    assert dumps(math.nan) == "null" and dumps(-math.inf) == "null"
    assert json.loads(dumps({"a": [1, 2.5, None, True]})) == {"a": [1, 2.5, None, True]}


def test_roundtrip_is_exact():
    x = 1 / 3
    assert loads(dumps({"x": x}))["x"] == x


def test_key_order_preserved():
    text = dumps({"b": 1, "a": 2})
    assert text.index('"b"') < text.index('"a"')


def test_residual_document_schema():
    rep = ResidualReport([Residual("THM8.second_order(1,2)", "-0.5,0.7;left=J", 1e-9, 1e-9, 1.0),
                          Residual("SEC4.P_r", "0.3;left=J", skipped=True, reason="skipped: needs N≥2")])
    doc = residual_document(rep, {"n": 2})
    assert doc["meta"]["settings"] == {"n": 2} and "version" in doc["meta"]
    assert doc["results"][1]["residual"] is None and doc["results"][1]["skipped"] is True
    rows = to_csv(doc).splitlines()
    assert rows[0] == "equation,config,residual,normalization,skipped,reason"
    assert rows[2].endswith("True,skipped: needs N≥2")
    assert dumps(doc) == dumps(residual_document(rep, {"n": 2}))


def test_merge():
    a = document([{"x": 1.0}], {"n": 1})
    b = document([{"x": 2.0}, {"x": 3.0}], {"n": 2})
    m = merge([a, b])
    assert [r["x"] for r in m["results"]] == [1.0, 2.0, 3.0]
    assert m["meta"]["settings"] == {"sources": [{"n": 1}, {"n": 2}]}
