import json
import math

from hypothesis import given, strategies as st

from ncconvex.report import Outcome, VerificationReport, dumps

finite = st.floats(allow_nan=False, allow_infinity=False)
anyfloat = st.floats(allow_nan=True, allow_infinity=True)


def test_status_derivation():
    rep = VerificationReport("x")
    assert rep.status == "pass"
    rep.check_le("a", 1.0, 2.0)
    assert rep.passed
    rep.check_ge("b", 1.0, 2.0)
    assert rep.status == "fail"
    rep.fail_with_error("boom")
    assert rep.status == "error"


def test_schema_keys():
    rep = VerificationReport("cmd", {"k": 1}, seed=3)
    rep.check_le("o", 0.5, 1.0)
    d = json.loads(rep.to_json())
    assert list(d) == ["command", "params", "outcomes", "seed", "elapsed_s", "status"]
    assert d["outcomes"][0] == {"name": "o", "value": 0.5, "bound": 1.0, "pass": True}


@given(st.lists(st.tuples(st.text(max_size=12), anyfloat, anyfloat, st.booleans()), max_size=6),
       st.integers(0, 2**63 - 1), finite)
def test_round_trip_lossless(outs, seed, param):
    rep = VerificationReport("c", {"p": param, "name": "x"}, seed=seed, elapsed=0.25)
    for o in outs:
        rep.outcomes.append(Outcome(*o))
    back = VerificationReport.from_json(rep.to_json())
    assert back.seed == seed and back.params == rep.params and back.status == rep.status
    for a, b in zip(rep.outcomes, back.outcomes):
        assert a.name == b.name and a.passed == b.passed
        for x, y in ((a.value, b.value), (a.bound, b.bound)):
            assert (math.isnan(x) and math.isnan(y)) or x == y


def test_seventeen_digits():
    assert dumps(0.1) == "0.10000000000000001"
    assert dumps(1.0) == "1.0"
    assert dumps(float("inf")) == '"inf"'


def test_extend_prefixes():
    a, b = VerificationReport("a"), VerificationReport("b")
    b.check_le("x", 2.0, 1.0)
    a.extend(b, prefix="sub: ")
    assert a.outcomes[0].name == "sub: x" and a.status == "fail"


def test_table_mentions_every_outcome():
    rep = VerificationReport("t")
    rep.check_le("first", 1.0, 2.0)
    rep.check_ge("second", 1.0, 2.0)
    text = rep.table()
    assert "first" in text and "second" in text and "FAIL" in text
