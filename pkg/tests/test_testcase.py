import json

import pytest
from hypothesis import given, strategies as st

from vowifi_advtest import messages
from vowifi_advtest.testcase import (Command, ConstraintViolation, LogRecord, SchemaViolation, TestCase,
                                     emit_log_record, emit_testcase, load_corpus, parse_log_record, parse_testcase,
                                     read_log, save_corpus, testcase_from_json as tc_from_json, validate_corpus, write_log)

network_names = st.sampled_from(messages.network_messages())


@st.composite
def commands(draw, cid):
    if draw(st.integers(0, 4)) == 0:
        return Command(cid, "ue", draw(st.sampled_from(["reboot", "wifi_on", "wifi_off"])))
    name = draw(network_names)
    receiver = messages.sender_of(name)
    op = draw(st.sampled_from(["send", "update", "drop", "insert", "substitute"] + (["replay"] if cid > 1 else [])))
    kw = {}
    if op in ("update", "drop", "insert"):
        kw["attribute"] = draw(st.sampled_from(sorted(messages.vocabulary(name))))
    if op == "update":
        kw["value"] = draw(st.one_of(st.integers(0, 65535), st.text("0123456789abcdefx", min_size=1, max_size=6)))
    if op == "substitute":
        kw["substitute_with"] = "invalid_syntax"
    if op == "replay":
        kw["replay_index"] = draw(st.integers(1, cid - 1))
    if draw(st.booleans()):
        kw["timeout_ms"] = draw(st.integers(0, 10000))
    if draw(st.booleans()):
        kw["expect"] = draw(st.sampled_from(messages.MESSAGE_ORDER))
    return Command(cid, receiver, op, name, **kw)


@st.composite
def gen_testcases(draw):
    n = draw(st.integers(1, 6))
    cmds = [draw(commands(i + 1)) for i in range(n)]
    return TestCase(draw(st.from_regex(r"\A[a-z0-9_]{1,10}\Z")), draw(st.sampled_from(["PTC", "ATC"])), cmds,
                    draw(st.dictionaries(st.sampled_from(["prop_id", "operator"]), st.text(max_size=5))))


@given(gen_testcases())
def test_emit_parse_roundtrip(tc):
    assert parse_testcase(emit_testcase(tc)) == tc
    assert validate_corpus([tc]) == []


def test_bare_array_is_ptc():
    tc = parse_testcase('[{"receiver": "epdg", "op": "send", "name": "ike_sa_init_response"}]', "x")
    assert tc.kind == "PTC" and tc.tc_id == "x" and tc.commands[0].id == 1


@pytest.mark.parametrize("obj,exc", [
    ("not json", SchemaViolation),
    ({"commands": [{"receiver": "ue"}]}, SchemaViolation),
    ({"commands": [{"receiver": "ue", "op": "reboot", "bogus": 1}]}, SchemaViolation),
    ({"commands": [{"receiver": "ue", "op": "reboot", "id": "1"}]}, SchemaViolation),
    ({"commands": [{"receiver": "ue", "op": "reboot"}], "kind": "XTC"}, SchemaViolation),
    ({"commands": [{"receiver": "ue", "op": "reboot"}], "extra": 1}, SchemaViolation),
    ({"commands": []}, ConstraintViolation),
    ({"commands": [{"receiver": "ue", "op": "send", "name": "x"}]}, ConstraintViolation),
    ({"commands": [{"receiver": "epdg", "op": "reboot"}]}, ConstraintViolation),
    ({"commands": [{"receiver": "epdg", "op": "send"}]}, ConstraintViolation),
    ({"commands": [{"receiver": "epdg", "op": "update", "name": "eap_success", "attribute": "auth"}]},
     ConstraintViolation),
    ({"commands": [{"receiver": "epdg", "op": "replay", "name": "eap_success", "replay_index": 1}]},
     ConstraintViolation),
    ({"commands": [{"receiver": "ue", "op": "reboot", "id": 1}, {"receiver": "ue", "op": "reboot", "id": 1}]},
     ConstraintViolation),
    ({"commands": [{"receiver": "mme", "op": "send", "name": "x"}]}, ConstraintViolation),
])
def test_rejections(obj, exc):
    text = obj if isinstance(obj, str) else json.dumps(obj)
    with pytest.raises(exc):
        parse_testcase(text)


def test_validate_corpus_reports_every_problem():
    good = TestCase("a", "PTC", [Command(1, "epdg", "send", "ike_sa_init_response")])
    dup = TestCase("a", "PTC", [Command(1, "epdg", "send", "ike_sa_init_response")])
    wrong_sender = TestCase("b", "PTC", [Command(1, "ims", "send", "eap_success")])
    unknown = TestCase("c", "PTC", [Command(1, "epdg", "send", "no_such", expect="nope")])
    problems = validate_corpus([good, dup, wrong_sender, unknown, {"commands": 3}])
    msgs = [(p.index, p.message) for p in problems]
    assert [i for i, _ in msgs] == [1, 2, 3, 3, 4]
    assert "duplicate" in msgs[0][1]
    assert "does not send" in msgs[1][1]


def test_corpus_dir_roundtrip(tmp_path):
    tcs = [TestCase("p/1", "ATC", [Command(1, "ue", "reboot")]), TestCase("q", "PTC", [Command(1, "ue", "wifi_on")])]
    save_corpus(tcs, tmp_path)
    (tmp_path / "_manifest.json").write_text("{}")
    got = load_corpus(tmp_path)
    assert sorted(t.tc_id for t in got) == ["p/1", "q"]


def test_mutating_flag():
    assert not Command(1, "epdg", "send", "eap_success").mutating
    assert not Command(1, "ue", "reboot").mutating
    assert Command(2, "epdg", "replay", "eap_success", replay_index=1).mutating


records = st.builds(LogRecord, st.integers(0, 10 ** 9), st.text(max_size=8), st.text(max_size=8), st.integers(0, 999),
                    st.sampled_from(["command", "report", "control"]), st.sampled_from(messages.ENTITIES),
                    st.integers(0, 99), st.dictionaries(st.text(max_size=5), st.integers()),
                    st.lists(st.text(max_size=5), max_size=3))


@given(records)
def test_log_record_roundtrip(rec):
    line = emit_log_record(rec)
    assert "\n" not in line
    assert parse_log_record(line) == rec


def test_log_file_roundtrip(tmp_path):
    recs = [LogRecord(1, "t", "r", 0, "command", "ue", 1, {"op": "reboot"}, [])]
    write_log(recs, tmp_path / "log.jsonl")
    assert read_log(tmp_path / "log.jsonl") == recs


def test_log_record_key_check():
    with pytest.raises(SchemaViolation):
        parse_log_record('{"timestamp": 1}')


def test_defaults_omitted_on_emit():
    out = tc_from_json([{"receiver": "ue", "op": "reboot"}]).to_json()
    assert out["commands"] == [{"id": 1, "receiver": "ue", "op": "reboot"}]
