import socket

import pytest
from hypothesis import given, strategies as st

from conftest import atc_with, benign_prefix, make_tc
from vowifi_advtest.testbed import (Agent, AgentUnreachable, Controller, FramingError, Testbed, decode_frames,
                                    encode_frame, make_envelope)
from vowifi_advtest.testbed.envelope import MAX_FRAME, read_frame, write_frame
from vowifi_advtest.testcase import Command, emit_log_record

json_values = st.recursive(st.none() | st.booleans() | st.integers() | st.text(max_size=8),
                           lambda c: st.lists(c, max_size=3) | st.dictionaries(st.text(max_size=5), c, max_size=3),
                           max_leaves=10)
envelopes = st.builds(make_envelope, st.sampled_from(["command", "report", "error"]), st.integers(0, 10 ** 6),
                      st.sampled_from(["ue", "epdg", "ims"]), st.dictionaries(st.text(max_size=5), json_values))


@given(st.lists(envelopes, max_size=5), st.integers(0, 20))
def test_framing_roundtrip_with_partial_tail(envs, cut):
    buf = b"".join(encode_frame(e) for e in envs)
    got, rest = decode_frames(buf)
    assert got == envs and rest == b""
    if buf:
        cut = min(cut, len(buf) - 1)
        got, rest = decode_frames(buf[:len(buf) - 1 - cut] if cut else buf[:-1])
        assert got == envs[:len(got)]
        assert len(got) < len(envs)


def test_framing_errors():
    with pytest.raises(FramingError):
        decode_frames((MAX_FRAME + 1).to_bytes(4, "big"))
    with pytest.raises(FramingError):
        decode_frames(b"\x00\x00\x00\x02{x")
    with pytest.raises(ValueError):
        make_envelope("gossip", 0, "ue", {})


def test_socket_frames():
    a, b = socket.socketpair()
    with a, b:
        env = make_envelope("report", 3, "ims", {"x": [1, 2]})
        write_frame(a, env)
        assert read_frame(b) == env
        a.sendall(b"\x00\x00\x00\x09{")
        a.shutdown(socket.SHUT_WR)
        with pytest.raises(FramingError):
            read_frame(b)
    c, d = socket.socketpair()
    c.close()
    with d:
        assert read_frame(d) is None


def test_agent_rejects_misrouted_and_malformed():
    agent = Agent("epdg", Testbed())
    rep = agent.handle(make_envelope("command", 1, "epdg", {"command": {"receiver": "ims", "op": "send",
                                                                        "name": "200_ok"}}))
    assert rep[0]["kind"] == "error" and rep[0]["body"]["final"]
    rep = agent.handle(make_envelope("command", 1, "epdg", {}))
    assert rep[0]["kind"] == "error"


def test_reports_end_with_final_flag(compliant):
    with Controller() as ctl:
        ctl.reset_entities(compliant, "s")
        reps = ctl.dispatch(Command(1, "ue", "reboot"))
    assert [r["body"]["final"] for r in reps] == [False] * (len(reps) - 1) + [True]
    assert all(r["kind"] == "report" for r in reps)


def test_unregistered_agent_unreachable(compliant):
    with Controller() as ctl:
        ctl.unregister("ims")
        with pytest.raises(AgentUnreachable):
            ctl.run_testcase(make_tc(benign_prefix("200_ok")), compliant, "s")


def _lines(log):
    return [emit_log_record(r) for r in log]


def test_socket_transport_matches_local(compliant):
    tc = make_tc(benign_prefix("200_ok"), kind="PTC")
    with Controller(transport="local") as a, Controller(transport="socket") as b:
        assert _lines(a.run_testcase(tc, compliant, "s")) == _lines(b.run_testcase(tc, compliant, "s"))


def test_runs_are_reproducible(compliant):
    tc = atc_with("eap_aka_challenge", op="update", attribute="eap.at_rand", value="0x" + "11" * 16)
    with Controller(seed=4) as ctl:
        first = _lines(ctl.run_testcase(tc, compliant, "s"))
        assert _lines(ctl.run_testcase(tc, compliant, "s")) == first
        assert _lines(ctl.run_testcase(tc, compliant, "t")) != first


def test_log_shape(compliant):
    with Controller() as ctl:
        log = ctl.run_testcase(make_tc(benign_prefix("200_ok"), kind="PTC"), compliant, "s", run_label="L")
    assert [r.seq for r in log] == list(range(len(log)))
    assert all(r.run == "L" and r.tc_id == "t" for r in log)
    stamps = [r.timestamp for r in log]
    assert stamps == sorted(stamps)
    cmds = [r for r in log if r.direction == "command"]
    assert [c.cmd_seq for c in cmds] == [0, 1, 2, 3, 4, 5]
    tap = [r for r in log if r.payload.get("event") in ("sent", "received")]
    assert all(set(r.payload) >= {"from", "to", "protocol", "name", "hex", "summary"} for r in tap)


def test_missing_reply_times_out_and_stops(compliant):
    tc = atc_with("ike_sa_init_response", op="update", attribute="header.version", value=0x30)
    extra = make_tc(tc.commands + [Command(2, "epdg", "send", "eap_aka_challenge")])
    with Controller() as ctl:
        log = ctl.run_testcase(extra, compliant, "s")
    last = log[-1]
    assert "timeout" in last.annotations
    assert max(r.cmd_seq for r in log) == 1
    assert last.timestamp >= 2000


def test_state_violation_reported(compliant):
    tc = make_tc([Command(1, "epdg", "send", "eap_success")])
    with Controller() as ctl:
        log = ctl.run_testcase(tc, compliant, "s")
    assert any(n.startswith("state_violation:") for r in log for n in r.annotations)


def test_inapplicable_mutation_is_state_violation(compliant):
    tc = atc_with("ike_sa_init_response", op="update", attribute="auth.method", value=2)
    with Controller() as ctl:
        log = ctl.run_testcase(tc, compliant, "s")
    assert any(n.startswith("state_violation:") for r in log for n in r.annotations)


def test_reset_from_hook_aborts_run(compliant):
    with Controller() as ctl:
        def hook(c, cmd, _reports):
            if cmd.id == 2:
                c.reset_entities(compliant, "other")
        ctl.hooks.append(hook)
        log = ctl.run_testcase(make_tc(benign_prefix("200_ok")), compliant, "s")
    assert log[-1].direction == "control" and log[-1].annotations == ["aborted:reset"]
    assert max(r.cmd_seq for r in log) == 2


def test_bad_reset_mode(compliant):
    with Controller() as ctl, pytest.raises(ValueError):
        ctl.run_testcase(make_tc(benign_prefix("200_ok")), compliant, reset="soft")


def test_adversarial_marker_only_on_mutation(compliant):
    with Controller() as ctl:
        benign = ctl.run_testcase(make_tc(benign_prefix("eap_success")), compliant, "s")
        mutated = ctl.run_testcase(atc_with("eap_success", op="drop", attribute="auth"), compliant, "s")
    assert not any("adversarial" in r.annotations for r in benign)
    marked = [r for r in mutated if "adversarial" in r.annotations]
    assert len(marked) == 1 and marked[0].payload["name"] == "eap_success"


def test_substitute_emits_error_message(compliant):
    with Controller() as ctl:
        log = ctl.run_testcase(atc_with("401_unauthorized", op="substitute", substitute_with="forbidden"),
                               compliant, "s")
    marked = [r for r in log if "adversarial" in r.annotations]
    assert marked and marked[0].payload["summary"]["status"] == 403
