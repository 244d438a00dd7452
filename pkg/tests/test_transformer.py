import json

import pytest
from hypothesis import given, settings, strategies as st

from vowifi_advtest import messages, testgen, transformer
from vowifi_advtest.testcase import validate_corpus
from vowifi_advtest.transformer import ConfigError, NotApplicable

GOLDEN = testgen.load_json(testgen.data_path("corpus_manifest.json"))


def _raw():
    return testgen.load_json(testgen.data_path("mutation.json"))


def _ptc(flow, message):
    return testgen.encode_property(testgen.Property("PT", "t", message), flow)


def test_manifest_matches_golden(corpus):
    m = corpus.manifest
    assert len(corpus.ptcs) == GOLDEN["ptcs"]
    assert m["count"] == GOLDEN["count"]
    assert m["by_operator"] == GOLDEN["by_operator"]
    assert m["sha256"] == GOLDEN["sha256"]
    counts = {}
    for tag in m["issues"].values():
        counts[str(tag)] = counts.get(str(tag), 0) + 1
    assert counts == GOLDEN["issue_counts"]


def test_generation_is_deterministic(corpus, config):
    again = transformer.generate_corpus(list(reversed(corpus.ptcs)), config)
    assert transformer.corpus_hash(again) == corpus.manifest["sha256"]


def test_atcs_are_valid(corpus):
    assert validate_corpus(corpus.atcs) == []
    assert len({t.tc_id for t in corpus.atcs}) == len(corpus.atcs)


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_atc_differs_only_in_final_command(corpus, data):
    atc = data.draw(st.sampled_from(corpus.atcs))
    ptc = {p.tc_id: p for p in corpus.ptcs}[atc.provenance["source_ptc"]]
    assert atc.kind == "ATC"
    assert atc.commands[:-1] == ptc.commands[:-1]
    f, g = atc.final, ptc.final
    assert (f.id, f.receiver, f.name, f.expect) == (g.id, g.receiver, g.name, g.expect)
    assert f.mutating
    if f.attribute is not None:
        assert f.attribute in messages.vocabulary(f.name)
    if f.op == "replay":
        assert atc.commands[f.replay_index - 1].receiver == f.receiver


def test_ue_final_ptcs_yield_nothing(flow, config):
    assert transformer.expand_ptc(_ptc(flow, "ike_sa_init_request"), config) == []


def test_expand_counts_follow_config(flow, config):
    ptc = _ptc(flow, "ike_sa_init_response")
    atcs = transformer.expand_ptc(ptc, config)
    vocab = messages.vocabulary("ike_sa_init_response")
    want_sub = sum(e.applies_to("ike_sa_init_response") for e in config.error_messages)
    want_upd = sum(len(v) for a, v in config.attribute_value_sets.items() if a in vocab)
    want_drop = len(config.droppable_attributes.get("ike_sa_init_response", []))
    ops = [a.final.op for a in atcs]
    assert ops.count("substitute") == want_sub
    assert ops.count("update") == want_upd
    assert ops.count("drop") == want_drop
    assert ops.count("replay") == 0  # first ePDG message has nothing earlier to replay


def test_replay_of_earlier_epdg_message(flow, config):
    atcs = transformer.expand_ptc(_ptc(flow, "eap_success"), config)
    replays = sorted(a.final.replay_index for a in atcs if a.final.op == "replay")
    assert replays == [1, 2]


def test_replay_window_max_back(flow):
    cfg = transformer.config_from_json(dict(_raw(), replay_window={"receivers": ["epdg"], "max_back": 1}))
    atcs = transformer.expand_ptc(_ptc(flow, "eap_success"), cfg)
    assert [a.final.replay_index for a in atcs if a.final.op == "replay"] == [2]


def test_transform_not_applicable(flow, config):
    ptc = _ptc(flow, "ike_sa_init_response")
    with pytest.raises(NotApplicable):
        transformer.transform_update(ptc, "contact.expires", 1)
    with pytest.raises(NotApplicable):
        transformer.transform_drop(ptc, "www_authenticate")
    with pytest.raises(NotApplicable):
        transformer.transform_replay(ptc, 1)
    with pytest.raises(NotApplicable):
        transformer.transform_substitute(ptc, next(e for e in config.error_messages if e.protocol == "sip"))
    with pytest.raises(NotApplicable):
        transformer.transform_update(_ptc(flow, "ike_sa_init_request"), "nonce", 1)


def test_substitute_label_and_invalid_ke_scope(flow, config):
    ke = [e for e in config.error_messages if e.notify == "INVALID_KE_PAYLOAD"]
    assert len(ke) == 7 and all(e.label.startswith("invalid_ke_payload(") for e in ke)
    for msg in ("eap_aka_challenge", "eap_success"):
        subs = [a.final.substitute_with for a in transformer.expand_ptc(_ptc(flow, msg), config)
                if a.final.op == "substitute"]
        assert not any(s.startswith("invalid_ke_payload") for s in subs)


@pytest.mark.parametrize("label,ok", [("a", True), ("a_b(MODP_768)", True), ("A", False), ("a(b", False),
                                      ("", False)])
def test_split_label(label, ok):
    if ok:
        transformer.split_label(label)
    else:
        with pytest.raises(ConfigError):
            transformer.split_label(label)


@pytest.mark.parametrize("patch", [
    {"bogus": 1},
    {"attribute_value_sets": {"not.a.path": [1]}},
    {"attribute_value_sets": {"nonce.data": ["0x00", "0x00"]}},
    {"droppable_attributes": {"200_ok": ["nonce"]}},
    {"droppable_attributes": {"nope": []}},
    {"replay_window": {"receivers": ["ue"]}},
    {"error_messages": [{"name": "x", "protocol": "ike"}]},
    {"error_messages": [{"name": "x", "protocol": "ike", "notify": "NOT_A_NOTIFY"}]},
    {"error_messages": [{"name": "x", "protocol": "ike", "notify": "INVALID_KE_PAYLOAD"}]},
    {"error_messages": [{"name": "x", "protocol": "ike", "notify": "INVALID_KE_PAYLOAD", "params": ["MODP_9"]}]},
    {"error_messages": [{"name": "x", "protocol": "sip", "status": 200}]},
    {"error_messages": [{"name": "x", "protocol": "smtp"}]},
    {"error_messages": [{"name": "x", "protocol": "sip", "status": 403, "messages": ["nope"]}]},
    {"error_messages": [{"name": "x", "protocol": "sip", "status": 403}, {"name": "x", "protocol": "sip",
                                                                          "status": 500}]},
])
def test_bad_configs_rejected(patch):
    with pytest.raises(ConfigError):
        transformer.config_from_json(dict(_raw(), **patch))


def test_config_file_roundtrip(tmp_path, config):
    path = tmp_path / "m.json"
    path.write_text(json.dumps(_raw()))
    assert transformer.load_config(str(path)) == config


def test_issue_tag_rules(flow, config):
    ptc = _ptc(flow, "ike_sa_init_response")
    weak = transformer.transform_update(ptc, "security_association.encr", "ENCR_DES")
    assert transformer.issue_for(weak, config) == 1
    ke768 = transformer.transform_substitute(ptc, config.error("invalid_ke_payload(MODP_768)"))
    assert transformer.issue_for(ke768, config) == 10
    assert transformer.issue_for(transformer.transform_drop(ptc, "vendor_id"), config) is None
