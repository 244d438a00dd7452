import json

import pytest

from conftest import atc_with, benign_prefix, make_tc
from vowifi_advtest import testgen
from vowifi_advtest.cli import build_parser, main
from vowifi_advtest.testcase import emit_testcase, read_log, save_corpus

GOLDEN = testgen.load_json(testgen.data_path("corpus_manifest.json"))


def test_subcommands_listed():
    sub = next(a for a in build_parser()._actions if a.dest == "command")
    assert set(sub.choices) == {"encode", "mutate", "run", "campaign", "validate"}


def test_no_subcommand_is_usage_error():
    with pytest.raises(SystemExit):
        main([])


def test_encode_then_mutate(tmp_path, capsys):
    ptc_dir, atc_dir = tmp_path / "ptc", tmp_path / "atc"
    assert main(["encode", "--out", str(ptc_dir)]) == 0
    assert "63 properties -> 63 PTCs, 0 errors" in capsys.readouterr().out
    assert main(["mutate", "--ptcs", str(ptc_dir), "--out", str(atc_dir)]) == 0
    out = capsys.readouterr().out
    assert f"sha256 {GOLDEN['sha256']}" in out
    manifest = json.loads((atc_dir / "_manifest.json").read_text())
    assert manifest["count"] == GOLDEN["count"]
    assert len(list(atc_dir.glob("*.json"))) == GOLDEN["count"] + 1


def test_encode_reports_errors(tmp_path, capsys):
    props = tmp_path / "p.json"
    props.write_text(json.dumps([{"prop_id": "X1", "text": "t", "message": "nope"}]))
    assert main(["encode", "--properties", str(props)]) == 1
    assert "X1:" in capsys.readouterr().out


def test_run_prints_log_and_verdict(tmp_path, capsys):
    path = tmp_path / "atc.json"
    path.write_text(emit_testcase(atc_with("ike_sa_init_response", op="update",
                                           attribute="security_association.prf", value="PRF_HMAC_MD5")))
    log = tmp_path / "log.jsonl"
    assert main(["run", str(path), "--profile", "weak_prf", "--log", str(log), "--transport", "socket"]) == 0
    out = capsys.readouterr().out
    assert "verdict: PositiveResponse" in out
    assert read_log(log)[0].direction == "command"


def test_run_ptc_has_no_verdict(tmp_path, capsys):
    path = tmp_path / "ptc.json"
    path.write_text(emit_testcase(make_tc(benign_prefix("200_ok"), kind="PTC")))
    assert main(["run", str(path)]) == 0
    assert "verdict" not in capsys.readouterr().out


def test_campaign_small(tmp_path, capsys, corpus):
    atcs = [a for a in corpus.atcs if corpus.issues.get(a.tc_id) == 3][:2]
    save_corpus(atcs, tmp_path / "c")
    out_dir = tmp_path / "out"
    code = main(["campaign", "--corpus", str(tmp_path / "c"), "--profiles", "compliant", "weak_prf",
                 "--reps", "1", "--out", str(out_dir), "--log", str(tmp_path / "all.jsonl")])
    assert code == 0
    res = json.loads((out_dir / "results.json").read_text())["summary"]["profiles"]
    assert res["compliant"]["alerts"] == 0
    assert res["weak_prf"]["issues"]["3"]["count"] == 2
    assert len(read_log(tmp_path / "all.jsonl")) > 0
    assert "| weak_prf | 2 | 2 |" in capsys.readouterr().out


def test_campaign_exit_status_on_clean_violation(tmp_path, corpus):
    atcs = [a for a in corpus.atcs if corpus.issues.get(a.tc_id) == 3][:1]
    save_corpus(atcs, tmp_path / "c")
    assert main(["campaign", "--corpus", str(tmp_path / "c"), "--profiles", "weak_prf", "--reps", "1",
                 "--expect-clean", "weak_prf"]) == 1


def test_validate(tmp_path, capsys):
    good = tmp_path / "good.json"
    good.write_text(emit_testcase(make_tc(benign_prefix("eap_success"))))
    assert main(["validate", str(good)]) == 0
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"commands": [{"receiver": "ims", "op": "send", "name": "eap_success"}]}))
    assert main(["validate", str(good), str(bad)]) == 1
    assert "does not send" in capsys.readouterr().out
    broken = tmp_path / "broken.json"
    broken.write_text("{")
    assert main(["validate", str(broken)]) == 1
