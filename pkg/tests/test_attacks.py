import pytest

from conftest import atc_with
from vowifi_advtest import attacks, crypto
from vowifi_advtest.testbed import Controller
from vowifi_advtest.ue import resolve_profile

IMSI = "001010123456789"


def captured(profile, tc):
    with Controller() as ctl:
        log = ctl.run_testcase(tc, resolve_profile(profile), "s")
    msgs = {}
    for r in log:
        p = r.payload
        if r.direction == "report" and p.get("event") in ("sent", "received") and p.get("name"):
            msgs.setdefault(p["name"], bytes.fromhex(p["hex"]))
    return msgs, log


def test_identity_recovered_from_zero_dh_session():
    msgs, log = captured("zero_dh", atc_with("ike_sa_init_response", op="drop", attribute="key_exchange"))
    imsi = attacks.recover_identity(msgs["ike_sa_init_request"], msgs["ike_sa_init_response"],
                                    msgs["ike_auth_request"])
    assert imsi == IMSI
    assert any(f"zero_dh_identity:{IMSI}" in r.annotations for r in log)


def test_no_identity_from_real_dh():
    msgs, _log = captured("compliant", atc_with("ike_sa_init_response"))
    args = (msgs["ike_sa_init_request"], msgs["ike_sa_init_response"], msgs["ike_auth_request"])
    with pytest.raises(crypto.IntegrityFailure):
        attacks.recover_identity(*args)
    assert attacks.try_zero_dh_identity(*args) is None
    assert attacks.try_zero_dh_identity(b"", b"", b"") is None


def test_zero_dh_keys_follow_negotiated_algorithms():
    msgs, _log = captured("zero_dh", atc_with("ike_sa_init_response", op="drop", attribute="key_exchange"))
    keys, algs = attacks.zero_dh_keys(msgs["ike_sa_init_request"], msgs["ike_sa_init_response"])
    assert len(keys.sk_ei) == 16 and algs.dh == 14
