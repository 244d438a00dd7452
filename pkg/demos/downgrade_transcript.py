"""Walkthrough: the ePDG answers IKE_SA_INIT with INVALID_KE_PAYLOAD(MODP_768).

A compliant UE refuses to retry with a group it never offered. The
downgrade_ke profile retries with the 768-bit group.
"""

from vowifi_advtest import ike, oracles
from vowifi_advtest.crypto import DhGroupId
from vowifi_advtest.testbed import Controller
from vowifi_advtest.testcase import Command, TestCase
from vowifi_advtest.ue import resolve_profile

TC = TestCase("downgrade-demo", "ATC", [
    Command(1, "epdg", "substitute", "ike_sa_init_response", substitute_with="invalid_ke_payload(MODP_768)"),
], {})


def main():
    for name in ("compliant", "downgrade_ke"):
        with Controller() as ctl:
            log = ctl.run_testcase(TC, resolve_profile(name), "demo")
        print(f"\n[{name}]")
        for r in log:
            p = r.payload
            if r.direction == "report" and p.get("hex"):
                msg = ike.parse_message(bytes.fromhex(p["hex"]))
                ke = [DhGroupId(pl.group).name for pl in msg.payloads if isinstance(pl, ike.KePayload)]
                print(f"  {p['from']:>4} -> {p['name']:<22} {ike.summarize(msg)['payloads']} {ke or ''}")
            elif r.direction == "report" and r.annotations:
                print(f"       ue note: {', '.join(r.annotations)}")
        print(f"  verdict: {oracles.function_oracle(log).kind.value}")


if __name__ == "__main__":
    main()
