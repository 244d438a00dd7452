"""Walkthrough: a small campaign with both oracles over a slice of the corpus.

Each ATC runs three times per profile; the function oracle judges the UE's
reaction to the mutated message and the liveness oracle checks that the UE
can still register afterwards. Majority over repetitions decides alerts.
"""

import sys

from vowifi_advtest import oracles
from vowifi_advtest.corpus import build_corpus
from vowifi_advtest.ue import resolve_profile

PROFILES = ("compliant", "weak_encr", "zero_dh", "deadlock")


def main(per_issue=2):
    corpus = build_corpus()
    print(f"corpus: {corpus.manifest['count']} ATCs, sha256 {corpus.manifest['sha256'][:16]}")
    picked, seen = [], {}
    for atc in corpus.atcs:
        tag = corpus.issues.get(atc.tc_id)
        if tag in (1, 8) and seen.get(tag, 0) < per_issue:
            seen[tag] = seen.get(tag, 0) + 1
            picked.append(atc)
    picked += [a for a in corpus.atcs if a.final.op == "substitute" and a.final.name == "eap_aka_challenge"][:2]
    reports = []
    for name in PROFILES:
        reports += oracles.run_campaign(picked, resolve_profile(name), issues=corpus.issues)
    for r in reports:
        if r.alert:
            why = "liveness" if r.liveness_alert else r.verdicts[0]
            print(f"  ALERT {r.profile:<10} {r.tc_id:<32} issue={r.issue} ({why})")
    print()
    print(oracles.summary_markdown(oracles.summarize(reports)))
    return 1 if oracles.clean_violations(reports, {"compliant"}) else 0


if __name__ == "__main__":
    sys.exit(main())
