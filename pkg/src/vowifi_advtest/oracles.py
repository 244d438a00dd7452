"""Function and liveness oracles, the repeated campaign loop and result summaries."""

import enum
import json
import os
import re
from dataclasses import asdict, dataclass, field

from .messages import EPDG, IMS, NEGATIVE_UE_MESSAGES, UE
from .testcase import Command, TestCase
from .testgen import build_flow_graph

REPETITIONS = 3
SEED_ENV = "ADVTEST_SEED"


class MalformedLog(ValueError):
    pass


class VerdictKind(enum.Enum):
    IGNORED = "Ignored"
    POSITIVE = "PositiveResponse"
    NEGATIVE = "NegativeResponse"


@dataclass
class Verdict:
    kind: VerdictKind
    evidence: list = field(default_factory=list)
    mutated: str = None
    expected: str = None
    observed: str = None

    @property
    def alert(self):
        return self.kind is not VerdictKind.IGNORED


def env_seed(default=0):
    raw = os.environ.get(SEED_ENV)
    return int(raw) if raw not in (None, "") else default


def _get(rec, name):
    return rec[name] if isinstance(rec, dict) else getattr(rec, name)


def _ue_messages(records):
    return [r for r in records
            if _get(r, "direction") == "report" and _get(r, "payload").get("from") == UE]


_SIP_STATUS = re.compile(r"^sip_([0-9]{3})$")


def is_negative(name):
    if name in NEGATIVE_UE_MESSAGES:
        return True
    m = _SIP_STATUS.match(name or "")
    return bool(m) and int(m.group(1)) >= 400


def function_oracle(records, flow=None):
    """Classify the UE's reaction to the last adversarial message in a run log."""
    marker = None
    for i, r in enumerate(records):
        if _get(r, "direction") == "report" and "adversarial" in _get(r, "annotations"):
            marker = i
    if marker is None:
        raise MalformedLog("run log has no adversarial-message marker")
    mutated = _get(records[marker], "payload").get("name")
    expected = (flow or _flow()).next_after(mutated)
    after = _ue_messages(records[marker + 1:])
    if not after:
        return Verdict(VerdictKind.IGNORED, [_get(records[marker], "seq")], mutated, expected)
    first = _get(after[0], "payload").get("name")
    kind = VerdictKind.NEGATIVE if is_negative(first) else VerdictKind.POSITIVE
    return Verdict(kind, [_get(r, "seq") for r in [records[marker]] + after], mutated, expected, first)


def liveness_oracle(records):
    """True iff the UE starts IKE_SA_INIT after the last WiFi re-enable of a registration run."""
    start = None
    for i, r in enumerate(records):
        if _get(r, "direction") == "command" and _get(r, "payload").get("op") == "wifi_on":
            start = i
    if start is None:
        raise MalformedLog("registration log has no wifi_on command")
    return any(_get(r, "payload").get("name") == "ike_sa_init_request" for r in _ue_messages(records[start + 1:]))


_FLOW = None


def _flow():
    global _FLOW
    if _FLOW is None:
        _FLOW = build_flow_graph()
    return _FLOW


def benign_registration():
    """Step 3 of the loop: toggle WiFi and drive a normal registration."""
    steps = [(EPDG, "ike_sa_init_response"), (EPDG, "eap_aka_challenge"), (EPDG, "eap_success"),
             (IMS, "401_unauthorized"), (IMS, "200_ok")]
    cmds = [Command(1, UE, "wifi_off"), Command(2, UE, "wifi_on")]
    cmds += [Command(i + 3, r, "send", n) for i, (r, n) in enumerate(steps)]
    return TestCase("benign_registration", "PTC", cmds, {})


# -- campaign -----------------------------------------------------------------

@dataclass
class IssueReport:
    tc_id: str
    profile: str
    issue: int = None
    verdicts: list = field(default_factory=list)
    liveness: list = field(default_factory=list)
    function_alert: bool = False
    liveness_alert: bool = False
    errors: list = field(default_factory=list)
    evidence: list = field(default_factory=list)

    @property
    def alert(self):
        return self.function_alert or self.liveness_alert

    def to_json(self):
        d = asdict(self)
        d["alert"] = self.alert
        return d


def majority(flags):
    flags = list(flags)
    return sum(bool(f) for f in flags) * 2 > len(flags)


def run_seed(seed, profile, tc_id, rep):
    return f"{seed}|{profile}|{tc_id}|{rep}"


def run_atc(controller, atc, profile, seed, rep, flow=None):
    """One repetition: reset, ATC, function oracle, benign registration, liveness oracle."""
    rs = run_seed(seed, profile.name, atc.tc_id, rep)
    label = f"{profile.name}#{rep}"
    atc_log = controller.run_testcase(atc, profile, rs, reset="full", run_label=label)
    try:
        verdict = function_oracle(atc_log, flow)
        error = None
    except MalformedLog as exc:
        verdict, error = None, str(exc)
    reg_log = controller.run_testcase(benign_registration(), profile, rs, reset="network",
                                      run_label=label + "/liveness")
    return verdict, liveness_oracle(reg_log), error, atc_log + reg_log


def run_campaign(atcs, profile, seed=None, reps=REPETITIONS, issues=None, controller=None, log_sink=None):
    """IssueReports for every ATC against ``profile``; ``issues`` maps tc_id to issue tag."""
    from .testbed import Controller

    seed = env_seed() if seed is None else seed
    own = controller is None
    controller = controller or Controller(seed=seed)
    flow = _flow()
    reports = []
    try:
        for atc in atcs:
            rep = IssueReport(atc.tc_id, profile.name, (issues or {}).get(atc.tc_id))
            for i in range(reps):
                verdict, live, error, log = run_atc(controller, atc, profile, seed, i, flow)
                if log_sink is not None:
                    log_sink(log)
                if error:
                    rep.errors.append(error)
                rep.verdicts.append(verdict.kind.value if verdict else None)
                rep.liveness.append(live)
                if verdict is not None and verdict.alert:
                    rep.evidence.append({"rep": i, "seq": verdict.evidence, "observed": verdict.observed})
            rep.function_alert = majority(v not in (None, VerdictKind.IGNORED.value) for v in rep.verdicts)
            rep.liveness_alert = majority(not ok for ok in rep.liveness)
            reports.append(rep)
    finally:
        if own:
            controller.close()
    return reports


# -- summaries ----------------------------------------------------------------

def _alert_kind(rep):
    pos = rep.verdicts.count(VerdictKind.POSITIVE.value)
    neg = rep.verdicts.count(VerdictKind.NEGATIVE.value)
    return "positive" if pos >= neg else "negative"


def summarize(reports):
    """Machine-readable summary grouped by profile and issue tag."""
    profiles = {}
    for r in reports:
        p = profiles.setdefault(r.profile, {"atcs": 0, "alerts": 0, "function_alerts": {"positive": 0, "negative": 0},
                                            "liveness_alerts": 0, "errors": 0, "issues": {}, "untagged_alerts": []})
        p["atcs"] += 1
        p["errors"] += bool(r.errors)
        if not r.alert:
            continue
        p["alerts"] += 1
        if r.function_alert:
            p["function_alerts"][_alert_kind(r)] += 1
        if r.liveness_alert:
            p["liveness_alerts"] += 1
        if r.issue is None:
            p["untagged_alerts"].append(r.tc_id)
        else:
            entry = p["issues"].setdefault(str(r.issue), {"count": 0, "tc_ids": []})
            entry["count"] += 1
            entry["tc_ids"].append(r.tc_id)
    totals = {"atcs": sum(p["atcs"] for p in profiles.values()),
              "alerts": sum(p["alerts"] for p in profiles.values())}
    return {"profiles": profiles, "totals": totals}


def summary_markdown(summary):
    lines = ["| profile | ATCs | alerts | positive | negative | liveness | issues | untagged |",
             "|---|---|---|---|---|---|---|---|"]
    for name, p in sorted(summary["profiles"].items()):
        issues = ", ".join(f"#{k}: {v['count']}" for k, v in sorted(p["issues"].items(), key=lambda kv: int(kv[0])))
        lines.append(f"| {name} | {p['atcs']} | {p['alerts']} | {p['function_alerts']['positive']} | "
                     f"{p['function_alerts']['negative']} | {p['liveness_alerts']} | {issues or '-'} | "
                     f"{len(p['untagged_alerts'])} |")
    return "\n".join(lines) + "\n"


def write_results(reports, directory):
    os.makedirs(directory, exist_ok=True)
    summary = summarize(reports)
    with open(os.path.join(directory, "results.json"), "w") as fh:
        json.dump({"summary": summary, "reports": [r.to_json() for r in reports]}, fh, indent=1, sort_keys=True)
    with open(os.path.join(directory, "results.md"), "w") as fh:
        fh.write(summary_markdown(summary))
    return summary


def clean_violations(reports, expected_clean):
    """Alerts raised on profiles that were declared clean."""
    return [r for r in reports if r.profile in expected_clean and r.alert]
