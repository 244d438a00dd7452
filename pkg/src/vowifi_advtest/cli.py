"""Command-line entry point: encode, mutate, run, campaign, validate."""

import argparse
import json
import os
import sys
import time

from . import oracles, testgen, transformer
from .corpus import build_corpus
from .testbed import Controller
from .testcase import (ConstraintViolation, SchemaViolation, emit_log_record, load_corpus, parse_testcase,
                       save_corpus, validate_corpus, write_log)
from .ue import ISSUE_PROFILES, resolve_profile


def _dump(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def cmd_encode(args):
    props = testgen.load_properties(args.properties)
    graph = testgen.build_flow_graph(args.flow)
    ptcs, errors = testgen.encode_corpus(props, graph)
    if args.out:
        save_corpus(ptcs, args.out)
    print(f"{len(props)} properties -> {len(ptcs)} PTCs, {len(errors)} errors")
    for e in errors:
        print(f"  {e['prop_id']}: {e['error']}")
    return 1 if errors else 0


def cmd_mutate(args):
    cfg = transformer.load_config(args.config)
    if args.ptcs:
        ptcs = load_corpus(args.ptcs)
    else:
        ptcs = testgen.encode_corpus(testgen.load_properties(args.properties), testgen.build_flow_graph()).ptcs
    atcs = transformer.generate_corpus(ptcs, cfg)
    manifest = transformer.build_manifest(atcs, cfg)
    if args.out:
        save_corpus(atcs, args.out)
        _dump(manifest, os.path.join(args.out, "_manifest.json"))
    ops = ", ".join(f"{k}={v}" for k, v in sorted(manifest["by_operator"].items()))
    print(f"{len(ptcs)} PTCs -> {manifest['count']} ATCs ({ops})")
    print(f"sha256 {manifest['sha256']}")
    return 0


def cmd_run(args):
    with open(args.testcase) as fh:
        tc = parse_testcase(fh.read(), os.path.basename(args.testcase)[:-5])
    profile = resolve_profile(args.profile)
    seed = oracles.env_seed(args.seed)
    with Controller(seed=seed, transport=args.transport) as ctl:
        log = ctl.run_testcase(tc, profile, oracles.run_seed(seed, profile.name, tc.tc_id, 0))
    if args.log:
        write_log(log, args.log)
    for r in log:
        p = r.payload
        what = p.get("op") if r.direction == "command" else f"{p.get('event', '')} {p.get('name', '')}".strip()
        notes = f"  [{', '.join(r.annotations)}]" if r.annotations else ""
        print(f"{r.timestamp:>6} {r.cmd_seq:>2} {r.direction:<7} {r.entity:<5} {what}{notes}")
    if tc.kind == "ATC":
        try:
            v = oracles.function_oracle(log)
            print(f"verdict: {v.kind.value} (observed {v.observed}, flow expects {v.expected})")
        except oracles.MalformedLog as exc:
            print(f"verdict: unavailable ({exc})")
    return 0


def cmd_campaign(args):
    corpus = build_corpus()
    atcs = load_corpus(args.corpus) if args.corpus else corpus.atcs
    issues = dict(corpus.issues)
    if args.corpus:
        cfg = transformer.load_config(args.config)
        issues = {t.tc_id: transformer.issue_for(t, cfg) for t in atcs if transformer.issue_for(t, cfg)}
    if args.limit:
        atcs = atcs[:args.limit]
    names = args.profiles or ["compliant"] + [ISSUE_PROFILES[i] for i in sorted(ISSUE_PROFILES)]
    seed = oracles.env_seed(args.seed)
    log_fh = open(args.log, "w") if args.log else None
    reports = []
    try:
        for name in names:
            profile = resolve_profile(name)
            t = time.time()
            sink = (lambda recs: log_fh.writelines(emit_log_record(r) + "\n" for r in recs)) if log_fh else None
            got = oracles.run_campaign(atcs, profile, seed=seed, reps=args.reps, issues=issues, log_sink=sink)
            reports.extend(got)
            print(f"{profile.name}: {sum(r.alert for r in got)} alerts over {len(got)} ATCs "
                  f"in {time.time() - t:.1f}s", flush=True)
    finally:
        if log_fh:
            log_fh.close()
    summary = oracles.write_results(reports, args.out) if args.out else oracles.summarize(reports)
    print(oracles.summary_markdown(summary), end="")
    bad = oracles.clean_violations(reports, set(args.expect_clean))
    for r in bad:
        print(f"unexpected alert on clean profile {r.profile}: {r.tc_id}", file=sys.stderr)
    return 1 if bad else 0


def cmd_validate(args):
    tcs = []
    for path in args.paths:
        if os.path.isdir(path):
            tcs.extend(load_corpus(path))
        else:
            with open(path) as fh:
                try:
                    tcs.append(parse_testcase(fh.read(), os.path.basename(path)))
                except (SchemaViolation, ConstraintViolation) as exc:
                    print(f"{path}: {exc}")
                    return 1
    problems = validate_corpus(tcs)
    for v in problems:
        print(f"{v.tc_id or '#' + str(v.index)}: {v.message}")
    print(f"{len(tcs)} testcases, {len(problems)} problems")
    return 1 if problems else 0


def build_parser():
    p = argparse.ArgumentParser(prog="vowifi-advtest", description="Adversarial testing of a simulated VoWiFi UE.")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("encode", help="properties -> PTCs")
    e.add_argument("--properties", help="properties JSON (default: shipped set)")
    e.add_argument("--flow", help="flow graph JSON (default: shipped flow)")
    e.add_argument("--out", help="directory to write PTC files")
    e.set_defaults(func=cmd_encode)

    m = sub.add_parser("mutate", help="PTCs -> ATCs and manifest")
    m.add_argument("--ptcs", help="PTC directory (default: encode the shipped properties)")
    m.add_argument("--properties", help="properties JSON when --ptcs is not given")
    m.add_argument("--config", help="mutation config JSON (default: shipped)")
    m.add_argument("--out", help="directory to write ATC files and _manifest.json")
    m.set_defaults(func=cmd_mutate)

    r = sub.add_parser("run", help="execute one testcase and print its log")
    r.add_argument("testcase")
    r.add_argument("--profile", default="compliant", help="shipped profile name or profile file")
    r.add_argument("--seed", type=int, default=0, help="overridden by ADVTEST_SEED")
    r.add_argument("--transport", choices=("local", "socket"), default="local")
    r.add_argument("--log", help="write JSON-lines log here")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("campaign", help="run ATCs against profiles with both oracles")
    c.add_argument("--profiles", nargs="*", help="profile names or files (default: compliant + 10 issue profiles)")
    c.add_argument("--corpus", help="ATC directory (default: shipped corpus)")
    c.add_argument("--config", help="mutation config for issue tags of --corpus")
    c.add_argument("--reps", type=int, default=oracles.REPETITIONS)
    c.add_argument("--limit", type=int, help="only the first N ATCs")
    c.add_argument("--seed", type=int, default=0, help="overridden by ADVTEST_SEED")
    c.add_argument("--out", help="directory for results.json and results.md")
    c.add_argument("--log", help="write every run log as JSON lines")
    c.add_argument("--expect-clean", nargs="*", default=["compliant"],
                   help="profiles that must raise no alert (exit status 1 otherwise)")
    c.set_defaults(func=cmd_campaign)

    v = sub.add_parser("validate", help="schema and constraint checks for testcase files")
    v.add_argument("paths", nargs="+")
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
