"""JSON test-case language: commands, test cases, corpora and log records."""

import json
import os
from dataclasses import asdict, dataclass, field
from typing import Optional, Union

from . import messages

COMMAND_KEYS = ("id", "receiver", "name", "op", "attribute", "value",
                "substitute_with", "replay_index", "timeout_ms", "expect")
TESTCASE_KEYS = ("tc_id", "kind", "provenance", "commands")

NETWORK_OPS = ("send", "substitute", "replay", "insert", "update", "drop")
UE_OPS = ("reboot", "wifi_on", "wifi_off")
OPS = NETWORK_OPS + UE_OPS
RECEIVERS = messages.ENTITIES
KINDS = ("PTC", "ATC")
DEFAULT_TIMEOUT_MS = 2000


class SchemaViolation(ValueError):
    pass


class ConstraintViolation(ValueError):
    pass


@dataclass(frozen=True)
class Command:
    id: int
    receiver: str
    op: str
    name: Optional[str] = None
    attribute: Optional[str] = None
    value: Union[int, str, None] = None
    substitute_with: Optional[str] = None
    replay_index: Optional[int] = None
    timeout_ms: int = DEFAULT_TIMEOUT_MS
    expect: Optional[str] = None

    @property
    def mutating(self):
        return self.op not in ("send",) + UE_OPS

    def to_json(self):
        out = {}
        for k in COMMAND_KEYS:
            v = getattr(self, k)
            if v is not None and not (k == "timeout_ms" and v == DEFAULT_TIMEOUT_MS):
                out[k] = v
        return out


@dataclass
class TestCase:
    tc_id: str
    kind: str
    commands: list
    provenance: dict = field(default_factory=dict)

    __test__ = False  # not a pytest class

    @property
    def final(self):
        return self.commands[-1]

    def to_json(self):
        return {"tc_id": self.tc_id, "kind": self.kind, "provenance": self.provenance,
                "commands": [c.to_json() for c in self.commands]}


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def check_command(cmd):
    """Cross-field rules of a single command; raises ConstraintViolation."""
    if cmd.receiver not in RECEIVERS:
        raise ConstraintViolation(f"command {cmd.id}: unknown receiver {cmd.receiver!r}")
    if cmd.op not in OPS:
        raise ConstraintViolation(f"command {cmd.id}: unknown op {cmd.op!r}")
    if cmd.receiver == messages.UE:
        if cmd.op not in UE_OPS:
            raise ConstraintViolation(f"command {cmd.id}: op {cmd.op!r} cannot target the UE")
    else:
        if cmd.op in UE_OPS:
            raise ConstraintViolation(f"command {cmd.id}: op {cmd.op!r} only targets the UE")
        if not cmd.name:
            raise ConstraintViolation(f"command {cmd.id}: network commands need a message name")
    if cmd.op in ("update", "drop", "insert") and not cmd.attribute:
        raise ConstraintViolation(f"command {cmd.id}: {cmd.op} requires attribute")
    if cmd.op == "update" and cmd.value is None:
        raise ConstraintViolation(f"command {cmd.id}: update requires value")
    if cmd.op == "substitute" and not cmd.substitute_with:
        raise ConstraintViolation(f"command {cmd.id}: substitute requires substitute_with")
    if cmd.op == "replay":
        if cmd.replay_index is None:
            raise ConstraintViolation(f"command {cmd.id}: replay requires replay_index")
        if not 1 <= cmd.replay_index < cmd.id:
            raise ConstraintViolation(f"command {cmd.id}: replay_index must name an earlier command")
    if cmd.timeout_ms < 0:
        raise ConstraintViolation(f"command {cmd.id}: negative timeout")


_TYPES = {
    "id": _is_int,
    "receiver": lambda v: isinstance(v, str),
    "name": lambda v: isinstance(v, str),
    "op": lambda v: isinstance(v, str),
    "attribute": lambda v: isinstance(v, str),
    "value": lambda v: _is_int(v) or isinstance(v, str),
    "substitute_with": lambda v: isinstance(v, str),
    "replay_index": _is_int,
    "timeout_ms": _is_int,
    "expect": lambda v: isinstance(v, str),
}


def command_from_json(obj, position):
    if not isinstance(obj, dict):
        raise SchemaViolation(f"command {position} is not an object")
    unknown = set(obj) - set(COMMAND_KEYS)
    if unknown:
        raise SchemaViolation(f"command {position}: unknown keys {sorted(unknown)}")
    for k in ("receiver", "op"):
        if k not in obj:
            raise SchemaViolation(f"command {position}: missing {k!r}")
    for k, v in obj.items():
        if v is not None and not _TYPES[k](v):
            raise SchemaViolation(f"command {position}: {k!r} has wrong type {type(v).__name__}")
    kwargs = {k: v for k, v in obj.items() if v is not None}
    kwargs.setdefault("id", position)
    cmd = Command(**kwargs)
    check_command(cmd)
    return cmd


def testcase_from_json(obj, default_id="tc"):
    if isinstance(obj, list):
        obj = {"tc_id": default_id, "kind": "PTC", "commands": obj}
    if not isinstance(obj, dict):
        raise SchemaViolation("test case must be an object or a command array")
    unknown = set(obj) - set(TESTCASE_KEYS)
    if unknown:
        raise SchemaViolation(f"unknown test-case keys {sorted(unknown)}")
    if "commands" not in obj or not isinstance(obj["commands"], list):
        raise SchemaViolation("test case needs a commands array")
    kind = obj.get("kind", "PTC")
    if kind not in KINDS:
        raise SchemaViolation(f"kind must be one of {KINDS}")
    prov = obj.get("provenance", {})
    if not isinstance(prov, dict):
        raise SchemaViolation("provenance must be an object")
    tc_id = obj.get("tc_id", default_id)
    if not isinstance(tc_id, str) or not tc_id:
        raise SchemaViolation("tc_id must be a non-empty string")
    commands = [command_from_json(c, i + 1) for i, c in enumerate(obj["commands"])]
    if not commands:
        raise ConstraintViolation("test case has no commands")
    ids = [c.id for c in commands]
    if len(set(ids)) != len(ids):
        raise ConstraintViolation("command ids are not unique")
    return TestCase(tc_id, kind, commands, prov)


def parse_testcase(text, default_id="tc"):
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"not JSON: {exc}") from None
    return testcase_from_json(obj, default_id)


def emit_testcase(tc):
    return json.dumps(tc.to_json(), indent=2, sort_keys=False) + "\n"


# -- corpora ------------------------------------------------------------------

@dataclass
class Violation:
    index: int
    tc_id: Optional[str]
    message: str


def validate_corpus(testcases, known_messages=None):
    """Every problem found in a corpus, without raising."""
    known = known_messages if known_messages is not None else messages.MESSAGES
    out = []
    seen = {}
    for i, tc in enumerate(testcases):
        if not isinstance(tc, TestCase):
            try:
                tc = testcase_from_json(tc, f"#{i}")
            except (SchemaViolation, ConstraintViolation, TypeError) as exc:
                out.append(Violation(i, None, str(exc)))
                continue
        if tc.tc_id in seen:
            out.append(Violation(i, tc.tc_id, f"duplicate tc_id (first at index {seen[tc.tc_id]})"))
        else:
            seen[tc.tc_id] = i
        positions = {c.id: n for n, c in enumerate(tc.commands)}
        for n, cmd in enumerate(tc.commands):
            try:
                check_command(cmd)
            except ConstraintViolation as exc:
                out.append(Violation(i, tc.tc_id, str(exc)))
                continue
            if cmd.receiver != messages.UE:
                if cmd.name not in known:
                    out.append(Violation(i, tc.tc_id, f"command {cmd.id}: unknown message {cmd.name!r}"))
                elif messages.sender_of(cmd.name) != cmd.receiver:
                    out.append(Violation(i, tc.tc_id,
                                         f"command {cmd.id}: {cmd.receiver} does not send {cmd.name!r}"))
            if cmd.op == "replay" and positions.get(cmd.replay_index, n) >= n:
                out.append(Violation(i, tc.tc_id, f"command {cmd.id}: replay_index out of range"))
            if cmd.expect is not None and cmd.expect not in known:
                out.append(Violation(i, tc.tc_id, f"command {cmd.id}: unknown expected message {cmd.expect!r}"))
    return out


def _safe_name(tc_id):
    return tc_id.replace("/", "__")


def save_corpus(testcases, directory):
    os.makedirs(directory, exist_ok=True)
    paths = []
    for tc in testcases:
        path = os.path.join(directory, _safe_name(tc.tc_id) + ".json")
        with open(path, "w") as fh:
            fh.write(emit_testcase(tc))
        paths.append(path)
    return paths


def load_corpus(directory):
    out = []
    for fname in sorted(os.listdir(directory)):
        if fname.endswith(".json") and not fname.startswith("_"):
            with open(os.path.join(directory, fname)) as fh:
                out.append(parse_testcase(fh.read(), fname[:-5]))
    return out


# -- log records ----------------------------------------------------------------

@dataclass
class LogRecord:
    timestamp: int
    tc_id: str
    run: str
    seq: int
    direction: str
    entity: str
    cmd_seq: int
    payload: dict = field(default_factory=dict)
    annotations: list = field(default_factory=list)


LOG_KEYS = tuple(LogRecord.__dataclass_fields__)


def emit_log_record(rec):
    return json.dumps(asdict(rec), sort_keys=True, separators=(",", ":"))


def parse_log_record(line):
    obj = json.loads(line)
    if set(obj) != set(LOG_KEYS):
        raise SchemaViolation(f"log record keys {sorted(obj)} do not match {sorted(LOG_KEYS)}")
    return LogRecord(**obj)


def write_log(records, path):
    with open(path, "w") as fh:
        for r in records:
            fh.write(emit_log_record(r) + "\n")


def read_log(path):
    with open(path) as fh:
        return [parse_log_record(line) for line in fh if line.strip()]
