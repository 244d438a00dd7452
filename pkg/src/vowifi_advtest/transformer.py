"""PTC -> ATC mutation: substitute, replay, update and drop the final command."""

import hashlib
import json
import re
from dataclasses import dataclass, field, replace

from . import crypto, ike, messages, sip
from .testcase import Command, TestCase
from .testgen import data_path, load_json


class ConfigError(ValueError):
    pass


class NotApplicable(ValueError):
    pass


@dataclass(frozen=True)
class ErrorMessage:
    """A replacement message the network can send instead of the expected one."""
    name: str
    protocol: str
    notify: str = None
    eap: str = None
    status: int = None
    param: str = None
    messages: tuple = ()

    @property
    def label(self):
        return f"{self.name}({self.param})" if self.param is not None else self.name

    def applies_to(self, message):
        if messages.protocol_of(message) != self.protocol:
            return False
        return not self.messages or message in self.messages


_LABEL = re.compile(r"^([a-z0-9_]+)(?:\(([^()]*)\))?$")


def split_label(label):
    m = _LABEL.match(label or "")
    if not m:
        raise ConfigError(f"bad error-message label {label!r}")
    return m.group(1), m.group(2)


@dataclass
class MutationConfig:
    error_messages: list = field(default_factory=list)
    attribute_value_sets: dict = field(default_factory=dict)
    droppable_attributes: dict = field(default_factory=dict)
    replay_window: dict = field(default_factory=lambda: {"receivers": list(messages.NETWORK_ENTITIES)})
    issue_tags: list = field(default_factory=list)

    def error(self, label):
        for e in self.error_messages:
            if e.label == label:
                return e
        raise ConfigError(f"no error message {label!r} in config")


def _expand_errors(entries):
    out = []
    for e in entries:
        base = dict(name=e["name"], protocol=e["protocol"], notify=e.get("notify"), eap=e.get("eap"),
                    status=e.get("status"), messages=tuple(e.get("messages", ())))
        params = e.get("params")
        if params:
            out.extend(ErrorMessage(param=str(p), **base) for p in params)
        else:
            out.append(ErrorMessage(**base))
    return out


def _check_error(e):
    if e.protocol not in ("ike", "sip"):
        raise ConfigError(f"{e.label}: protocol must be ike or sip")
    if e.protocol == "ike":
        if e.notify is None and e.eap is None:
            raise ConfigError(f"{e.label}: IKE error needs a notify type or eap kind")
        if e.notify is not None and e.notify not in ike.NotifyType.__members__:
            raise ConfigError(f"{e.label}: unknown notify {e.notify!r}")
        if e.notify == "INVALID_KE_PAYLOAD":
            if e.param is None:
                raise ConfigError(f"{e.label}: INVALID_KE_PAYLOAD needs a DH group parameter")
            if e.param not in crypto.DhGroupId.__members__ and not e.param.isdigit():
                raise ConfigError(f"{e.label}: {e.param!r} is not a DH group")
    elif e.status is None or not 300 <= int(e.status) <= 699:
        raise ConfigError(f"{e.label}: SIP error needs a 3xx-6xx status")
    for m in e.messages:
        if m not in messages.MESSAGES:
            raise ConfigError(f"{e.label}: unknown message {m!r}")


def config_from_json(obj):
    allowed = {"error_messages", "attribute_value_sets", "droppable_attributes", "replay_window", "issue_tags"}
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    cfg = MutationConfig(
        error_messages=_expand_errors(obj.get("error_messages", [])),
        attribute_value_sets={k: list(v) for k, v in obj.get("attribute_value_sets", {}).items()},
        droppable_attributes={k: list(v) for k, v in obj.get("droppable_attributes", {}).items()},
        replay_window=dict(obj.get("replay_window", {"receivers": list(messages.NETWORK_ENTITIES)})),
        issue_tags=list(obj.get("issue_tags", [])),
    )
    validate_config(cfg)
    return cfg


def validate_config(cfg):
    vocab = ike.IKE_VOCABULARY | sip.SIP_VOCABULARY
    labels = set()
    for e in cfg.error_messages:
        _check_error(e)
        if e.label in labels:
            raise ConfigError(f"duplicate error message {e.label!r}")
        labels.add(e.label)
    for path, values in cfg.attribute_value_sets.items():
        if path not in vocab:
            raise ConfigError(f"attribute {path!r} is not in the codec vocabulary")
        if len(set(map(json.dumps, values))) != len(values):
            raise ConfigError(f"attribute {path!r} has duplicate values")
    for msg, paths in cfg.droppable_attributes.items():
        if msg not in messages.MESSAGES:
            raise ConfigError(f"droppable list for unknown message {msg!r}")
        for p in paths:
            if p not in messages.vocabulary(msg):
                raise ConfigError(f"{p!r} is not an attribute of {msg}")
    for r in cfg.replay_window.get("receivers", []):
        if r not in messages.NETWORK_ENTITIES:
            raise ConfigError(f"replay receiver {r!r} is not a network entity")
    return cfg


def load_config(path=None):
    return config_from_json(load_json(path or data_path("mutation.json")))


# -- transformations ------------------------------------------------------------

def _descriptor(cmd):
    d = {"op": cmd.op}
    for k in ("attribute", "value", "substitute_with", "replay_index"):
        v = getattr(cmd, k)
        if v is not None:
            d[k] = v
    return d


def _atc(ptc, final):
    desc = _descriptor(final)
    digest = hashlib.sha1(json.dumps(desc, sort_keys=True).encode()).hexdigest()[:8]
    prov = dict(ptc.provenance)
    prov.update({"source_ptc": ptc.tc_id, "transform": desc})
    return TestCase(f"{ptc.tc_id}/{final.op}/{digest}", "ATC", ptc.commands[:-1] + [final], prov)


def _final_network(ptc):
    final = ptc.final
    if final.receiver == messages.UE or final.name not in messages.MESSAGES:
        raise NotApplicable(f"{ptc.tc_id}: final command is not a network message")
    return final


def _base(final, **changes):
    cleared = dict(attribute=None, value=None, substitute_with=None, replay_index=None)
    cleared.update(changes)
    return replace(final, **cleared)


def transform_substitute(ptc, error):
    final = _final_network(ptc)
    if not error.applies_to(final.name):
        raise NotApplicable(f"{error.label} cannot replace {final.name}")
    return _atc(ptc, _base(final, op="substitute", substitute_with=error.label))


def transform_replay(ptc, index):
    final = _final_network(ptc)
    earlier = {c.id: c for c in ptc.commands[:-1]}
    if index not in earlier or earlier[index].receiver != final.receiver:
        raise NotApplicable(f"command {index} was not sent by {final.receiver}")
    return _atc(ptc, _base(final, op="replay", replay_index=index))


def transform_update(ptc, attribute, value):
    final = _final_network(ptc)
    if attribute not in messages.vocabulary(final.name):
        raise NotApplicable(f"{attribute!r} is not an attribute of {final.name}")
    return _atc(ptc, _base(final, op="update", attribute=attribute, value=value))


def transform_drop(ptc, attribute):
    final = _final_network(ptc)
    if attribute not in messages.vocabulary(final.name):
        raise NotApplicable(f"{attribute!r} is not an attribute of {final.name}")
    return _atc(ptc, _base(final, op="drop", attribute=attribute))


def expand_ptc(ptc, cfg):
    try:
        final = _final_network(ptc)
    except NotApplicable:
        return []
    out = []
    for e in cfg.error_messages:
        if e.applies_to(final.name):
            out.append(transform_substitute(ptc, e))
    if final.receiver in cfg.replay_window.get("receivers", []):
        max_back = cfg.replay_window.get("max_back")
        earlier = [c.id for c in ptc.commands[:-1] if c.receiver == final.receiver]
        if max_back is not None:
            earlier = earlier[-max_back:] if max_back > 0 else []
        out.extend(transform_replay(ptc, j) for j in earlier)
    vocab = messages.vocabulary(final.name)
    for attr, values in cfg.attribute_value_sets.items():
        if attr in vocab:
            out.extend(transform_update(ptc, attr, v) for v in values)
    for attr in cfg.droppable_attributes.get(final.name, []):
        out.append(transform_drop(ptc, attr))
    return out


def generate_corpus(ptcs, cfg):
    out = []
    for ptc in sorted(ptcs, key=lambda t: t.tc_id):
        out.extend(expand_ptc(ptc, cfg))
    ids = [t.tc_id for t in out]
    if len(set(ids)) != len(ids):
        raise ConfigError("generated duplicate ATC ids")
    return out


# -- issue tags and manifest ----------------------------------------------------

def _same_value(a, b):
    if isinstance(a, str) and isinstance(b, str):
        return a.lower() == b.lower()
    return a == b


def issue_for(atc, cfg):
    final = atc.final
    for rule in cfg.issue_tags:
        if "op" in rule and rule["op"] != final.op:
            continue
        if "message" in rule and rule["message"] != final.name:
            continue
        if "attribute" in rule and rule["attribute"] != final.attribute:
            continue
        if "values" in rule and not any(_same_value(final.value, v) for v in rule["values"]):
            continue
        if "substitute_with" in rule and final.substitute_with not in rule["substitute_with"]:
            continue
        return rule["issue"]
    return None


def corpus_hash(atcs):
    h = hashlib.sha256()
    for t in atcs:
        h.update(json.dumps(t.to_json(), sort_keys=True, separators=(",", ":")).encode())
        h.update(b"\n")
    return h.hexdigest()


def build_manifest(atcs, cfg):
    issues = {}
    for t in atcs:
        tag = issue_for(t, cfg)
        if tag is not None:
            issues[t.tc_id] = tag
    counts = {}
    for t in atcs:
        counts[t.final.op] = counts.get(t.final.op, 0) + 1
    return {
        "count": len(atcs),
        "by_operator": counts,
        "sha256": corpus_hash(atcs),
        "tc_ids": [t.tc_id for t in atcs],
        "issues": issues,
    }
