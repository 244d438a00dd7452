"""Flow graph of the registration procedure and property-to-PTC encoding.

A property names the message it constrains. Its PTC (positive test case) is
the benign command sequence that drives a UE up to that message; the
transformer later mutates the final command.
"""

import json
import os
from dataclasses import dataclass, field
from importlib import resources

import networkx as nx

from . import messages
from .testcase import Command, TestCase


class FlowError(ValueError):
    pass


class UnreachableState(FlowError):
    def __init__(self, states):
        self.states = list(states)
        super().__init__(f"unreachable from start: {', '.join(self.states)}")


class DuplicateEdge(FlowError):
    pass


class UnknownMessage(FlowError):
    pass


def data_path(*parts):
    return str(resources.files("vowifi_advtest").joinpath("data", *parts))


def load_json(path):
    with open(path) as fh:
        return json.load(fh)


class FlowGraph:
    """Directed state graph whose edges carry ordered (message, sender) steps."""

    def __init__(self, graph, start, states):
        self.graph = graph
        self.start = start
        self.states = states

    def edge_messages(self, u, v):
        return self.graph.edges[u, v]["messages"]

    def happy_path(self):
        path = [self.start]
        seen = {self.start}
        node = self.start
        while True:
            nxt = [v for v in self.graph.successors(node) if v not in seen]
            if not nxt:
                return path
            node = nxt[0]
            path.append(node)
            seen.add(node)

    def message_sequence(self):
        """(message, sender) pairs along the happy path."""
        path = self.happy_path()
        out = []
        for u, v in zip(path, path[1:]):
            out.extend(self.edge_messages(u, v))
        return out

    def messages(self):
        return [m for m, _s in self.message_sequence()]

    def next_after(self, name):
        seq = self.messages()
        if name in seq and seq.index(name) + 1 < len(seq):
            return seq[seq.index(name) + 1]
        return None

    def prefix_to(self, message):
        """Happy-path (message, sender) steps up to and including ``message``."""
        seq = self.message_sequence()
        for i, (m, _s) in enumerate(seq):
            if m == message:
                return seq[:i + 1]
        raise UnknownMessage(f"message {message!r} is not on the flow")


def build_flow_graph(definition=None):
    if definition is None:
        definition = load_json(data_path("flow.json"))
    elif isinstance(definition, (str, os.PathLike)):
        definition = load_json(definition)
    start = definition.get("start", "start")
    states = list(definition.get("states", []))
    g = nx.DiGraph()
    g.add_nodes_from(states)
    if start not in g:
        raise FlowError(f"start state {start!r} not declared")
    seen = set()
    for t in definition.get("transitions", []):
        src, dst = t["from"], t["to"]
        if src not in g or dst not in g:
            raise FlowError(f"transition {src!r}->{dst!r} uses an undeclared state")
        steps = t.get("messages") or [{"message": t["message"], "sender": t["sender"]}]
        pairs = []
        for step in steps:
            key = (src, step["message"])
            if key in seen:
                raise DuplicateEdge(f"two transitions from {src!r} on {step['message']!r}")
            seen.add(key)
            if step["sender"] not in messages.ENTITIES:
                raise FlowError(f"unknown sender {step['sender']!r}")
            pairs.append((step["message"], step["sender"]))
        if g.has_edge(src, dst):
            raise DuplicateEdge(f"two transitions {src!r}->{dst!r}")
        g.add_edge(src, dst, messages=pairs)
    reachable = nx.descendants(g, start) | {start}
    missing = [s for s in states if s not in reachable]
    if missing:
        raise UnreachableState(missing)
    return FlowGraph(g, start, states)


# -- properties ---------------------------------------------------------------

@dataclass
class Property:
    prop_id: str
    text: str
    message: str
    target_fields: list = field(default_factory=list)
    source: str = ""
    metadata: dict = field(default_factory=dict)


def property_from_json(obj):
    return Property(obj["prop_id"], obj["text"], obj["message"], [list(x) for x in obj.get("target_fields", [])],
                    obj.get("source", ""), obj.get("metadata", {}))


def load_properties(path=None):
    raw = load_json(path or data_path("properties.json"))
    return [property_from_json(o) for o in raw]


def encode_property(prop, graph):
    """PTC for one property. Raises UnknownMessage if the message is not on the flow."""
    if prop.message not in messages.MESSAGES:
        raise UnknownMessage(f"{prop.prop_id}: unknown message {prop.message!r}")
    steps = graph.prefix_to(prop.message)
    network = [(m, s) for m, s in steps if s != messages.UE]
    target_sender = steps[-1][1]
    expect = None
    if target_sender == messages.UE:
        expect = prop.message
        if not network:
            cmd = Command(id=1, receiver=messages.UE, op="reboot", expect=expect)
            return TestCase(prop.prop_id, "PTC", [cmd], {"property": prop.prop_id, "message": prop.message})
    commands = [Command(id=i + 1, receiver=s, op="send", name=m) for i, (m, s) in enumerate(network)]
    last = commands[-1]
    hint_attr, hint_val = None, None
    for attr, val in prop.target_fields:
        if attr in messages.vocabulary(last.name):
            hint_attr, hint_val = attr, val
            break
    commands[-1] = Command(id=last.id, receiver=last.receiver, op="send", name=last.name,
                           attribute=hint_attr, value=hint_val, expect=expect)
    return TestCase(prop.prop_id, "PTC", commands, {"property": prop.prop_id, "message": prop.message})


@dataclass
class EncodeResult:
    ptcs: list
    errors: list

    def __iter__(self):
        return iter((self.ptcs, self.errors))


def encode_corpus(properties, graph):
    ptcs, errors = [], []
    for prop in sorted(properties, key=lambda p: p.prop_id):
        try:
            ptcs.append(encode_property(prop, graph))
        except FlowError as exc:
            errors.append({"prop_id": prop.prop_id, "error": str(exc)})
    return EncodeResult(ptcs, errors)


def is_valid_walk(graph, commands):
    """True if the network commands follow the happy path in order."""
    seq = graph.message_sequence()
    pos = 0
    for cmd in commands:
        if cmd.receiver == messages.UE:
            if cmd.op == "reboot":
                pos = 0
            continue
        while pos < len(seq) and seq[pos][1] == messages.UE:
            pos += 1
        if pos >= len(seq) or seq[pos] != (cmd.name, cmd.receiver):
            return False
        pos += 1
    return True
