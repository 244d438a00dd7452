"""Central controller: resets the testbed, dispatches commands and logs every report."""

from ..messages import ENTITIES, UE
from ..testcase import Command, LogRecord
from .agents import Agent, LocalChannel, SocketChannel
from .entities import Testbed
from .envelope import make_envelope


class AgentUnreachable(Exception):
    pass


RESET_COMMAND = Command(id=0, receiver=UE, op="reboot")


class Controller:
    def __init__(self, seed=0, transport="local", errors=None):
        self.testbed = Testbed(seed, errors)
        self.channels = {}
        self.hooks = []
        self._epoch = 0
        self._seq = 0
        for entity in ENTITIES:
            self.register(entity, transport)

    # -- agents --

    def register(self, entity, transport="local"):
        agent = Agent(entity, self.testbed)
        cls = {"local": LocalChannel, "socket": SocketChannel}[transport]
        self.unregister(entity)
        self.channels[entity] = cls(agent)

    def unregister(self, entity):
        ch = self.channels.pop(entity, None)
        if ch is not None:
            ch.close()

    def close(self):
        for entity in list(self.channels):
            self.unregister(entity)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def dispatch(self, cmd):
        ch = self.channels.get(cmd.receiver)
        if ch is None:
            raise AgentUnreachable(f"no agent registered for {cmd.receiver!r}")
        self._seq += 1
        return ch.request(make_envelope("command", self._seq, cmd.receiver, {"command": cmd.to_json()}))

    # -- runs --

    def reset_entities(self, profile=None, run_seed=0, full=True):
        """Fresh entity state. Any run in progress stops after its current command."""
        self._epoch += 1
        if full:
            self.testbed.reset_full(profile or self.testbed.profile, run_seed)
        else:
            self.testbed.reset_network(run_seed)

    def run_testcase(self, tc, profile, run_seed=0, reset="full", run_label="run"):
        """Execute ``tc`` and return its log records.

        ``reset="full"`` reboots the UE first (logged as command 0); ``"network"``
        keeps the UE as it is and only refreshes the ePDG and IMS.
        """
        if reset not in ("full", "network"):
            raise ValueError("reset must be 'full' or 'network'")
        self.reset_entities(profile, run_seed, full=reset == "full")
        epoch = self._epoch
        log = []
        commands = ([RESET_COMMAND] if reset == "full" else []) + list(tc.commands)
        for cmd in commands:
            issued = self.testbed.clock
            reports = self.dispatch(cmd)
            self._log(log, tc, run_label, cmd, reports, issued)
            for hook in self.hooks:
                hook(self, cmd, reports)
            if self._epoch != epoch:
                self._annotate(log, tc, run_label, cmd, "aborted:reset")
                break
            final = reports[-1]["body"] if reports else {}
            if "timeout" in final.get("annotations", ()) or reports[-1]["kind"] == "error":
                break
        return log

    def _log(self, log, tc, run_label, cmd, reports, t):
        log.append(LogRecord(t, tc.tc_id, run_label, len(log), "command", cmd.receiver, cmd.id, cmd.to_json(), []))
        for rep in reports:
            body = dict(rep["body"])
            notes = list(body.pop("annotations", []))
            body.pop("final", None)
            if rep["kind"] == "error":
                notes.append("agent_error")
            log.append(LogRecord(body.get("t", t), tc.tc_id, run_label, len(log), "report",
                                 body.get("observer", rep["entity"]), cmd.id, body, notes))

    def _annotate(self, log, tc, run_label, cmd, note):
        log.append(LogRecord(self.testbed.clock, tc.tc_id, run_label, len(log), "control", "controller",
                             cmd.id, {}, [note]))
