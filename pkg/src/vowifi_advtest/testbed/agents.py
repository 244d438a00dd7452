"""Per-entity agents and the channels the controller reaches them through."""

import socket
import threading

from ..messages import MESSAGE_ORDER, UE
from ..testcase import command_from_json
from .entities import StateViolation
from .envelope import make_envelope, read_frame, write_frame


class Agent:
    """Executes commands for one entity of a shared ``Testbed`` and reports what the tap saw."""

    def __init__(self, entity, testbed):
        self.entity = entity
        self.testbed = testbed

    def handle(self, envelope):
        seq = envelope.get("seq")
        try:
            cmd = command_from_json(envelope["body"]["command"], envelope["body"]["command"].get("id", 0))
        except (KeyError, TypeError, ValueError) as exc:
            return [make_envelope("error", seq, self.entity, {"error": str(exc), "final": True})]
        if cmd.receiver != self.entity:
            return [make_envelope("error", seq, self.entity,
                                  {"error": f"command for {cmd.receiver} sent to {self.entity}", "final": True})]
        bed = self.testbed
        bed.drain()
        notes = []
        if self.entity == UE:
            self._ue(cmd)
        else:
            try:
                getattr(bed, self.entity).execute(cmd)
            except StateViolation as exc:
                notes.append(f"state_violation:{exc}")
        bed.ue_status()
        observed = bed.drain()
        expects_reply = self.entity != UE and cmd.name != MESSAGE_ORDER[-1]
        if expects_reply and not any(o.get("from") == UE for o in observed):
            bed.clock += cmd.timeout_ms
            notes.append("timeout")
        if notes or not observed:
            observed.append({"t": bed.clock, "observer": self.entity, "event": "idle", "annotations": []})
            observed[-1]["annotations"] = observed[-1]["annotations"] + notes
        out = []
        for i, obs in enumerate(observed):
            body = dict(obs, final=i == len(observed) - 1)
            out.append(make_envelope("report", seq, self.entity, body))
        return out

    def _ue(self, cmd):
        bed = self.testbed
        ue = bed.ue
        if cmd.op == "reboot":
            bed.clock += ue.profile.boot_ms
            outputs = ue.reboot()
        elif cmd.op == "wifi_on":
            outputs = ue.wifi_on()
        else:
            outputs = ue.wifi_off()
        bed.route(outputs)


class LocalChannel:
    """In-process delivery; envelopes are passed as dicts."""

    def __init__(self, agent):
        self.agent = agent

    def request(self, envelope):
        return self.agent.handle(envelope)

    def close(self):
        pass


class SocketChannel:
    """Agent served on one end of a socket pair by a worker thread; frames are length-prefixed JSON."""

    def __init__(self, agent):
        self.agent = agent
        self._sock, theirs = socket.socketpair()
        self._thread = threading.Thread(target=self._serve, args=(theirs,), daemon=True)
        self._thread.start()

    def _serve(self, sock):
        with sock:
            while True:
                env = read_frame(sock)
                if env is None:
                    return
                for rep in self.agent.handle(env):
                    write_frame(sock, rep)

    def request(self, envelope):
        write_frame(self._sock, envelope)
        out = []
        while True:
            rep = read_frame(self._sock)
            if rep is None:
                raise ConnectionError("agent closed the channel")
            out.append(rep)
            if rep["body"].get("final"):
                return out

    def close(self):
        self._sock.close()
        self._thread.join(timeout=2)
