"""Network-side entities (ePDG, IMS) and the simulated network that links them to the UE.

Every message that crosses the network is appended to ``Testbed.tap`` as an
observation; agents hand those observations back to the controller as reports.
"""

import random

from .. import attacks, crypto, eap, ike, sip
from ..crypto import DhGroupId, EncrId, IntegId, PrfId, TransformType
from ..transformer import split_label
from ..tunnel import Tunnel, derive_child_keys
from ..ue import EPDG_FQDN, HOME_DOMAIN, SimUe, impi
from ..values import InvalidValue

HOP_MS = 1
P_CSCF = bytes([10, 0, 0, 10])
UE_INNER_ADDR = bytes([10, 0, 0, 2])

EPDG_POLICY = {
    TransformType.ENCR: {EncrId.ENCR_AES_CBC},
    TransformType.PRF: {PrfId.PRF_HMAC_SHA1},
    TransformType.INTEG: {IntegId.AUTH_HMAC_SHA1_96},
    TransformType.DH: {DhGroupId.MODP_2048},
}
STRONG_SIP = {("aes-cbc", "hmac-sha-1-96"), ("des-ede3-cbc", "hmac-sha-1-96")}


class StateViolation(Exception):
    pass


def _hex(data):
    return data.hex().upper()


def classify_ue_ike(msg, inner=None):
    """Message name for an IKE message sent by the UE."""
    h = msg.header
    view = inner if inner is not None else msg
    if h.exchange_type == ike.ExchangeType.IKE_SA_INIT and not h.is_response:
        return "ike_sa_init_request"
    if view.error_notify() is not None:
        return "ike_error_notify"
    if view.find(ike.DeletePayload) is not None:
        return "ike_delete"
    if h.exchange_type == ike.ExchangeType.IKE_AUTH and not h.is_response:
        p = view.find(ike.EapPayload)
        if p is not None:
            try:
                pkt = eap.decode_eap(p.data)
            except eap.EapError:
                pkt = None
            if pkt is not None and pkt.subtype == eap.AkaSubtype.AUTHENTICATION_REJECT:
                return "eap_aka_reject"
            if pkt is not None and pkt.subtype == eap.AkaSubtype.CLIENT_ERROR:
                return "eap_client_error"
            return "eap_aka_response"
        if inner is None:
            return "ike_auth_request" if h.message_id == 1 else "eap_aka_response"
        return "ike_auth_request"
    if h.exchange_type == ike.ExchangeType.INFORMATIONAL:
        return "ike_informational"
    return "ike_unknown"


def classify_ue_sip(msg):
    if msg.is_request:
        cseq, _m = msg.cseq()
        return "sip_register" if (cseq or 1) <= 1 else "sip_register_auth"
    return f"sip_{msg.status}"


class Epdg:
    """IKEv2 responder and EAP-AKA server; tunnel endpoint for SIP."""

    def __init__(self, bed, rng, subscriber):
        self.bed = bed
        self.rng = rng
        self.subscriber = subscriber
        self.stage = "idle"
        self.inbox = []
        self.history = {}
        self.keys = None
        self.algs = None
        self.spi_i = self.spi_r = 0
        self.ni = self.nr = b""
        self.init_request = b""
        self.init_response = b""
        self.vector = None
        self.aka_keys = None
        self.idr_body = None
        self.child_proposal = None
        self.tunnel = None
        self.identity = None

    def _keypair(self, group):
        return crypto.dh_keypair(group, f"{self.bed.seed}|epdg|{int(group)}")

    # -- traffic from the UE --

    def on_ike(self, data):
        notes = []
        msg = ike.try_parse(data)
        if isinstance(msg, ike.IkeError):
            name, summary = "ike_unparseable", {"error": type(msg).__name__}
        else:
            inner = None
            if msg.find(ike.EncryptedPayload) is not None:
                if self.keys is not None:
                    try:
                        inner = ike.open_message(msg, self.keys, self.algs, initiator=True)
                    except (crypto.CryptoError, ike.IkeError):
                        notes.append("decrypt_failed")
                if inner is None:
                    recovered = attacks.try_zero_dh_identity(self.init_request, self.init_response, data)
                    if recovered is not None:
                        notes.append(f"zero_dh_identity:{recovered}")
            name = classify_ue_ike(msg, inner)
            summary = ike.summarize(inner if inner is not None else msg)
        self.inbox.append(data)
        self.bed.observe("epdg", "received", frm="ue", to="epdg", protocol="ike", name=name,
                         summary=summary, data=data, notes=notes)

    def on_esp(self, packet):
        if self.tunnel is None:
            self.bed.observe("epdg", "dropped", frm="ue", to="epdg", protocol="esp", name="esp_without_tunnel",
                             summary={}, data=packet, notes=["no_tunnel"])
            return
        try:
            plain = self.tunnel.open(packet)
        except crypto.CryptoError:
            self.bed.observe("epdg", "dropped", frm="ue", to="epdg", protocol="esp", name="esp_integrity",
                             summary={}, data=packet, notes=["tunnel_integrity"])
            return
        self.bed.ims.on_sip(plain)

    def deliver_sip(self, data):
        if self.tunnel is None:
            return False
        self.bed.to_ue("esp", self.tunnel.seal(data))
        return True

    # -- commands --

    def execute(self, cmd):
        if cmd.op == "replay":
            data = self.history.get(cmd.replay_index)
            if data is None:
                raise StateViolation(f"nothing was sent by command {cmd.replay_index}")
            self.inbox.clear()
            self._emit(cmd, cmd.name, data, {"replay_of": cmd.replay_index})
            return
        if not self.inbox:
            raise StateViolation("no pending UE message to answer")
        pending = self.inbox.pop()
        self.inbox.clear()
        req = ike.parse_message(pending)
        expected = self._expected_reply(req)
        if cmd.name != expected:
            raise StateViolation(f"state machine answers with {expected}, command asks for {cmd.name}")
        if cmd.op == "substitute":
            msg, sealed = self._error_reply(req, cmd.substitute_with)
            info = {"substitute_with": cmd.substitute_with}
        else:
            build = {"ike_sa_init_response": self._sa_init_reply, "eap_aka_challenge": self._challenge_reply,
                     "eap_success": self._success_reply}[expected]
            msg, sealed = build(req, cmd)
            info = {}
        data = self._finish(msg, sealed)
        if expected == "ike_sa_init_response" and cmd.op != "substitute":
            self.init_response = data
        self._emit(cmd, expected, data, info)

    def _expected_reply(self, req):
        h = req.header
        if h.exchange_type == ike.ExchangeType.IKE_SA_INIT and not h.is_response:
            return "ike_sa_init_response"
        if h.exchange_type == ike.ExchangeType.IKE_AUTH and self.keys is not None:
            return "eap_aka_challenge" if h.message_id == 1 else "eap_success"
        return "unexpected"

    def _emit(self, cmd, name, data, info):
        self.history[cmd.id] = data
        notes = ["adversarial"] if cmd.mutating else []
        summary = {"bytes": len(data)}
        summary.update(info)
        parsed = ike.try_parse(data)
        if not isinstance(parsed, ike.IkeError):
            summary.update(ike.summarize(parsed))
        if cmd.op in ("update", "drop", "insert"):
            summary["mutation"] = {"op": cmd.op, "attribute": cmd.attribute, "value": cmd.value}
        self.bed.observe("epdg", "sent", frm="epdg", to="ue", protocol="ike", name=name, summary=summary,
                         data=data, notes=notes)
        self.bed.to_ue("ike", data)

    def _finish(self, msg, sealed):
        if sealed:
            return ike.seal_message(msg, self.keys, self.algs, False, self.rng.randbytes(16)).raw
        return ike.serialize_message(msg)

    def _mutate(self, msg, cmd):
        try:
            if cmd.op == "update":
                ike.apply_update(msg, cmd.attribute, cmd.value)
                if cmd.attribute == "security_association.dh":
                    self._regenerate_ke(msg)
            elif cmd.op == "drop":
                ike.apply_drop(msg, cmd.attribute)
            elif cmd.op == "insert":
                ike.apply_insert(msg, cmd.attribute, cmd.value)
        except (ike.IkeError, eap.EapError, InvalidValue) as exc:
            raise StateViolation(f"mutation not applicable: {exc}") from None

    def _regenerate_ke(self, msg):
        # the group is chosen before KE generation, so the public value follows the new group
        sa, ke = msg.find(ike.SaPayload), msg.find(ike.KePayload)
        dh = sa.proposals[0].of_type(TransformType.DH) if sa and sa.proposals else []
        if ke is not None and dh and crypto.is_registered(TransformType.DH, dh[0].id):
            ke.group = dh[0].id
            ke.data = self._keypair(dh[0].id).public_bytes

    def _header(self, req, mid=None):
        return ike.IkeHeader(req.header.spi_i, self.spi_r, req.header.exchange_type, ike.FLAG_RESPONSE,
                             req.header.message_id if mid is None else mid)

    # IKE_SA_INIT
    def _sa_init_reply(self, req, cmd):
        sa, ke, nonce = req.find(ike.SaPayload), req.find(ike.KePayload), req.find(ike.NoncePayload)
        if sa is None or ke is None or nonce is None:
            raise StateViolation("IKE_SA_INIT request lacks SA, KE or Nonce")
        chosen = ike.select_proposal(sa, EPDG_POLICY)
        if chosen is None:
            raise StateViolation("no acceptable proposal offered")
        group = DhGroupId(chosen.of_type(TransformType.DH)[0].id)
        if ke.group != group:
            raise StateViolation("initiator KE group differs from the chosen group")
        self.spi_i = req.header.spi_i
        self.spi_r = self.rng.getrandbits(64) | 1
        self.ni, self.nr = nonce.data, self.rng.randbytes(32)
        kp = self._keypair(group)
        chosen.num = sa.proposals[0].num
        msg = ike.IkeMessage(self._header(req), [ike.SaPayload([chosen]), ike.KePayload(group, kp.public_bytes),
                                                 ike.NoncePayload(self.nr)])
        encr = chosen.of_type(TransformType.ENCR)[0].id
        prf = chosen.of_type(TransformType.PRF)[0].id
        integ = chosen.of_type(TransformType.INTEG)[0].id
        self.algs = ike.SaAlgs(EncrId(encr), PrfId(prf), IntegId(integ), group)
        shared = crypto.dh_shared(group, kp, ke.data)
        self.keys = crypto.derive_ike_keys(prf, self.ni, self.nr, shared, self.spi_i, self.spi_r,
                                           crypto.key_lengths(prf, integ, encr))
        self.init_request = req.raw
        self._mutate(msg, cmd)
        self.stage = "sa_init_done"
        return msg, False

    # IKE_AUTH round 1
    def _open(self, req):
        try:
            return ike.open_message(req, self.keys, self.algs, initiator=True)
        except (crypto.CryptoError, ike.IkeError) as exc:
            raise StateViolation(f"cannot open UE message: {type(exc).__name__}") from None

    def _challenge_reply(self, req, cmd):
        inner = self._open(req)
        idi = inner.find(ike.IdPayload, responder=False)
        if idi is None:
            raise StateViolation("first IKE_AUTH has no IDi")
        self.identity = idi.data.decode(errors="replace")
        self.child_proposal = inner.find(ike.SaPayload)
        rand = self.rng.randbytes(16)
        sub = self.subscriber
        self.vector = eap.aka_challenge(sub.secret_k, sub.op_key, rand)
        self.aka_keys = eap.derive_aka_keys(self.identity, self.vector.ik, self.vector.ck)
        pkt = eap.build_challenge(1, self.vector, self.aka_keys.k_aut)
        idr = ike.IdPayload(ike.IdType.ID_FQDN, EPDG_FQDN.encode(), responder=True)
        self.idr_body = ike.encode_body(idr)
        msg = ike.IkeMessage(self._header(req), [idr, ike.EapPayload(eap.encode_eap(pkt))])
        self._mutate(msg, cmd)
        self.stage = "eap_in_progress"
        return msg, True

    # IKE_AUTH round 2
    def _success_reply(self, req, cmd):
        inner = self._open(req)
        p = inner.find(ike.EapPayload)
        if p is None:
            raise StateViolation("EAP response missing")
        pkt = eap.decode_eap(p.data)
        res = eap.attr_payload(pkt.get(eap.AkaAttr.AT_RES))
        if res is None or eap.res_from_attr(pkt.get(eap.AkaAttr.AT_RES)) != self.vector.xres \
                or not eap.check_packet_mac(pkt, self.aka_keys.k_aut):
            raise StateViolation("EAP-AKA response does not verify")
        octets = self.init_response + self.ni + crypto.prf_eval(self.algs.prf, self.keys.sk_pr, self.idr_body)
        auth = crypto.psk_auth(self.algs.prf, self.aka_keys.msk, octets)
        any4 = ike.TrafficSelector(7, 0, 0, 65535, bytes(4), b"\xff" * 4)
        inner4 = ike.TrafficSelector(7, 0, 0, 65535, UE_INNER_ADDR, UE_INNER_ADDR)
        child = self.child_proposal.proposals[0] if self.child_proposal and self.child_proposal.proposals else None
        chosen = ike.Proposal(1, ike.ProtocolId.ESP, self.rng.randbytes(4),
                              list(child.transforms) if child else [])
        msg = ike.IkeMessage(self._header(req), [
            ike.EapPayload(eap.encode_eap(eap.build_success(pkt.identifier))),
            ike.AuthPayload(ike.AuthMethod.SHARED_KEY_MIC, auth),
            ike.CpPayload(ike.CfgType.CFG_REPLY, [(ike.CfgAttr.INTERNAL_IP4_ADDRESS, UE_INNER_ADDR),
                                                  (ike.CfgAttr.P_CSCF_IP4_ADDRESS, P_CSCF)]),
            ike.SaPayload([chosen]),
            ike.TsPayload([inner4]),
            ike.TsPayload([any4], responder=True),
        ])
        self._mutate(msg, cmd)
        self.tunnel = Tunnel(self.algs, derive_child_keys(self.algs, self.keys.sk_d, self.ni, self.nr),
                             initiator=False)
        self.stage = "established"
        return msg, True

    def _error_reply(self, req, label):
        name, param = split_label(label)
        err = self.bed.error_catalog(label)
        if err.protocol != "ike":
            raise StateViolation(f"{label} is not an IKE error")
        if req.header.exchange_type == ike.ExchangeType.IKE_SA_INIT:
            header = ike.IkeHeader(req.header.spi_i, 0, ike.ExchangeType.IKE_SA_INIT, ike.FLAG_RESPONSE, 0)
            sealed = False
        else:
            self._open(req)
            header = self._header(req)
            sealed = True
        if err.eap == "failure":
            payloads = [ike.EapPayload(eap.encode_eap(eap.build_failure(1)))]
        else:
            data = b""
            if err.notify == "INVALID_KE_PAYLOAD":
                group = DhGroupId[param] if param in DhGroupId.__members__ else int(param)
                data = int(group).to_bytes(2, "big")
            payloads = [ike.NotifyPayload(ike.NotifyType[err.notify], data)]
        return ike.IkeMessage(header, payloads), sealed


class Ims:
    """Collapsed P/I/S-CSCF registrar with IMS-AKA digest challenges."""

    def __init__(self, bed, rng, subscriber):
        self.bed = bed
        self.rng = rng
        self.subscriber = subscriber
        self.stage = "idle"
        self.inbox = []
        self.history = {}
        self.vector = None
        self.nonce = None

    def on_sip(self, data):
        msg = sip.try_parse(data)
        if isinstance(msg, sip.SipError):
            name, summary = "sip_unparseable", {"error": type(msg).__name__}
        else:
            name, summary = classify_ue_sip(msg), sip.summarize(msg)
        self.inbox.append(data)
        self.bed.observe("ims", "received", frm="ue", to="ims", protocol="sip", name=name, summary=summary,
                         data=data, notes=[])

    def execute(self, cmd):
        if cmd.op == "replay":
            data = self.history.get(cmd.replay_index)
            if data is None:
                raise StateViolation(f"nothing was sent by command {cmd.replay_index}")
            self.inbox.clear()
            self._emit(cmd, cmd.name, data, {"replay_of": cmd.replay_index})
            return
        if cmd.op == "insert":
            raise StateViolation("the IMS agent does not insert attributes")
        if not self.inbox:
            raise StateViolation("no pending SIP request to answer")
        req = sip.parse_sip(self.inbox.pop())
        self.inbox.clear()
        expected = "401_unauthorized" if self.stage == "idle" else "200_ok"
        if cmd.name != expected:
            raise StateViolation(f"registrar answers with {expected}, command asks for {cmd.name}")
        if cmd.op == "substitute":
            err = self.bed.error_catalog(cmd.substitute_with)
            if err.protocol != "sip":
                raise StateViolation(f"{cmd.substitute_with} is not a SIP error")
            msg = sip.build_response(req, int(err.status))
            info = {"substitute_with": cmd.substitute_with}
        else:
            msg = self._challenge(req) if expected == "401_unauthorized" else self._accept(req)
            info = {}
            try:
                if cmd.op == "update":
                    sip.apply_update(msg, cmd.attribute, cmd.value)
                elif cmd.op == "drop":
                    sip.apply_drop(msg, cmd.attribute)
            except (sip.SipError, InvalidValue) as exc:
                raise StateViolation(f"mutation not applicable: {exc}") from None
            if cmd.op in ("update", "drop"):
                info["mutation"] = {"op": cmd.op, "attribute": cmd.attribute, "value": cmd.value}
        self._emit(cmd, expected, sip.serialize_sip(msg), info)

    def _emit(self, cmd, name, data, info):
        self.history[cmd.id] = data
        notes = ["adversarial"] if cmd.mutating else []
        summary = dict(info)
        parsed = sip.try_parse(data)
        if not isinstance(parsed, sip.SipError):
            summary.update(sip.summarize(parsed))
        self.bed.observe("ims", "sent", frm="ims", to="ue", protocol="sip", name=name, summary=summary,
                         data=data, notes=notes)
        if not self.bed.epdg.deliver_sip(data):
            self.bed.observe("ims", "undeliverable", frm="ims", to="ue", protocol="sip", name=name,
                             summary={}, data=data, notes=["no_tunnel"])

    def _challenge(self, req):
        sub = self.subscriber
        self.vector = eap.aka_challenge(sub.secret_k, sub.op_key, self.rng.randbytes(16))
        self.nonce = sip.aka_nonce(self.vector.rand, self.vector.autn)
        ch = sip.AuthChallenge("Digest", {"realm": HOME_DOMAIN, "nonce": self.nonce, "algorithm": "AKAv1-MD5"})
        offered = sip.parse_security(req.get("Security-Client") or "")
        pick = next((m for m in offered if (m.ealg, m.alg) in STRONG_SIP), None)
        if pick is None:
            raise StateViolation("no acceptable Security-Client offer")
        server = sip.SecurityMechanism("ipsec-3gpp", dict(pick.params, **{"spi-c": "3333", "spi-s": "4444"}))
        msg = sip.build_response(req, 401, [("WWW-Authenticate", sip.format_challenge(ch)),
                                            ("Security-Server", sip.format_security([server]))])
        self.stage = "challenged"
        return msg

    def _accept(self, req):
        auth = req.get("Authorization")
        ch = sip.parse_challenge(auth) if auth else None
        uri = f"sip:{HOME_DOMAIN}"
        ok = False
        if ch is not None and ch.params.get("nonce") == self.nonce:
            try:
                expect = sip.compute_digest("AKAv1-MD5", impi(self.subscriber.imsi), HOME_DOMAIN, self.nonce,
                                            "REGISTER", uri, self.vector.xres)
                ok = ch.params.get("response") == expect
            except sip.SipError:
                ok = False
        if not ok:
            return sip.build_response(req, 403)
        self.stage = "registered"
        return sip.build_response(req, 200, [
            ("Contact", f"<sip:{self.subscriber.imsi}@[fd00::2]:5060>;expires=600000"),
            ("P-Associated-URI", f"<sip:+1555{self.subscriber.imsi[-7:]}@{HOME_DOMAIN}>"),
            ("Service-Route", f"<sip:orig@scscf.{HOME_DOMAIN};lr>"),
        ])


class Testbed:
    """The simulated network: one UE, one ePDG, one IMS, a virtual clock and a traffic tap."""

    __test__ = False  # not a pytest class

    def __init__(self, seed=0, errors=None):
        self.seed = seed
        self.clock = 0
        self.tap = []
        self.profile = None
        self.ue = None
        self.epdg = None
        self.ims = None
        self._errors = {e.label: e for e in (errors or [])}

    def error_catalog(self, label):
        if label not in self._errors:
            from ..transformer import load_config
            for e in load_config().error_messages:
                self._errors.setdefault(e.label, e)
        if label not in self._errors:
            raise StateViolation(f"unknown error message {label!r}")
        return self._errors[label]

    def _network_rng(self, run_seed, name):
        return random.Random(f"{run_seed}|{name}")

    def reset_full(self, profile, run_seed):
        self.profile = profile
        self.clock = 0
        self.tap = []
        self.ue = SimUe(profile, self.seed, f"{run_seed}|ue")
        self.reset_network(run_seed)

    def reset_network(self, run_seed):
        self.epdg = Epdg(self, self._network_rng(run_seed, "epdg"), self.profile)
        self.ims = Ims(self, self._network_rng(run_seed, "ims"), self.profile)

    def observe(self, observer, event, *, frm, to, protocol, name, summary, data, notes):
        self.tap.append({
            "t": self.clock, "observer": observer, "event": event, "from": frm, "to": to,
            "protocol": protocol, "name": name, "summary": summary, "hex": _hex(data), "annotations": list(notes),
        })

    def ue_status(self):
        notes = self.ue.drain_notes() if self.ue else []
        if notes:
            self.tap.append({"t": self.clock, "observer": "ue", "event": "status", "stage": self.ue.stage,
                             "annotations": notes})

    def route(self, outputs):
        self.ue_status()
        for channel, data in outputs:
            self.clock += HOP_MS
            if channel == "ike":
                self.epdg.on_ike(data)
            else:
                self.epdg.on_esp(data)

    def to_ue(self, channel, data):
        self.clock += HOP_MS
        self.route(self.ue.receive(channel, data))

    def drain(self):
        out, self.tap = self.tap, []
        return out
