"""Simulated UE: IKEv2 initiator, EAP-AKA peer and SIP registration client.

Deviations from the standards are switched on by profile flags. A compliant
UE silently drops anything it does not accept; it never answers a bad message
with an error of its own.
"""

import json
import os
import random
import re
from dataclasses import dataclass, field
from importlib import resources

from . import crypto, eap, ike, sip
from .crypto import DhGroupId, EncrId, IntegId, PrfId, TransformType
from .testcase import SchemaViolation
from .tunnel import Tunnel, derive_child_keys

HOME_DOMAIN = "ims.mnc001.mcc001.3gppnetwork.org"
EPDG_FQDN = "epdg.epc.mnc001.mcc001.pub.3gppnetwork.org"
WEAK_SIP_PAIR = ("des-cbc", "hmac-md5-96")
WEAK_SIP_EALGS = frozenset({"des-cbc", "des-ede3-cbc", "null"})
WEAK_SIP_ALGS = frozenset({"hmac-md5-96"})
MAX_KE_RETRIES = 2

FLAGS = (
    "accept_weak_encr",
    "accept_weak_integ",
    "accept_weak_prf",
    "advertise_weak_dh",
    "accept_downgrade_ke",
    "accept_weak_group_retry",
    "zero_dh_on_missing_ke",
    "zero_nonce_on_missing_nonce",
    "sip_accept_md5",
    "sip_copy_algorithm",
    "sip_accept_weak_ipsec",
    "deadlock_on_error",
    "respond_to_replay",
)

# single-flag profile reproducing each issue
ISSUE_PROFILES = {1: "weak_encr", 2: "weak_integ", 3: "weak_prf", 4: "weak_dh", 5: "weak_group_retry",
                  6: "sip_md5", 7: "sip_weak_ipsec", 8: "zero_dh", 9: "zero_nonce", 10: "downgrade_ke"}

STAGES = ("off", "discovering", "sa_init_sent", "auth_in_progress", "ike_established",
          "sip_challenged", "registered", "aborted")


def nai(imsi):
    return f"0{imsi}@nai.epc.mnc001.mcc001.3gppnetwork.org"


def impi(imsi):
    return f"{imsi}@{HOME_DOMAIN}"


# -- profiles -------------------------------------------------------------------

_ENUMS = {"encr": EncrId, "integ": IntegId, "prf": PrfId, "dh": DhGroupId}
_WEAK_FLAG = {"encr": "accept_weak_encr", "integ": "accept_weak_integ", "prf": "accept_weak_prf",
              "dh": "advertise_weak_dh"}
_TTYPE = {"encr": TransformType.ENCR, "integ": TransformType.INTEG, "prf": TransformType.PRF,
          "dh": TransformType.DH}


@dataclass
class UeProfile:
    name: str
    imsi: str
    secret_k: bytes
    op_key: bytes
    advertised_encr: list
    advertised_integ: list
    advertised_prf: list
    advertised_dh: list
    sip_security_client: list
    flags: dict
    downgrade_floor: DhGroupId = DhGroupId.MODP_2048
    flake: dict = None
    boot_ms: int = 500
    expected_issues: list = field(default_factory=list)

    def advertised(self, kind):
        return getattr(self, f"advertised_{kind}")


def _hex_octets(value, what):
    if not isinstance(value, str) or not re.fullmatch(r"(0x)?[0-9a-fA-F]{32}", value):
        raise SchemaViolation(f"{what} must be 16 octets of hex")
    return bytes.fromhex(value[2:] if value.startswith("0x") else value)


def profile_from_json(obj):
    if not isinstance(obj, dict):
        raise SchemaViolation("profile must be an object")
    allowed = {"name", "imsi", "secret_k", "op_key", "advertised", "sip_security_client", "flags",
               "downgrade_floor", "flake", "boot_ms", "expected_issues", "description"}
    unknown = set(obj) - allowed
    if unknown:
        raise SchemaViolation(f"unknown profile keys {sorted(unknown)}")
    for k in ("name", "imsi", "secret_k", "op_key"):
        if k not in obj:
            raise SchemaViolation(f"profile missing {k!r}")
    imsi = obj["imsi"]
    if not isinstance(imsi, str) or not re.fullmatch(r"[0-9]{15}", imsi):
        raise SchemaViolation("imsi must be exactly 15 digits")
    flags = {f: False for f in FLAGS}
    for k, v in obj.get("flags", {}).items():
        if k not in flags:
            raise SchemaViolation(f"unknown flag {k!r}")
        if not isinstance(v, bool):
            raise SchemaViolation(f"flag {k!r} must be boolean")
        flags[k] = v
    adv = obj.get("advertised", {})
    lists = {}
    defaults = {"encr": ["ENCR_AES_CBC"], "integ": ["AUTH_HMAC_SHA1_96"], "prf": ["PRF_HMAC_SHA1"],
                "dh": ["MODP_2048"]}
    for kind, enum_cls in _ENUMS.items():
        names = adv.get(kind, defaults[kind])
        try:
            ids = [enum_cls[n] for n in names]
        except KeyError as exc:
            raise SchemaViolation(f"unknown {kind} transform {exc.args[0]!r}") from None
        if not ids:
            raise SchemaViolation(f"advertised {kind} list is empty")
        weak = [i.name for i in ids if crypto.is_weak(_TTYPE[kind], i)]
        if weak and not flags[_WEAK_FLAG[kind]]:
            raise SchemaViolation(f"weak {kind} {weak} advertised without {_WEAK_FLAG[kind]}")
        lists[kind] = ids
    if crypto.is_weak(TransformType.DH, lists["dh"][0]):
        raise SchemaViolation("the first advertised DH group is used for KE and must be strong")
    sec = [tuple(p) for p in obj.get("sip_security_client", [["aes-cbc", "hmac-sha-1-96"], list(WEAK_SIP_PAIR)])]
    flake = obj.get("flake")
    if flake is not None:
        if flake.get("flag") not in FLAGS or not 0 <= float(flake.get("probability", -1)) <= 1:
            raise SchemaViolation("flake needs a known flag and a probability in [0, 1]")
    try:
        floor = DhGroupId[obj.get("downgrade_floor", "MODP_2048")]
    except KeyError:
        raise SchemaViolation("unknown downgrade_floor group") from None
    return UeProfile(
        name=obj["name"], imsi=imsi,
        secret_k=_hex_octets(obj["secret_k"], "secret_k"), op_key=_hex_octets(obj["op_key"], "op_key"),
        advertised_encr=lists["encr"], advertised_integ=lists["integ"], advertised_prf=lists["prf"],
        advertised_dh=lists["dh"], sip_security_client=sec, flags=flags, downgrade_floor=floor,
        flake=flake, boot_ms=int(obj.get("boot_ms", 500)), expected_issues=list(obj.get("expected_issues", [])),
    )


def load_profile(path):
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaViolation(f"profile is not JSON: {exc}") from None
    return profile_from_json(obj)


def _profile_dir():
    return resources.files("vowifi_advtest").joinpath("data", "profiles")


def shipped_profiles():
    return sorted(f.name[:-5] for f in _profile_dir().iterdir() if f.name.endswith(".json"))


def resolve_profile(name_or_path):
    """A shipped profile by name, or a profile file by path."""
    if os.path.exists(name_or_path):
        return load_profile(name_or_path)
    if name_or_path not in shipped_profiles():
        raise SchemaViolation(f"no shipped profile named {name_or_path!r}")
    return load_profile(str(_profile_dir().joinpath(name_or_path + ".json")))


def md5_password(profile):
    return crypto.prf_eval(PrfId.PRF_HMAC_SHA1, profile.secret_k, b"sip-md5-password").hex()[:32]


# -- state machine ----------------------------------------------------------------

class Abort(Exception):
    """Internal: the UE gives up on the current session."""


class SimUe:
    """One UE. ``receive``/``wifi_on``/... return lists of (channel, bytes) outputs."""

    def __init__(self, profile, seed=0, run_seed=0):
        self.profile = profile
        self.seed = seed
        self.rng = random.Random(run_seed)
        self.flags = dict(profile.flags)
        if profile.flake:
            self.flags[profile.flake["flag"]] = self.rng.random() < float(profile.flake["probability"])
        self.stage = "off"
        self.powered = False
        self.stuck = False
        self.notes = []
        self._clear_session()

    # -- bookkeeping --

    def _clear_session(self):
        self.spi_i = 0
        self.spi_r = 0
        self.ke_group = None
        self.ke_retries = 0
        self.ni = b""
        self.nr = b""
        self.init_request = b""
        self.init_response = b""
        self.keys = None
        self.algs = None
        self.auth_step = None
        self.idr_body = None
        self.msk = None
        self.tunnel = None
        self.call_id = None
        self.cseq = 0
        self.seen = {}

    def note(self, text):
        self.notes.append(text)

    def drain_notes(self):
        out, self.notes = self.notes, []
        return out

    def _keypair(self, group):
        return crypto.dh_keypair(group, f"{self.seed}|ue|{self.profile.name}|{int(group)}")

    # -- control events --

    def boot(self):
        self.powered = True
        self.stage = "off"
        self.note("ready")
        return self.wifi_on()

    def reboot(self):
        self.stuck = False
        self._clear_session()
        return self.boot()

    def wifi_off(self):
        self._clear_session()
        self.stage = "off"
        self.note("wifi_off")
        return []

    def wifi_on(self):
        if not self.powered:
            return []
        if self.stuck:
            self.note("stuck")
            return []
        self._clear_session()
        self.stage = "discovering"
        return [("ike", self._sa_init_request(self.profile.advertised_dh[0]))]

    # -- IKE_SA_INIT --

    def _proposal(self, extra_group=None):
        p = self.profile
        ts = []
        for e in p.advertised_encr:
            attrs = [(ike.ATTR_KEY_LENGTH, 128)] if e == EncrId.ENCR_AES_CBC else []
            ts.append(ike.Transform(TransformType.ENCR, e, attrs))
        ts += [ike.Transform(TransformType.PRF, x) for x in p.advertised_prf]
        ts += [ike.Transform(TransformType.INTEG, x) for x in p.advertised_integ]
        groups = list(p.advertised_dh)
        if extra_group is not None and extra_group not in groups:
            groups.insert(0, extra_group)
        ts += [ike.Transform(TransformType.DH, g) for g in groups]
        return ike.SaPayload([ike.Proposal(1, ike.ProtocolId.IKE, b"", ts)])

    def _sa_init_request(self, group):
        if not self.spi_i:
            self.spi_i = self.rng.getrandbits(64) | 1
        self.ni = self.rng.randbytes(32)
        self.ke_group = DhGroupId(group)
        kp = self._keypair(group)
        sa = self._proposal(extra_group=group)
        msg = ike.IkeMessage(ike.IkeHeader(self.spi_i, 0, ike.ExchangeType.IKE_SA_INIT, ike.FLAG_INITIATOR, 0),
                             [sa, ike.KePayload(group, kp.public_bytes), ike.NoncePayload(self.ni)])
        self.init_request = ike.serialize_message(msg)
        self.stage = "sa_init_sent"
        return self.init_request

    def _acceptable(self):
        p = self.profile
        acc = {TransformType.ENCR: set(p.advertised_encr), TransformType.PRF: set(p.advertised_prf),
               TransformType.INTEG: set(p.advertised_integ), TransformType.DH: set(p.advertised_dh)}
        if self.ke_group is not None:
            acc[TransformType.DH].add(self.ke_group)
        return acc

    def _retry_allowed(self, group):
        if not crypto.is_registered(TransformType.DH, group) or group == self.ke_group:
            return False
        if self.ke_retries >= MAX_KE_RETRIES:
            return False
        group = DhGroupId(group)
        if group in self.profile.advertised_dh and not crypto.is_weak(TransformType.DH, group):
            return True
        classic = (DhGroupId.MODP_768, DhGroupId.MODP_1024, DhGroupId.MODP_1536, DhGroupId.MODP_2048)
        if self.flags["accept_downgrade_ke"] and group in classic:
            return crypto.get_group(group).bits >= crypto.get_group(self.profile.downgrade_floor).bits
        po = (DhGroupId.MODP_1024_160_PO, DhGroupId.MODP_2048_224_PO, DhGroupId.MODP_2048_256_PO)
        return self.flags["accept_weak_group_retry"] and group in po

    def _on_error(self, what):
        if self.flags["deadlock_on_error"]:
            self.stuck = True
            self.stage = "aborted"
            self.note(f"deadlocked:{what}")
            return []
        raise Abort(f"error received: {what}")

    def _on_sa_init_response(self, msg):
        err = msg.error_notify()
        if err is not None:
            if err.notify_type == ike.NotifyType.INVALID_KE_PAYLOAD and len(err.data) == 2:
                group = int.from_bytes(err.data, "big")
                if self._retry_allowed(group):
                    self.ke_retries += 1
                    self.note(f"ke_retry:{crypto.transform_name(TransformType.DH, group)}")
                    return [("ike", self._sa_init_request(group))]
            return self._on_error(ike.payload_label(err))
        if any(isinstance(p, ike.OpaquePayload) and p.critical for p in msg.payloads):
            raise Abort("unsupported critical payload")
        if msg.header.spi_r == 0:
            raise Abort("responder SPI is zero")
        picked = ike.single_choice(msg.find(ike.SaPayload))
        if picked is None:
            raise Abort("response SA is not a single complete choice")
        acceptable = self._acceptable()
        for t in picked.values():
            if not ike.transform_acceptable(t, acceptable):
                raise Abort(f"transform {crypto.transform_name(t.type, t.id)} not acceptable")
        group = DhGroupId(picked[TransformType.DH].id)
        if group != self.ke_group and not self.flags["advertise_weak_dh"]:
            raise Abort("responder chose a DH group other than our KE")
        ke = msg.find(ike.KePayload)
        if ke is None:
            if not self.flags["zero_dh_on_missing_ke"]:
                raise Abort("missing KE payload")
            shared = crypto.zero_secret(group)
            self.note("zero_dh")
        else:
            if ke.group != group:
                raise Abort("KE group does not match the chosen DH transform")
            try:
                shared = crypto.dh_shared(group, self._keypair(group), ke.data)
            except crypto.InvalidPeerValue as exc:
                raise Abort(str(exc)) from None
        nonce = msg.find(ike.NoncePayload)
        if nonce is None:
            if not self.flags["zero_nonce_on_missing_nonce"]:
                raise Abort("missing Nonce payload")
            self.nr = bytes(16)
            self.note("zero_nonce")
        elif not 16 <= len(nonce.data) <= 256:
            raise Abort("nonce length out of range")
        else:
            self.nr = nonce.data
        self.spi_r = msg.header.spi_r
        encr, prf = picked[TransformType.ENCR].id, picked[TransformType.PRF].id
        integ = picked[TransformType.INTEG].id
        self.algs = ike.SaAlgs(EncrId(encr), PrfId(prf), IntegId(integ), group)
        self.keys = crypto.derive_ike_keys(prf, self.ni, self.nr, shared, self.spi_i, self.spi_r,
                                           crypto.key_lengths(prf, integ, encr))
        self.init_response = msg.raw
        names = [crypto.transform_name(t.type, t.id) for t in picked.values()]
        self.note("sa_established:" + "/".join(names))
        weak = [crypto.transform_name(t.type, t.id) for t in picked.values() if crypto.is_weak(t.type, t.id)]
        if weak:
            self.note("weak_sa:" + ",".join(weak))
        self.stage = "auth_in_progress"
        self.auth_step = 1
        return [("ike", self._auth_request(1, self._auth1_payloads()))]

    # -- IKE_AUTH --

    def _auth1_payloads(self):
        any4 = ike.TrafficSelector(7, 0, 0, 65535, bytes(4), b"\xff" * 4)
        child = ike.SaPayload([ike.Proposal(1, ike.ProtocolId.ESP, self.rng.randbytes(4), [
            ike.Transform(TransformType.ENCR, EncrId.ENCR_AES_CBC, [(ike.ATTR_KEY_LENGTH, 128)]),
            ike.Transform(TransformType.INTEG, IntegId.AUTH_HMAC_SHA1_96),
            ike.Transform(TransformType.ESN, 0),
        ])])
        return [
            ike.IdPayload(ike.IdType.ID_RFC822_ADDR, nai(self.profile.imsi).encode()),
            ike.IdPayload(ike.IdType.ID_FQDN, EPDG_FQDN.encode(), responder=True),
            ike.CpPayload(ike.CfgType.CFG_REQUEST, [(ike.CfgAttr.INTERNAL_IP4_ADDRESS, b""),
                                                    (ike.CfgAttr.P_CSCF_IP4_ADDRESS, b"")]),
            child,
            ike.TsPayload([any4]),
            ike.TsPayload([any4], responder=True),
        ]

    def _auth_request(self, mid, payloads):
        msg = ike.IkeMessage(ike.IkeHeader(self.spi_i, self.spi_r, ike.ExchangeType.IKE_AUTH,
                                           ike.FLAG_INITIATOR, mid), payloads)
        return ike.seal_message(msg, self.keys, self.algs, True, self.rng.randbytes(16)).raw

    def _eap_from(self, inner):
        p = inner.find(ike.EapPayload)
        if p is None:
            raise Abort("no EAP payload")
        try:
            return eap.decode_eap(p.data)
        except eap.EapError as exc:
            raise Abort(str(exc)) from None

    def _on_auth_response(self, msg):
        try:
            inner = ike.open_message(msg, self.keys, self.algs, initiator=False)
        except (crypto.CryptoError, ike.IkeError) as exc:
            raise Abort(f"cannot open IKE_AUTH response: {type(exc).__name__}") from None
        err = inner.error_notify()
        if err is not None:
            return self._on_error(ike.payload_label(err))
        pkt = self._eap_from(inner)
        if pkt.code == eap.EapCode.FAILURE:
            return self._on_error("EAP-Failure")
        if self.auth_step == 1:
            return self._on_eap_challenge(inner, pkt)
        return self._on_eap_success(inner, pkt)

    def _on_eap_challenge(self, inner, pkt):
        idr = inner.find(ike.IdPayload, responder=True)
        if idr is None or idr.id_type != ike.IdType.ID_FQDN or idr.data != EPDG_FQDN.encode():
            raise Abort("missing or unexpected IDr")
        if pkt.code != eap.EapCode.REQUEST or pkt.type != eap.EAP_TYPE_AKA:
            raise Abort("not an EAP-Request/AKA")
        if pkt.subtype != eap.AkaSubtype.CHALLENGE:
            raise Abort("not an AKA-Challenge")
        rand = eap.attr_payload(pkt.get(eap.AkaAttr.AT_RAND))
        autn = eap.attr_payload(pkt.get(eap.AkaAttr.AT_AUTN))
        if rand is None or autn is None or pkt.get(eap.AkaAttr.AT_MAC) is None:
            raise Abort("AKA-Challenge lacks AT_RAND, AT_AUTN or AT_MAC")
        res = eap.ue_aka(self.profile.secret_k, self.profile.op_key, rand, autn)
        if res is None:
            raise Abort("AUTN verification failed")
        keys = eap.derive_aka_keys(nai(self.profile.imsi), res.ik, res.ck)
        if not eap.check_packet_mac(pkt, keys.k_aut):
            raise Abort("AT_MAC verification failed")
        self.msk = keys.msk
        self.idr_body = ike.encode_body(idr)
        reply = eap.build_challenge_response(pkt.identifier, res.res, keys.k_aut)
        self.auth_step = 2
        self.note("aka_ok")
        return [("ike", self._auth_request(2, [ike.EapPayload(eap.encode_eap(reply))]))]

    def _on_eap_success(self, inner, pkt):
        if pkt.code != eap.EapCode.SUCCESS:
            raise Abort("expected EAP-Success")
        auth = inner.find(ike.AuthPayload)
        if auth is None or auth.method != ike.AuthMethod.SHARED_KEY_MIC:
            raise Abort("missing or unexpected AUTH")
        octets = self.init_response + self.ni + crypto.prf_eval(self.algs.prf, self.keys.sk_pr, self.idr_body)
        if auth.data != crypto.psk_auth(self.algs.prf, self.msk, octets):
            raise Abort("responder AUTH does not verify")
        cp = inner.find(ike.CpPayload)
        if cp is None or cp.cfg_type != ike.CfgType.CFG_REPLY:
            raise Abort("no configuration reply")
        pcscf = [v for t, v in cp.attributes if t == ike.CfgAttr.P_CSCF_IP4_ADDRESS and len(v) == 4]
        if not pcscf:
            raise Abort("configuration reply has no P-CSCF address")
        if inner.find(ike.SaPayload) is None or inner.find(ike.TsPayload, False) is None \
                or inner.find(ike.TsPayload, True) is None:
            raise Abort("child SA or traffic selectors missing")
        child = derive_child_keys(self.algs, self.keys.sk_d, self.ni, self.nr)
        self.tunnel = Tunnel(self.algs, child, initiator=True)
        self.stage = "ike_established"
        self.note("ike_established")
        return [("sip", sip.serialize_sip(self._register(1)))]

    # -- SIP --

    def _sec_client(self):
        mechs = []
        for ealg, alg in self.profile.sip_security_client:
            mechs.append(sip.SecurityMechanism("ipsec-3gpp", {
                "alg": alg, "ealg": ealg, "spi-c": "1111", "spi-s": "2222", "port-c": "5062", "port-s": "5064"}))
        return mechs

    def _register(self, cseq, challenge=None, response=None, verify=None):
        if self.call_id is None:
            self.call_id = self.rng.randbytes(8).hex()
        self.cseq = cseq
        return sip.build_register(impi(self.profile.imsi), challenge, self._sec_client(), domain=HOME_DOMAIN,
                                  call_id=self.call_id, cseq=cseq, second=cseq > 1, response=response,
                                  security_verify=verify)

    def _on_sip(self, data):
        msg = sip.try_parse(data)
        if isinstance(msg, sip.SipError):
            raise Abort(f"SIP parse error: {type(msg).__name__}")
        if msg.is_request:
            raise Abort("unexpected SIP request")
        cseq, _method = msg.cseq()
        if msg.get("Call-ID") != self.call_id or cseq != self.cseq:
            raise Abort("response does not match the outstanding REGISTER")
        code = msg.status
        if self.stage == "ike_established":
            if code == 401:
                return self._on_401(msg)
            if code >= 300:
                return self._on_error(f"SIP {code}")
            raise Abort(f"unexpected {code} before authentication")
        if self.stage == "sip_challenged":
            if code == 200:
                if not msg.get("Contact"):
                    raise Abort("200 OK without a contact binding")
                self.stage = "registered"
                self.note("registered")
                return []
            if code >= 300:
                return self._on_error(f"SIP {code}")
        raise Abort(f"unexpected SIP {code}")

    def _pick_security(self, msg):
        value = msg.get("Security-Server")
        if value is None:
            raise Abort("no Security-Server")
        try:
            mechs = [m for m in sip.parse_security(value) if m.mechanism == "ipsec-3gpp"]
        except sip.SipError:
            raise Abort("Security-Server does not parse") from None
        if not mechs:
            raise Abort("no ipsec-3gpp mechanism offered")
        chosen = mechs[0]
        offered_e = {e for e, _a in self.profile.sip_security_client}
        offered_a = {a for _e, a in self.profile.sip_security_client}
        if chosen.ealg not in offered_e or chosen.alg not in offered_a:
            raise Abort("Security-Server selects algorithms we did not offer")
        weak = chosen.ealg in WEAK_SIP_EALGS or chosen.alg in WEAK_SIP_ALGS
        if weak:
            if not self.flags["sip_accept_weak_ipsec"]:
                raise Abort("Security-Server selects a weak algorithm")
            self.note(f"weak_sip_sa:{chosen.ealg}/{chosen.alg}")
        return mechs

    def _on_401(self, msg):
        value = msg.get("WWW-Authenticate")
        if value is None:
            raise Abort("401 without WWW-Authenticate")
        try:
            ch = sip.parse_challenge(value)
        except sip.SipError:
            raise Abort("challenge does not parse") from None
        if ch.scheme != "Digest" or ch.params.get("realm") != HOME_DOMAIN:
            raise Abort("unexpected scheme or realm")
        verify = self._pick_security(msg)
        alg = ch.algorithm
        nonce = ch.params.get("nonce", "")
        allowed = {"AKAv1-MD5"}
        if alg == "MD5" and self.flags["sip_copy_algorithm"]:
            secret = self._aka_secret(nonce)
            allowed.add("MD5")
            self.note("copied_algorithm:MD5")
        elif alg == "MD5" and self.flags["sip_accept_md5"]:
            secret = md5_password(self.profile)
            allowed.add("MD5")
            self.note("weak_sip_auth:MD5")
        elif alg == "AKAv1-MD5":
            secret = self._aka_secret(nonce)
        else:
            raise Abort(f"digest algorithm {alg} not supported")
        uri = f"sip:{HOME_DOMAIN}"
        try:
            response = sip.compute_digest(alg, impi(self.profile.imsi), ch.params["realm"], nonce,
                                          "REGISTER", uri, secret, allowed=allowed)
        except sip.UnsupportedAlgorithm as exc:
            raise Abort(str(exc)) from None
        self.stage = "sip_challenged"
        reg = self._register(2, ch, response, verify)
        return [("sip", sip.serialize_sip(reg))]

    def _aka_secret(self, nonce):
        parts = sip.split_aka_nonce(nonce)
        if parts is None:
            raise Abort("nonce is not an AKA nonce")
        res = eap.ue_aka(self.profile.secret_k, self.profile.op_key, *parts)
        if res is None:
            raise Abort("AUTN in SIP nonce does not verify")
        return res.res

    # -- network input --

    def receive(self, channel, data):
        if not self.powered or self.stage == "off" or self.stuck:
            self.note("discarded:not_connected")
            return []
        if channel == "esp":
            if self.tunnel is None:
                self.note("discarded:no_tunnel")
                return []
            try:
                data = self.tunnel.open(data)
            except crypto.CryptoError:
                self.note("discarded:tunnel_integrity")
                return []
        key = (channel, bytes(data))
        if key in self.seen:
            if self.flags["respond_to_replay"] and self.seen[key]:
                self.note("replay_answered")
                return [self._reseal(ch, d) for ch, d in self.seen[key]]
            self.note("discarded:duplicate")
            return []
        try:
            plain_out = self._dispatch(channel, data)
        except Abort as exc:
            self.note(f"discarded:{exc}")
            plain_out = []
        self.seen[key] = plain_out
        return [self._reseal(ch, d) for ch, d in plain_out]

    def _reseal(self, channel, data):
        # handlers produce SIP plaintext; seal at the edge so replays get a fresh sequence number
        return ("esp", self.tunnel.seal(data)) if channel == "sip" else (channel, data)

    def _dispatch(self, channel, data):
        if channel == "esp":
            if self.stage not in ("ike_established", "sip_challenged"):
                raise Abort("SIP outside registration")
            out = self._on_sip(data)
        else:
            out = self._on_ike(data)
        return out

    def _on_ike(self, data):
        msg = ike.try_parse(data)
        if isinstance(msg, ike.IkeError):
            raise Abort(f"IKE parse error: {type(msg).__name__}")
        h = msg.header
        if h.version >> 4 != 2:
            raise Abort("unsupported major version")
        if h.spi_i != self.spi_i or not h.is_response or h.is_initiator:
            raise Abort("not a response to our SA")
        if self.stage == "sa_init_sent" and h.exchange_type == ike.ExchangeType.IKE_SA_INIT and h.message_id == 0:
            return self._on_sa_init_response(msg)
        if (self.stage == "auth_in_progress" and h.exchange_type == ike.ExchangeType.IKE_AUTH
                and h.message_id == self.auth_step and h.spi_r == self.spi_r):
            return self._on_auth_response(msg)
        raise Abort("unexpected IKE message")
