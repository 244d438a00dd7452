"""IKEv2 message codec (RFC 7296).

Messages are a header plus a list of payload objects. Payloads the codec does
not understand, or cannot decode losslessly, come back as ``OpaquePayload`` so
that ``serialize_message(parse_message(b)) == b`` for every accepted input.
"""

import enum
import struct
from collections import namedtuple
from dataclasses import dataclass, field, replace

from . import crypto, eap
from .crypto import TransformType
from .values import InvalidValue, to_bytes, to_int

HEADER_LEN = 28
IKE_VERSION = 0x20

FLAG_INITIATOR = 0x08
FLAG_VERSION = 0x10
FLAG_RESPONSE = 0x20


class ExchangeType(enum.IntEnum):
    IKE_SA_INIT = 34
    IKE_AUTH = 35
    CREATE_CHILD_SA = 36
    INFORMATIONAL = 37


class PayloadType(enum.IntEnum):
    NONE = 0
    SA = 33
    KE = 34
    IDi = 35
    IDr = 36
    CERT = 37
    CERTREQ = 38
    AUTH = 39
    NONCE = 40
    NOTIFY = 41
    DELETE = 42
    VENDOR = 43
    TSi = 44
    TSr = 45
    SK = 46
    CP = 47
    EAP = 48


class NotifyType(enum.IntEnum):
    UNSUPPORTED_CRITICAL_PAYLOAD = 1
    INVALID_IKE_SPI = 4
    INVALID_MAJOR_VERSION = 5
    INVALID_SYNTAX = 7
    INVALID_MESSAGE_ID = 9
    INVALID_SPI = 11
    NO_PROPOSAL_CHOSEN = 14
    INVALID_KE_PAYLOAD = 17
    AUTHENTICATION_FAILED = 24
    SINGLE_PAIR_REQUIRED = 34
    NO_ADDITIONAL_SAS = 35
    INTERNAL_ADDRESS_FAILURE = 36
    FAILED_CP_REQUIRED = 37
    TS_UNACCEPTABLE = 38
    INVALID_SELECTORS = 39
    TEMPORARY_FAILURE = 43
    CHILD_SA_NOT_FOUND = 44
    NAT_DETECTION_SOURCE_IP = 16388
    NAT_DETECTION_DESTINATION_IP = 16389


ERROR_NOTIFY_LIMIT = 16384


class IdType(enum.IntEnum):
    ID_IPV4_ADDR = 1
    ID_FQDN = 2
    ID_RFC822_ADDR = 3
    ID_IPV6_ADDR = 5
    ID_KEY_ID = 11


class AuthMethod(enum.IntEnum):
    RSA_SIG = 1
    SHARED_KEY_MIC = 2
    DSS_SIG = 3
    DIGITAL_SIGNATURE = 14


class ProtocolId(enum.IntEnum):
    IKE = 1
    AH = 2
    ESP = 3


class CfgType(enum.IntEnum):
    CFG_REQUEST = 1
    CFG_REPLY = 2


class CfgAttr(enum.IntEnum):
    INTERNAL_IP4_ADDRESS = 1
    INTERNAL_IP4_DNS = 3
    P_CSCF_IP4_ADDRESS = 20


ATTR_KEY_LENGTH = 14


class IkeError(Exception):
    pass


class Truncated(IkeError):
    pass


class LengthMismatch(IkeError):
    pass


class BadChain(IkeError):
    pass


class UnknownAttribute(IkeError):
    pass


class AttributeAbsent(IkeError):
    pass


# -- payload model ------------------------------------------------------------

@dataclass
class Transform:
    type: int
    id: int
    # (attribute type, int for TV format or bytes for TLV format)
    attributes: list = field(default_factory=list)

    @property
    def key_length(self):
        for t, v in self.attributes:
            if t == ATTR_KEY_LENGTH and isinstance(v, int):
                return v
        return None


@dataclass
class Proposal:
    num: int
    protocol: int
    spi: bytes = b""
    transforms: list = field(default_factory=list)

    def of_type(self, ttype):
        return [t for t in self.transforms if t.type == ttype]


@dataclass
class SaPayload:
    proposals: list = field(default_factory=list)
    critical: bool = field(default=False, kw_only=True)
    type_code = PayloadType.SA


@dataclass
class KePayload:
    group: int
    data: bytes
    critical: bool = field(default=False, kw_only=True)
    type_code = PayloadType.KE


@dataclass
class NoncePayload:
    data: bytes
    critical: bool = field(default=False, kw_only=True)
    type_code = PayloadType.NONCE


@dataclass
class NotifyPayload:
    notify_type: int
    data: bytes = b""
    protocol: int = 0
    spi: bytes = b""
    critical: bool = field(default=False, kw_only=True)
    type_code = PayloadType.NOTIFY

    @property
    def is_error(self):
        return self.notify_type < ERROR_NOTIFY_LIMIT


@dataclass
class IdPayload:
    id_type: int
    data: bytes
    responder: bool = False
    critical: bool = field(default=False, kw_only=True)

    @property
    def type_code(self):
        return PayloadType.IDr if self.responder else PayloadType.IDi


@dataclass
class AuthPayload:
    method: int
    data: bytes
    critical: bool = field(default=False, kw_only=True)
    type_code = PayloadType.AUTH


@dataclass
class EapPayload:
    data: bytes
    critical: bool = field(default=False, kw_only=True)
    type_code = PayloadType.EAP


@dataclass
class DeletePayload:
    protocol: int
    spi_size: int = 0
    spis: list = field(default_factory=list)
    critical: bool = field(default=False, kw_only=True)
    type_code = PayloadType.DELETE


@dataclass
class VendorPayload:
    data: bytes
    critical: bool = field(default=False, kw_only=True)
    type_code = PayloadType.VENDOR


TrafficSelector = namedtuple("TrafficSelector", "ts_type ip_protocol start_port end_port start_addr end_addr")


@dataclass
class TsPayload:
    selectors: list = field(default_factory=list)
    responder: bool = False
    critical: bool = field(default=False, kw_only=True)

    @property
    def type_code(self):
        return PayloadType.TSr if self.responder else PayloadType.TSi


@dataclass
class CpPayload:
    cfg_type: int
    # (attribute type, value bytes)
    attributes: list = field(default_factory=list)
    critical: bool = field(default=False, kw_only=True)
    type_code = PayloadType.CP


@dataclass
class EncryptedPayload:
    first_inner: int
    data: bytes
    critical: bool = field(default=False, kw_only=True)
    type_code = PayloadType.SK


@dataclass
class OpaquePayload:
    """A payload kept as raw octets (unknown type or body that did not decode)."""
    payload_type: int
    data: bytes
    critical: bool = field(default=False, kw_only=True)

    @property
    def type_code(self):
        return self.payload_type


@dataclass
class IkeHeader:
    spi_i: int
    spi_r: int
    exchange_type: int
    flags: int
    message_id: int
    version: int = IKE_VERSION
    # wire-derived; recomputed on serialization unless overridden
    next_payload: int = field(default=0, compare=False)
    length: int = field(default=0, compare=False)

    @property
    def is_response(self):
        return bool(self.flags & FLAG_RESPONSE)

    @property
    def is_initiator(self):
        return bool(self.flags & FLAG_INITIATOR)


@dataclass
class IkeMessage:
    header: IkeHeader
    payloads: list = field(default_factory=list)
    # explicit wire overrides for recomputed fields: "length", "next_payload"
    overrides: dict = field(default_factory=dict, compare=False)
    raw: bytes = field(default=None, compare=False, repr=False)

    def find(self, cls, responder=None):
        for p in self.payloads:
            if isinstance(p, cls) and (responder is None or getattr(p, "responder", None) == responder):
                return p
        return None

    def find_all(self, cls):
        return [p for p in self.payloads if isinstance(p, cls)]

    def notifies(self):
        return self.find_all(NotifyPayload)

    def error_notify(self):
        for n in self.notifies():
            if n.is_error:
                return n
        return None


# -- body encoders ------------------------------------------------------------

def _encode_transform(t, last):
    attrs = b""
    for atype, value in t.attributes:
        if isinstance(value, int):
            attrs += struct.pack(">HH", 0x8000 | atype, value)
        else:
            attrs += struct.pack(">HH", atype & 0x7FFF, len(value)) + value
    return struct.pack(">BBHBBH", 0 if last else 3, 0, 8 + len(attrs), t.type, 0, t.id) + attrs


def _encode_sa(p):
    out = b""
    for i, prop in enumerate(p.proposals):
        last = i == len(p.proposals) - 1
        tbytes = b"".join(_encode_transform(t, j == len(prop.transforms) - 1)
                          for j, t in enumerate(prop.transforms))
        length = 8 + len(prop.spi) + len(tbytes)
        out += struct.pack(">BBHBBBB", 0 if last else 2, 0, length, prop.num, prop.protocol,
                           len(prop.spi), len(prop.transforms)) + prop.spi + tbytes
    return out


def _encode_ts(p):
    out = struct.pack(">B3x", len(p.selectors))
    for s in p.selectors:
        addrs = s.start_addr + s.end_addr
        out += struct.pack(">BBHHH", s.ts_type, s.ip_protocol, 8 + len(addrs), s.start_port, s.end_port) + addrs
    return out


def encode_body(p):
    if isinstance(p, SaPayload):
        return _encode_sa(p)
    if isinstance(p, KePayload):
        return struct.pack(">HH", p.group, 0) + p.data
    if isinstance(p, (NoncePayload, EapPayload, VendorPayload, EncryptedPayload, OpaquePayload)):
        return p.data
    if isinstance(p, NotifyPayload):
        return struct.pack(">BBH", p.protocol, len(p.spi), p.notify_type) + p.spi + p.data
    if isinstance(p, IdPayload):
        return struct.pack(">B3x", p.id_type) + p.data
    if isinstance(p, AuthPayload):
        return struct.pack(">B3x", p.method) + p.data
    if isinstance(p, DeletePayload):
        return struct.pack(">BBH", p.protocol, p.spi_size, len(p.spis)) + b"".join(p.spis)
    if isinstance(p, TsPayload):
        return _encode_ts(p)
    if isinstance(p, CpPayload):
        attrs = b"".join(struct.pack(">HH", t, len(v)) + v for t, v in p.attributes)
        return struct.pack(">B3x", p.cfg_type) + attrs
    raise TypeError(f"not an IKE payload: {p!r}")


# -- body decoders ------------------------------------------------------------

def _need(buf, n):
    if len(buf) < n:
        raise IkeError("short payload body")


def _decode_transform_attrs(buf):
    attrs = []
    pos = 0
    while pos < len(buf):
        _need(buf[pos:], 4)
        atype, val = struct.unpack_from(">HH", buf, pos)
        if atype & 0x8000:
            attrs.append((atype & 0x7FFF, val))
            pos += 4
        else:
            _need(buf[pos + 4:], val)
            attrs.append((atype, buf[pos + 4:pos + 4 + val]))
            pos += 4 + val
    return attrs


def _decode_sa(buf):
    proposals = []
    pos = 0
    while pos < len(buf):
        _need(buf[pos:], 8)
        _last, _r, plen, num, proto, spi_size, ntrans = struct.unpack_from(">BBHBBBB", buf, pos)
        _need(buf[pos:], plen)
        body = buf[pos + 8:pos + plen]
        spi = body[:spi_size]
        _need(spi, spi_size)
        tpos = spi_size
        transforms = []
        for _ in range(ntrans):
            _need(body[tpos:], 8)
            _tl, _r2, tlen, ttype, _r3, tid = struct.unpack_from(">BBHBBH", body, tpos)
            if tlen < 8:
                raise IkeError("transform length too small")
            _need(body[tpos:], tlen)
            transforms.append(Transform(ttype, tid, _decode_transform_attrs(body[tpos + 8:tpos + tlen])))
            tpos += tlen
        if tpos != len(body):
            raise IkeError("proposal body has trailing octets")
        proposals.append(Proposal(num, proto, spi, transforms))
        pos += plen
    return SaPayload(proposals)


def _decode_ts(buf, responder):
    _need(buf, 4)
    count = buf[0]
    pos = 4
    selectors = []
    for _ in range(count):
        _need(buf[pos:], 8)
        ts_type, proto, slen, sport, eport = struct.unpack_from(">BBHHH", buf, pos)
        if slen < 8 or (slen - 8) % 2:
            raise IkeError("bad selector length")
        _need(buf[pos:], slen)
        half = (slen - 8) // 2
        addrs = buf[pos + 8:pos + slen]
        selectors.append(TrafficSelector(ts_type, proto, sport, eport, addrs[:half], addrs[half:]))
        pos += slen
    return TsPayload(selectors, responder)


def _decode_cp(buf):
    _need(buf, 4)
    attrs = []
    pos = 4
    while pos < len(buf):
        _need(buf[pos:], 4)
        t, n = struct.unpack_from(">HH", buf, pos)
        _need(buf[pos + 4:], n)
        attrs.append((t & 0x7FFF, buf[pos + 4:pos + 4 + n]))
        pos += 4 + n
    return CpPayload(buf[0], attrs)


def _decode_known(ptype, body):
    if ptype == PayloadType.SA:
        return _decode_sa(body)
    if ptype == PayloadType.KE:
        _need(body, 4)
        return KePayload(struct.unpack_from(">H", body)[0], body[4:])
    if ptype == PayloadType.NONCE:
        return NoncePayload(body)
    if ptype == PayloadType.NOTIFY:
        _need(body, 4)
        proto, spi_size, ntype = struct.unpack_from(">BBH", body)
        _need(body[4:], spi_size)
        return NotifyPayload(ntype, body[4 + spi_size:], proto, body[4:4 + spi_size])
    if ptype in (PayloadType.IDi, PayloadType.IDr):
        _need(body, 4)
        return IdPayload(body[0], body[4:], ptype == PayloadType.IDr)
    if ptype == PayloadType.AUTH:
        _need(body, 4)
        return AuthPayload(body[0], body[4:])
    if ptype == PayloadType.EAP:
        return EapPayload(body)
    if ptype == PayloadType.DELETE:
        _need(body, 4)
        proto, spi_size, count = struct.unpack_from(">BBH", body)
        spis = [body[4 + i * spi_size:4 + (i + 1) * spi_size] for i in range(count)]
        return DeletePayload(proto, spi_size, spis)
    if ptype == PayloadType.VENDOR:
        return VendorPayload(body)
    if ptype in (PayloadType.TSi, PayloadType.TSr):
        return _decode_ts(body, ptype == PayloadType.TSr)
    if ptype == PayloadType.CP:
        return _decode_cp(body)
    return None


def decode_payload(ptype, body, critical, next_payload=0):
    if ptype == PayloadType.SK:
        return EncryptedPayload(next_payload, body, critical=critical)
    try:
        payload = _decode_known(ptype, body)
    except (IkeError, struct.error, IndexError):
        payload = None
    # keep the object only if it re-encodes to the same octets
    if payload is not None and encode_body(payload) == body:
        payload.critical = critical
        return payload
    return OpaquePayload(ptype, body, critical=critical)


# -- chains -------------------------------------------------------------------

def encode_payloads(payloads):
    """Serialize a payload chain; returns (first payload type, octets)."""
    out = []
    for i, p in enumerate(payloads):
        body = encode_body(p)
        if isinstance(p, EncryptedPayload):
            nxt = p.first_inner
        elif i + 1 < len(payloads):
            nxt = payloads[i + 1].type_code
        else:
            nxt = PayloadType.NONE
        out.append(struct.pack(">BBH", nxt, 0x80 if p.critical else 0, 4 + len(body)) + body)
    first = payloads[0].type_code if payloads else PayloadType.NONE
    return int(first), b"".join(out)


def decode_payloads(first, buf):
    payloads = []
    pos = 0
    ptype = first
    while ptype != PayloadType.NONE:
        if pos + 4 > len(buf):
            raise Truncated(f"payload header at offset {pos} runs past the buffer")
        nxt, flags, plen = struct.unpack_from(">BBH", buf, pos)
        if plen < 4:
            raise BadChain(f"payload length {plen} at offset {pos}")
        if pos + plen > len(buf):
            raise Truncated(f"payload at offset {pos} claims {plen} octets")
        payloads.append(decode_payload(ptype, buf[pos + 4:pos + plen], bool(flags & 0x80), nxt))
        pos += plen
        if ptype == PayloadType.SK:
            break
        ptype = nxt
    if pos != len(buf):
        raise BadChain(f"{len(buf) - pos} octets after the last payload")
    return payloads


def _pack_header(h, next_payload, length):
    return struct.pack(">QQBBBBII", h.spi_i, h.spi_r, next_payload, h.version,
                       h.exchange_type, h.flags, h.message_id, length)


def serialize_message(msg):
    first, body = encode_payloads(msg.payloads)
    nxt = msg.overrides.get("next_payload", first)
    length = msg.overrides.get("length", HEADER_LEN + len(body))
    return _pack_header(msg.header, nxt, length) + body


def parse_message(data):
    data = bytes(data)
    if len(data) < HEADER_LEN:
        raise Truncated(f"{len(data)} octets is shorter than the IKE header")
    spi_i, spi_r, nxt, version, exch, flags, mid, length = struct.unpack_from(">QQBBBBII", data)
    if length != len(data):
        raise LengthMismatch(f"header says {length} octets, buffer has {len(data)}")
    header = IkeHeader(spi_i, spi_r, exch, flags, mid, version, nxt, length)
    return IkeMessage(header, decode_payloads(nxt, data[HEADER_LEN:]), raw=data)


def try_parse(data):
    """Parse or return the IkeError instead of raising."""
    try:
        return parse_message(data)
    except IkeError as exc:
        return exc


# -- encrypted payload --------------------------------------------------------

SaAlgs = namedtuple("SaAlgs", "encr prf integ dh")


def _direction_keys(keys, initiator):
    return (keys.sk_ei, keys.sk_ai) if initiator else (keys.sk_er, keys.sk_ar)


def seal_message(msg, keys, algs, initiator, iv_seed):
    """Move all payloads of ``msg`` into an SK payload; returns the sealed message with raw set."""
    first, inner = encode_payloads(msg.payloads)
    sk_e, sk_a = _direction_keys(keys, initiator)
    total = HEADER_LEN + 4 + crypto.sealed_len(algs.encr, algs.integ, len(inner))
    length = msg.overrides.get("length", total)
    nxt = msg.overrides.get("next_payload", PayloadType.SK)
    sk_len = 4 + crypto.sealed_len(algs.encr, algs.integ, len(inner))
    prefix = _pack_header(msg.header, nxt, length) + struct.pack(">BBH", first, 0, sk_len)
    sealed = crypto.seal(algs.encr, algs.integ, sk_e, sk_a, inner, iv_seed, aad=prefix)
    raw = prefix + sealed
    header = replace(msg.header, next_payload=nxt, length=length)
    return IkeMessage(header, [EncryptedPayload(first, sealed)], dict(msg.overrides), raw)


def open_message(msg, keys, algs, initiator):
    """Decrypt the SK payload of a parsed message; ``initiator`` names the sender's role."""
    sk = msg.find(EncryptedPayload)
    if sk is None:
        raise IkeError("message has no encrypted payload")
    raw = msg.raw if msg.raw is not None else serialize_message(msg)
    sk_e, sk_a = _direction_keys(keys, initiator)
    prefix = raw[:len(raw) - len(sk.data)]
    plain = crypto.unseal(algs.encr, algs.integ, sk_e, sk_a, sk.data, aad=prefix)
    inner = decode_payloads(sk.first_inner, plain)
    outer = [p for p in msg.payloads if p is not sk]
    return IkeMessage(msg.header, outer + inner, dict(msg.overrides), raw)


# -- proposal selection -------------------------------------------------------

IKE_REQUIRED = (TransformType.ENCR, TransformType.PRF, TransformType.INTEG, TransformType.DH)


def transform_acceptable(t, acceptable):
    if t.id not in acceptable.get(t.type, ()):
        return False
    if t.type == TransformType.ENCR and t.id == crypto.EncrId.ENCR_AES_CBC:
        return t.key_length == 128
    return True


def select_proposal(sa, acceptable, required=IKE_REQUIRED):
    """First offered proposal where every required type has an acceptable transform.

    Returns a proposal holding exactly the chosen transform of each type, or None.
    """
    for prop in sa.proposals:
        chosen = []
        for ttype in required:
            match = next((t for t in prop.of_type(ttype) if transform_acceptable(t, acceptable)), None)
            if match is None:
                break
            chosen.append(match)
        else:
            return Proposal(prop.num, prop.protocol, prop.spi, chosen)
    return None


def single_choice(sa, required=IKE_REQUIRED):
    """For a response SA: the one chosen transform per type, or None if the shape is wrong."""
    if sa is None or len(sa.proposals) != 1:
        return None
    prop = sa.proposals[0]
    picked = {}
    for t in prop.transforms:
        if t.type in picked:
            return None
        picked[t.type] = t
    if any(r not in picked for r in required):
        return None
    return picked


# -- attribute paths ----------------------------------------------------------

_HEADER_FIELDS = {
    "header.version": ("version", 1),
    "header.exchange_type": ("exchange_type", 1),
    "header.flags": ("flags", 1),
    "header.message_id": ("message_id", 4),
    "header.spi_i": ("spi_i", 8),
    "header.spi_r": ("spi_r", 8),
}
_HEADER_OVERRIDES = {"header.length": ("length", 4), "header.next_payload": ("next_payload", 1)}

_SA_TRANSFORMS = {
    "security_association.encr": TransformType.ENCR,
    "security_association.prf": TransformType.PRF,
    "security_association.integ": TransformType.INTEG,
    "security_association.dh": TransformType.DH,
}

_PAYLOADS = {
    "security_association": lambda: SaPayload,
    "key_exchange": lambda: KePayload,
    "nonce": lambda: NoncePayload,
    "notify": lambda: NotifyPayload,
    "identity_i": lambda: IdPayload,
    "identity_r": lambda: IdPayload,
    "auth": lambda: AuthPayload,
    "eap": lambda: EapPayload,
    "configuration": lambda: CpPayload,
    "traffic_selector_i": lambda: TsPayload,
    "traffic_selector_r": lambda: TsPayload,
    "vendor_id": lambda: VendorPayload,
}

_RESPONDER_FLAG = {"identity_i": False, "identity_r": True, "traffic_selector_i": False, "traffic_selector_r": True}

_EAP_FIELDS = {
    "eap.code": ("code", 1),
    "eap.identifier": ("identifier", 1),
    "eap.type": ("type", 1),
    "eap.subtype": ("subtype", 1),
}
_EAP_ATTRS = {
    "eap.at_rand": eap.AkaAttr.AT_RAND,
    "eap.at_autn": eap.AkaAttr.AT_AUTN,
    "eap.at_mac": eap.AkaAttr.AT_MAC,
    "eap.at_res": eap.AkaAttr.AT_RES,
}

_SCALARS = {
    "key_exchange.group": ("group", 2),
    "notify.type": ("notify_type", 2),
    "identity_i.id_type": ("id_type", 1),
    "identity_r.id_type": ("id_type", 1),
    "auth.method": ("method", 1),
    "configuration.cfg_type": ("cfg_type", 1),
}
_OCTETS = {
    "key_exchange.data": "data",
    "nonce.data": "data",
    "notify.data": "data",
    "identity_i.data": "data",
    "identity_r.data": "data",
    "auth.data": "data",
}

IKE_VOCABULARY = frozenset(
    list(_HEADER_FIELDS) + list(_HEADER_OVERRIDES) + list(_SA_TRANSFORMS)
    + ["security_association.key_length"] + list(_PAYLOADS) + list(_EAP_FIELDS)
    + list(_EAP_ATTRS) + list(_SCALARS) + list(_OCTETS)
)

_TRANSFORM_NAMES = {
    TransformType.ENCR: {e.name: e for e in crypto.EncrId},
    TransformType.PRF: {e.name: e for e in crypto.PrfId},
    TransformType.INTEG: {e.name: e for e in crypto.IntegId},
    TransformType.DH: {e.name: e for e in crypto.DhGroupId},
}


def _payload_for(msg, path):
    root = path.split(".")[0]
    cls = _PAYLOADS[root]()
    return msg.find(cls, _RESPONDER_FLAG.get(root))


def _require(msg, path):
    p = _payload_for(msg, path)
    if p is None:
        raise AttributeAbsent(f"{path}: payload not present")
    return p


def _first_proposal(msg, path):
    sa = _require(msg, path)
    if not sa.proposals:
        raise AttributeAbsent(f"{path}: SA has no proposals")
    return sa.proposals[0]


def _edit_eap(msg, path, fn):
    p = _require(msg, path)
    pkt = eap.decode_eap(p.data)
    fn(pkt)
    p.data = eap.encode_eap(pkt)


def _aka_value(attr, value):
    raw = to_bytes(value)
    if attr in (eap.AkaAttr.AT_RAND, eap.AkaAttr.AT_AUTN, eap.AkaAttr.AT_MAC):
        raw = bytes(2) + raw
    return raw + bytes(-(len(raw) + 2) % 4)


def check_path(path):
    if path not in IKE_VOCABULARY:
        raise UnknownAttribute(f"unknown IKE attribute {path!r}")


def apply_update(msg, path, value):
    """Set the field named by ``path`` in a plaintext message (in place)."""
    check_path(path)
    if path in _HEADER_FIELDS:
        name, width = _HEADER_FIELDS[path]
        setattr(msg.header, name, to_int(value, width))
    elif path in _HEADER_OVERRIDES:
        name, width = _HEADER_OVERRIDES[path]
        msg.overrides[name] = to_int(value, width)
    elif path in _SA_TRANSFORMS:
        ttype = _SA_TRANSFORMS[path]
        prop = _first_proposal(msg, path)
        targets = prop.of_type(ttype)
        if not targets:
            raise AttributeAbsent(f"{path}: no transform of that type")
        targets[0].id = to_int(value, 2, _TRANSFORM_NAMES[ttype])
    elif path == "security_association.key_length":
        prop = _first_proposal(msg, path)
        encr = prop.of_type(TransformType.ENCR)
        if not encr:
            raise AttributeAbsent(f"{path}: no ENCR transform")
        t = encr[0]
        v = to_int(value, 2)
        t.attributes = [(a, x) for a, x in t.attributes if a != ATTR_KEY_LENGTH] + [(ATTR_KEY_LENGTH, v)]
    elif path in _EAP_FIELDS:
        name, width = _EAP_FIELDS[path]
        v = to_int(value, width)
        _edit_eap(msg, path, lambda pkt: setattr(pkt, name, v))
    elif path in _EAP_ATTRS:
        attr = _EAP_ATTRS[path]
        v = _aka_value(attr, value)
        _edit_eap(msg, path, lambda pkt: pkt.set(attr, v))
    elif path in _SCALARS:
        name, width = _SCALARS[path]
        names = _TRANSFORM_NAMES[TransformType.DH] if path == "key_exchange.group" else None
        if path == "notify.type":
            names = {e.name: e for e in NotifyType}
        setattr(_require(msg, path), name, to_int(value, width, names))
    elif path in _OCTETS:
        setattr(_require(msg, path), _OCTETS[path], to_bytes(value))
    else:
        raise UnknownAttribute(f"{path!r} cannot be updated")
    return msg


def apply_drop(msg, path):
    check_path(path)
    if path in _PAYLOADS:
        target = _require(msg, path)
        msg.payloads = [p for p in msg.payloads if p is not target]
    elif path in _SA_TRANSFORMS:
        prop = _first_proposal(msg, path)
        if not prop.of_type(_SA_TRANSFORMS[path]):
            raise AttributeAbsent(f"{path}: no transform of that type")
        prop.transforms = [t for t in prop.transforms if t.type != _SA_TRANSFORMS[path]]
    elif path == "security_association.key_length":
        prop = _first_proposal(msg, path)
        for t in prop.of_type(TransformType.ENCR):
            t.attributes = [(a, x) for a, x in t.attributes if a != ATTR_KEY_LENGTH]
    elif path in _EAP_ATTRS:
        attr = _EAP_ATTRS[path]
        _edit_eap(msg, path, lambda pkt: pkt.remove(attr))
    elif path in _OCTETS:
        setattr(_require(msg, path), _OCTETS[path], b"")
    elif path in _HEADER_OVERRIDES:
        raise UnknownAttribute(f"{path!r} cannot be dropped")
    else:
        raise UnknownAttribute(f"{path!r} cannot be dropped")
    return msg


def apply_insert(msg, path, value=None):
    """Append a new payload (or SA transform) named by ``path``."""
    check_path(path)
    if path in _SA_TRANSFORMS:
        ttype = _SA_TRANSFORMS[path]
        prop = _first_proposal(msg, path)
        prop.transforms.append(Transform(ttype, to_int(value, 2, _TRANSFORM_NAMES[ttype])))
        return msg
    data = to_bytes(value) if value is not None else b""
    if path == "nonce":
        payload = NoncePayload(data or bytes(32))
    elif path == "key_exchange":
        group = to_int(value, 2, _TRANSFORM_NAMES[TransformType.DH]) if value is not None else 14
        payload = KePayload(group, bytes(crypto.get_group(group).modulus_bytes)
                            if crypto.is_registered(TransformType.DH, group) else b"")
    elif path == "notify":
        ntype = to_int(value, 2, {e.name: e for e in NotifyType}) if value is not None else 0
        payload = NotifyPayload(ntype)
    elif path == "vendor_id":
        payload = VendorPayload(data)
    elif path in ("identity_i", "identity_r"):
        payload = IdPayload(IdType.ID_FQDN, data, path == "identity_r")
    elif path == "auth":
        payload = AuthPayload(AuthMethod.SHARED_KEY_MIC, data)
    elif path == "eap":
        payload = EapPayload(data or eap.encode_eap(eap.build_success(0)))
    else:
        raise UnknownAttribute(f"{path!r} cannot be inserted")
    msg.payloads.append(payload)
    return msg


# -- presentation -------------------------------------------------------------

_SHORT_NAMES = {
    SaPayload: "SA", KePayload: "KE", NoncePayload: "Nonce", NotifyPayload: "N", AuthPayload: "AUTH",
    EapPayload: "EAP", DeletePayload: "D", VendorPayload: "V", CpPayload: "CP", EncryptedPayload: "SK",
}


def payload_label(p):
    if isinstance(p, IdPayload):
        return "IDr" if p.responder else "IDi"
    if isinstance(p, TsPayload):
        return "TSr" if p.responder else "TSi"
    if isinstance(p, NotifyPayload):
        try:
            return f"N({NotifyType(p.notify_type).name})"
        except ValueError:
            return f"N({p.notify_type})"
    if isinstance(p, OpaquePayload):
        return f"?{p.payload_type}"
    return _SHORT_NAMES[type(p)]


def summarize(msg):
    h = msg.header
    try:
        exch = ExchangeType(h.exchange_type).name
    except ValueError:
        exch = str(h.exchange_type)
    return {
        "exchange": exch,
        "message_id": h.message_id,
        "response": h.is_response,
        "payloads": [payload_label(p) for p in msg.payloads],
    }


def hexdump(data, width=16):
    lines = []
    for off in range(0, len(data), width):
        chunk = data[off:off + width]
        hexpart = " ".join(f"{b:02x}" for b in chunk)
        text = "".join(chr(b) if 32 <= b < 127 else "." for b in chunk)
        lines.append(f"{off:04x}  {hexpart:<{width * 3 - 1}}  |{text}|")
    return "\n".join(lines)
