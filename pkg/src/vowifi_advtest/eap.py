"""EAP-AKA packets, a test AKA function and the EAP-AKA key hierarchy.

The AKA function here is a keyed-HMAC stand-in for MILENAGE with the same
input/output shapes (RAND 16, AUTN 16, RES 8, CK 16, IK 16). It is only
meant for simulated subscribers.
"""

import enum
import hashlib
import hmac
import struct
from collections import namedtuple
from dataclasses import dataclass, field

EAP_TYPE_AKA = 23


class EapCode(enum.IntEnum):
    REQUEST = 1
    RESPONSE = 2
    SUCCESS = 3
    FAILURE = 4


class AkaSubtype(enum.IntEnum):
    CHALLENGE = 1
    AUTHENTICATION_REJECT = 2
    SYNCHRONIZATION_FAILURE = 4
    IDENTITY = 5
    NOTIFICATION = 12
    REAUTHENTICATION = 13
    CLIENT_ERROR = 14


class AkaAttr(enum.IntEnum):
    AT_RAND = 1
    AT_AUTN = 2
    AT_RES = 3
    AT_AUTS = 4
    AT_MAC = 11
    AT_NOTIFICATION = 12
    AT_IDENTITY = 14
    AT_CLIENT_ERROR_CODE = 22


class EapError(Exception):
    pass


@dataclass
class EapPacket:
    code: int
    identifier: int
    type: int = None
    subtype: int = None
    # (attribute type, value bytes) in wire order; value excludes the 2-byte header
    attributes: list = field(default_factory=list)

    def get(self, attr):
        for t, v in self.attributes:
            if t == attr:
                return v
        return None

    def set(self, attr, value):
        for i, (t, _v) in enumerate(self.attributes):
            if t == attr:
                self.attributes[i] = (t, value)
                return
        self.attributes.append((attr, value))

    def remove(self, attr):
        self.attributes = [(t, v) for t, v in self.attributes if t != attr]


def encode_eap(pkt):
    if pkt.type is None:
        return struct.pack(">BBH", pkt.code, pkt.identifier, 4)
    body = b""
    if pkt.type == EAP_TYPE_AKA:
        body = struct.pack(">BH", pkt.subtype or 0, 0)
        for t, v in pkt.attributes:
            if (len(v) + 2) % 4:
                raise EapError(f"attribute {t} value not 4-byte aligned")
            body += struct.pack(">BB", t, (len(v) + 2) // 4) + v
    else:
        body = b"".join(v for _t, v in pkt.attributes)
    return struct.pack(">BBHB", pkt.code, pkt.identifier, 5 + len(body), pkt.type) + body


def decode_eap(data):
    if len(data) < 4:
        raise EapError("EAP packet shorter than 4 bytes")
    code, ident, length = struct.unpack_from(">BBH", data)
    if length != len(data):
        raise EapError("EAP length field mismatch")
    if length == 4:
        return EapPacket(code, ident)
    etype = data[4]
    if etype != EAP_TYPE_AKA:
        return EapPacket(code, ident, etype, None, [(0, data[5:])])
    if length < 8:
        raise EapError("truncated EAP-AKA header")
    subtype = data[5]
    attrs = []
    pos = 8
    while pos < length:
        if pos + 2 > length:
            raise EapError("truncated attribute header")
        t, n = data[pos], data[pos + 1] * 4
        if n < 4 or pos + n > length:
            raise EapError("bad attribute length")
        attrs.append((t, data[pos + 2:pos + n]))
        pos += n
    return EapPacket(code, ident, etype, subtype, attrs)


def rand_attr(rand):
    return bytes(2) + rand


def attr_payload(value):
    """Strip the 2 reserved octets of AT_RAND / AT_AUTN / AT_MAC values."""
    return value[2:] if value is not None else None


def res_attr(res):
    padded = res + bytes(-len(res) % 4)
    return struct.pack(">H", len(res) * 8) + padded


def res_from_attr(value):
    bits = struct.unpack_from(">H", value)[0]
    return value[2:2 + bits // 8]


# -- AKA test function -------------------------------------------------------

AkaVector = namedtuple("AkaVector", "rand autn xres ck ik")
AkaResult = namedtuple("AkaResult", "res ck ik")

_AMF = b"\x80\x00"


def _f(secret_k, label, *parts):
    return hmac.new(secret_k, label + b"".join(parts), hashlib.sha256).digest()


def _xor(a, b):
    return bytes(x ^ y for x, y in zip(a, b))


def aka_challenge(secret_k, op_key, rand, sqn=0):
    """Network side: AUTN, XRES, CK, IK for a given RAND."""
    sqn_b = sqn.to_bytes(6, "big")
    ak = _f(secret_k, b"ak", op_key, rand)[:6]
    mac_a = _f(secret_k, b"mac", op_key, rand, sqn_b, _AMF)[:8]
    autn = _xor(sqn_b, ak) + _AMF + mac_a
    return AkaVector(
        rand,
        autn,
        _f(secret_k, b"xres", op_key, rand)[:8],
        _f(secret_k, b"ck", op_key, rand)[:16],
        _f(secret_k, b"ik", op_key, rand)[:16],
    )


def verify_autn(secret_k, op_key, rand, autn):
    if len(rand) != 16 or len(autn) != 16:
        return False
    ak = _f(secret_k, b"ak", op_key, rand)[:6]
    sqn_b = _xor(autn[:6], ak)
    expected = _f(secret_k, b"mac", op_key, rand, sqn_b, autn[6:8])[:8]
    return hmac.compare_digest(expected, autn[8:])


def ue_aka(secret_k, op_key, rand, autn):
    """USIM side: RES/CK/IK if AUTN verifies, else None."""
    if not verify_autn(secret_k, op_key, rand, autn):
        return None
    vec = aka_challenge(secret_k, op_key, rand)
    return AkaResult(vec.xres, vec.ck, vec.ik)


# -- Key hierarchy ------------------------------------------------------------

AkaKeys = namedtuple("AkaKeys", "mk k_encr k_aut msk emsk")


def derive_aka_keys(identity, ik, ck):
    """MK = SHA1(identity | IK | CK); the other keys are an HMAC-SHA1 expansion of MK."""
    if isinstance(identity, str):
        identity = identity.encode()
    mk = hashlib.sha1(identity + ik + ck).digest()
    stream = b""
    counter = 0
    while len(stream) < 160:
        counter += 1
        stream += hmac.new(mk, b"EAP-AKA keys" + bytes([counter]), hashlib.sha1).digest()
    return AkaKeys(mk, stream[:16], stream[16:32], stream[32:96], stream[96:160])


def compute_at_mac(k_aut, packet_bytes):
    """HMAC-SHA1-128 over the packet with the AT_MAC value zeroed."""
    return hmac.new(k_aut, packet_bytes, hashlib.sha1).digest()[:16]


def _zero_mac(pkt):
    zeroed = EapPacket(pkt.code, pkt.identifier, pkt.type, pkt.subtype, list(pkt.attributes))
    zeroed.set(AkaAttr.AT_MAC, bytes(18))
    return encode_eap(zeroed)


def sign_packet(pkt, k_aut):
    """Fill AT_MAC in place and return the wire bytes."""
    pkt.set(AkaAttr.AT_MAC, bytes(2) + compute_at_mac(k_aut, _zero_mac(pkt)))
    return encode_eap(pkt)


def check_packet_mac(pkt, k_aut):
    value = pkt.get(AkaAttr.AT_MAC)
    if value is None or len(value) != 18:
        return False
    return hmac.compare_digest(value[2:], compute_at_mac(k_aut, _zero_mac(pkt)))


def build_challenge(identifier, vec, k_aut):
    pkt = EapPacket(EapCode.REQUEST, identifier, EAP_TYPE_AKA, AkaSubtype.CHALLENGE,
                    [(AkaAttr.AT_RAND, rand_attr(vec.rand)), (AkaAttr.AT_AUTN, rand_attr(vec.autn))])
    sign_packet(pkt, k_aut)
    return pkt


def build_challenge_response(identifier, res, k_aut):
    pkt = EapPacket(EapCode.RESPONSE, identifier, EAP_TYPE_AKA, AkaSubtype.CHALLENGE,
                    [(AkaAttr.AT_RES, res_attr(res))])
    sign_packet(pkt, k_aut)
    return pkt


def build_success(identifier):
    return EapPacket(EapCode.SUCCESS, identifier)


def build_failure(identifier):
    return EapPacket(EapCode.FAILURE, identifier)
