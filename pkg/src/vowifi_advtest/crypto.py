"""Cryptographic primitives for IKEv2: DH groups, PRFs, prf+, key schedule, seal/unseal.

Transform identifiers follow the IANA IKEv2 registry. Weak entries are kept on
purpose because the test harness must be able to negotiate them.
"""

import enum
import functools
import hashlib
import hmac
import struct
from collections import namedtuple
from dataclasses import dataclass

import gmpy2
from cryptography.hazmat.primitives.ciphers import Cipher, modes
from cryptography.hazmat.primitives.ciphers.algorithms import AES

try:
    from cryptography.hazmat.decrepit.ciphers.algorithms import TripleDES
except ImportError:  # older cryptography releases
    from cryptography.hazmat.primitives.ciphers.algorithms import TripleDES

from . import _groups


class CryptoError(Exception):
    pass


class UnknownGroup(CryptoError):
    pass


class UnknownAlgorithm(CryptoError):
    pass


class InvalidPeerValue(CryptoError):
    pass


class IntegrityFailure(CryptoError):
    pass


class BadPadding(CryptoError):
    pass


class TransformType(enum.IntEnum):
    ENCR = 1
    PRF = 2
    INTEG = 3
    DH = 4
    ESN = 5


class EncrId(enum.IntEnum):
    ENCR_DES = 2
    ENCR_3DES = 3
    ENCR_AES_CBC = 12


class PrfId(enum.IntEnum):
    PRF_HMAC_MD5 = 1
    PRF_HMAC_SHA1 = 2


class IntegId(enum.IntEnum):
    AUTH_HMAC_MD5_96 = 1
    AUTH_HMAC_SHA1_96 = 2


class DhGroupId(enum.IntEnum):
    MODP_768 = 1
    MODP_1024 = 2
    MODP_1536 = 5
    MODP_2048 = 14
    MODP_1024_160_PO = 22
    MODP_2048_224_PO = 23
    MODP_2048_256_PO = 24


_ENUM_BY_TYPE = {
    TransformType.ENCR: EncrId,
    TransformType.PRF: PrfId,
    TransformType.INTEG: IntegId,
    TransformType.DH: DhGroupId,
}


# name, key bytes (None = variable), block bytes, weak
_ENCR = {
    EncrId.ENCR_DES: ("DES-CBC", 8, 8, True),
    EncrId.ENCR_3DES: ("3DES-CBC", 24, 8, True),
    EncrId.ENCR_AES_CBC: ("AES-CBC-128", 16, 16, False),
}
# name, digest constructor, key bytes, output bytes, weak
_PRF = {
    PrfId.PRF_HMAC_MD5: ("HMAC-MD5", hashlib.md5, 16, 16, True),
    PrfId.PRF_HMAC_SHA1: ("HMAC-SHA1", hashlib.sha1, 20, 20, False),
}
# name, digest constructor, key bytes, truncated tag bytes, weak
_INTEG = {
    IntegId.AUTH_HMAC_MD5_96: ("HMAC-MD5-96", hashlib.md5, 16, 12, True),
    IntegId.AUTH_HMAC_SHA1_96: ("HMAC-SHA1-96", hashlib.sha1, 20, 12, False),
}


@dataclass(frozen=True)
class DhGroup:
    id: DhGroupId
    p: int
    g: int
    q: int
    weak: bool

    @property
    def modulus_bytes(self):
        return (self.p.bit_length() + 7) // 8

    @property
    def bits(self):
        return self.p.bit_length()


def _hex(parts):
    return int("".join(parts), 16)


def _safe_prime_group(gid, p_hex, weak):
    p = _hex(p_hex)
    return DhGroup(gid, p, 2, (p - 1) // 2, weak)


def _po_group(gid, name):
    p = _hex(getattr(_groups, f"_{name}_P"))
    g = _hex(getattr(_groups, f"_{name}_G"))
    q = _hex(getattr(_groups, f"_{name}_Q"))
    return DhGroup(gid, p, g, q, True)


DH_GROUPS = {
    DhGroupId.MODP_768: _safe_prime_group(DhGroupId.MODP_768, _groups._MODP_768_P, True),
    DhGroupId.MODP_1024: _safe_prime_group(DhGroupId.MODP_1024, _groups._MODP_1024_P, True),
    DhGroupId.MODP_1536: _safe_prime_group(DhGroupId.MODP_1536, _groups._MODP_1536_P, True),
    DhGroupId.MODP_2048: _safe_prime_group(DhGroupId.MODP_2048, _groups._MODP_2048_P, False),
    DhGroupId.MODP_1024_160_PO: _po_group(DhGroupId.MODP_1024_160_PO, "MODP_1024_160_PO"),
    DhGroupId.MODP_2048_224_PO: _po_group(DhGroupId.MODP_2048_224_PO, "MODP_2048_224_PO"),
    DhGroupId.MODP_2048_256_PO: _po_group(DhGroupId.MODP_2048_256_PO, "MODP_2048_256_PO"),
}


TransformInfo = namedtuple("TransformInfo", "type id name key_bytes weak")


def transform_registry():
    """All registered transforms as TransformInfo rows, in registry order."""
    rows = []
    for tid, (name, klen, _block, weak) in _ENCR.items():
        rows.append(TransformInfo(TransformType.ENCR, tid, name, klen, weak))
    for tid, (name, _h, klen, _out, weak) in _PRF.items():
        rows.append(TransformInfo(TransformType.PRF, tid, name, klen, weak))
    for tid, (name, _h, klen, _out, weak) in _INTEG.items():
        rows.append(TransformInfo(TransformType.INTEG, tid, name, klen, weak))
    for gid, grp in DH_GROUPS.items():
        rows.append(TransformInfo(TransformType.DH, gid, gid.name, None, grp.weak))
    return rows


def transform_enum(ttype):
    return _ENUM_BY_TYPE[TransformType(ttype)]


def is_registered(ttype, tid):
    try:
        transform_enum(ttype)(tid)
    except ValueError:
        return False
    return True


def is_weak(ttype, tid):
    """True for registered transforms that must not be negotiated by a hardened peer."""
    ttype = TransformType(ttype)
    if ttype == TransformType.ENCR:
        return _ENCR[EncrId(tid)][3]
    if ttype == TransformType.PRF:
        return _PRF[PrfId(tid)][4]
    if ttype == TransformType.INTEG:
        return _INTEG[IntegId(tid)][4]
    if ttype == TransformType.DH:
        return DH_GROUPS[DhGroupId(tid)].weak
    raise UnknownAlgorithm(f"no weakness rating for transform type {ttype}")


def transform_name(ttype, tid):
    try:
        return transform_enum(ttype)(tid).name
    except (ValueError, KeyError):
        return str(tid)


def get_group(group):
    try:
        return DH_GROUPS[DhGroupId(group)]
    except ValueError:
        raise UnknownGroup(f"unregistered DH group {group!r}") from None


# -- Diffie-Hellman -----------------------------------------------------------

@functools.lru_cache(maxsize=4096)
def _modexp(base, exponent, modulus):
    # pure function; memoized because the harness reuses long-lived keypairs
    return int(gmpy2.powmod(base, exponent, modulus))


@dataclass(frozen=True)
class DhKeyPair:
    group: DhGroupId
    private: int
    public: int

    @property
    def public_bytes(self):
        return self.public.to_bytes(get_group(self.group).modulus_bytes, "big")

    @classmethod
    def from_exponent(cls, group, exponent):
        grp = get_group(group)
        if not 0 < exponent < grp.p - 1:
            raise ValueError("exponent out of range")
        return cls(grp.id, exponent, _modexp(grp.g, exponent, grp.p))


def _expand(seed, label, length):
    out = b""
    counter = 0
    while len(out) < length:
        counter += 1
        out += hmac.new(seed, label + bytes([counter]), hashlib.sha256).digest()
    return out[:length]


def dh_keypair(group, seed):
    """Deterministic keypair for ``group`` derived from ``seed`` bytes.

    The private exponent is 256 bits for safe-prime groups and uniform below q
    for the prime-order subgroups.
    """
    grp = get_group(group)
    if isinstance(seed, str):
        seed = seed.encode()
    bound = min(grp.q, 1 << 256)
    raw = int.from_bytes(_expand(seed, b"dh-exponent", 40), "big")
    x = 2 + raw % (bound - 3)
    return DhKeyPair.from_exponent(grp.id, x)


def zero_secret(group):
    """All-zero octets of the group's modulus length."""
    return bytes(get_group(group).modulus_bytes)


def dh_shared(group, mine, peer_public):
    """g^(xy) mod p as modulus-length big-endian octets; an all-zero peer value yields the zero secret."""
    grp = get_group(group)
    if isinstance(peer_public, (bytes, bytearray)):
        if len(peer_public) != grp.modulus_bytes:
            raise InvalidPeerValue(
                f"peer value is {len(peer_public)} bytes, expected {grp.modulus_bytes}")
        if not any(peer_public):
            # all-zero sentinel: the vulnerable-UE path that uses a zero secret
            return zero_secret(group)
        peer = int.from_bytes(peer_public, "big")
    else:
        peer = int(peer_public)
    if not 1 < peer < grp.p - 1:
        raise InvalidPeerValue("peer value outside (1, p-1)")
    private = mine.private if isinstance(mine, DhKeyPair) else int(mine)
    return _modexp(peer, private, grp.p).to_bytes(grp.modulus_bytes, "big")


# -- PRF and key schedule -----------------------------------------------------

def _prf_entry(alg):
    try:
        return _PRF[PrfId(alg)]
    except ValueError:
        raise UnknownAlgorithm(f"unsupported PRF {alg!r}") from None


def prf_eval(alg, key, data):
    return hmac.new(key, data, _prf_entry(alg)[1]).digest()


def prf_output_len(alg):
    return _prf_entry(alg)[3]


def prf_plus(alg, key, seed, length):
    """prf+ of RFC 7296: T1 | T2 | ... with Tn = prf(K, Tn-1 | S | n)."""
    out_len = prf_output_len(alg)
    if length > 255 * out_len:
        raise ValueError("prf+ output limited to 255 blocks")
    digest = _prf_entry(alg)[1]
    out = b""
    t = b""
    n = 1
    while len(out) < length:
        t = hmac.new(key, t + seed + bytes([n]), digest).digest()
        out += t
        n += 1
    return out[:length]


def encr_key_len(alg):
    try:
        return _ENCR[EncrId(alg)][1]
    except ValueError:
        raise UnknownAlgorithm(f"unsupported ENCR {alg!r}") from None


def encr_block_len(alg):
    try:
        return _ENCR[EncrId(alg)][2]
    except ValueError:
        raise UnknownAlgorithm(f"unsupported ENCR {alg!r}") from None


def _integ_entry(alg):
    try:
        return _INTEG[IntegId(alg)]
    except ValueError:
        raise UnknownAlgorithm(f"unsupported INTEG {alg!r}") from None


def integ_key_len(alg):
    return _integ_entry(alg)[2]


def integ_tag_len(alg):
    return _integ_entry(alg)[3]


KeyLengths = namedtuple("KeyLengths", "prf integ encr")


def key_lengths(prf, integ, encr):
    return KeyLengths(prf_output_len(prf), integ_key_len(integ), encr_key_len(encr))


IkeKeyBundle = namedtuple("IkeKeyBundle", "sk_d sk_ai sk_ar sk_ei sk_er sk_pi sk_pr")


def derive_ike_keys(prf, ni, nr, shared, spi_i, spi_r, lengths):
    """SKEYSEED and the seven IKE SA keys, sliced in RFC 7296 order."""
    skeyseed = prf_eval(prf, ni + nr, shared)
    d, a, e = lengths.prf, lengths.integ, lengths.encr
    spis = struct.pack(">QQ", spi_i, spi_r) if isinstance(spi_i, int) else spi_i + spi_r
    stream = prf_plus(prf, skeyseed, ni + nr + spis, 3 * d + 2 * a + 2 * e)
    offsets = [d, a, a, e, e, d, d]
    keys = []
    pos = 0
    for n in offsets:
        keys.append(stream[pos:pos + n])
        pos += n
    return IkeKeyBundle(*keys)


# -- Authenticated encryption (encrypt-then-MAC) ------------------------------

def _cipher(alg, key):
    alg = EncrId(alg)
    if len(key) != encr_key_len(alg):
        raise ValueError(f"{alg.name} needs a {encr_key_len(alg)}-byte key")
    if alg == EncrId.ENCR_AES_CBC:
        return AES(key)
    if alg == EncrId.ENCR_DES:
        # single DES expressed as EDE with K1 = K2 = K3
        return TripleDES(key * 3)
    return TripleDES(key)


def make_iv(alg, iv_seed):
    return hashlib.sha256(b"iv" + iv_seed).digest()[:encr_block_len(alg)]


def sealed_len(encr, integ, plaintext_len):
    block = encr_block_len(encr)
    padded = (plaintext_len // block + 1) * block
    return block + padded + integ_tag_len(integ)


def mac(integ, key, data):
    entry = _integ_entry(integ)
    return hmac.new(key, data, entry[1]).digest()[:entry[3]]


def seal(encr, integ, sk_e, sk_a, plaintext, iv_seed, aad=b""):
    """IV | CBC ciphertext | truncated HMAC over aad | IV | ciphertext."""
    block = encr_block_len(encr)
    iv = make_iv(encr, iv_seed)
    pad_len = block - 1 - len(plaintext) % block
    padded = plaintext + bytes(range(1, pad_len + 1)) + bytes([pad_len])
    enc = Cipher(_cipher(encr, sk_e), modes.CBC(iv)).encryptor()
    body = iv + enc.update(padded) + enc.finalize()
    return body + mac(integ, sk_a, aad + body)


def unseal(encr, integ, sk_e, sk_a, sealed, aad=b""):
    block = encr_block_len(encr)
    tag_len = integ_tag_len(integ)
    if len(sealed) < block + tag_len:
        raise BadPadding("sealed blob shorter than IV and tag")
    body, tag = sealed[:-tag_len], sealed[-tag_len:]
    if not hmac.compare_digest(mac(integ, sk_a, aad + body), tag):
        raise IntegrityFailure("integrity check value mismatch")
    iv, ct = body[:block], body[block:]
    if not ct or len(ct) % block:
        raise BadPadding("ciphertext is not a whole number of blocks")
    dec = Cipher(_cipher(encr, sk_e), modes.CBC(iv)).decryptor()
    padded = dec.update(ct) + dec.finalize()
    pad_len = padded[-1]
    if pad_len + 1 > len(padded):
        raise BadPadding("pad length exceeds plaintext")
    return padded[:-(pad_len + 1)]


def psk_auth(prf, secret, signed_octets):
    """AUTH value for shared-key MIC authentication: prf(prf(secret, pad), octets)."""
    return prf_eval(prf, prf_eval(prf, secret, b"Key Pad for IKEv2"), signed_octets)
