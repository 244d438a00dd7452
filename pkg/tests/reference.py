"""Independent reference implementations used as test oracles.

Nothing here imports the package under test: modular exponentiation is plain
square-and-multiply, HMAC is built from hashlib by the two-stage ipad/opad
construction, and the IKEv2 key schedule is written out from RFC 7296.
"""

import hashlib
import struct


def modexp(base, exponent, modulus):
    result = 1
    base %= modulus
    while exponent:
        if exponent & 1:
            result = result * base % modulus
        base = base * base % modulus
        exponent >>= 1
    return result


def hmac_two_stage(hash_name, key, data):
    h = getattr(hashlib, hash_name)
    block = h().block_size
    if len(key) > block:
        key = h(key).digest()
    key = key.ljust(block, b"\x00")
    inner = h(bytes(k ^ 0x36 for k in key) + data).digest()
    return h(bytes(k ^ 0x5C for k in key) + inner).digest()


PRF_HASH = {1: "md5", 2: "sha1"}


def prf(prf_id, key, data):
    return hmac_two_stage(PRF_HASH[prf_id], key, data)


def prf_plus(prf_id, key, seed, length):
    out, t, i = b"", b"", 1
    while len(out) < length:
        t = prf(prf_id, key, t + seed + bytes([i]))
        out += t
        i += 1
    return out[:length]


def ike_keys(prf_id, ni, nr, shared, spi_i, spi_r, prf_len, integ_len, encr_len):
    """(SK_d, SK_ai, SK_ar, SK_ei, SK_er, SK_pi, SK_pr) per RFC 7296."""
    skeyseed = prf(prf_id, ni + nr, shared)
    need = 3 * prf_len + 2 * integ_len + 2 * encr_len
    stream = prf_plus(prf_id, skeyseed, ni + nr + struct.pack(">QQ", spi_i, spi_r), need)
    sizes = [prf_len, integ_len, integ_len, encr_len, encr_len, prf_len, prf_len]
    out, pos = [], 0
    for n in sizes:
        out.append(stream[pos:pos + n])
        pos += n
    return tuple(out)


def digest_response(username, realm, password, method, uri, nonce):
    """RFC 2617 digest without qop."""
    ha1 = hashlib.md5(f"{username}:{realm}:{password}".encode()).hexdigest()
    ha2 = hashlib.md5(f"{method}:{uri}".encode()).hexdigest()
    return hashlib.md5(f"{ha1}:{nonce}:{ha2}".encode()).hexdigest()
