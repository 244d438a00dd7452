import hashlib
import hmac

import pytest
from hypothesis import given, strategies as st

from vowifi_advtest import eap
from vowifi_advtest.eap import AkaAttr, EapCode, EapPacket

K = bytes.fromhex("465b5ce8b199b49faa5f0a2ee238a6bc")
OP = bytes.fromhex("cdc202d5123e20f62b6d676ac72cb318")

aligned = st.integers(0, 20).flatmap(lambda n: st.binary(min_size=4 * n + 2, max_size=4 * n + 2))
aka_packets = st.builds(EapPacket, st.integers(1, 4), st.integers(0, 255), st.just(eap.EAP_TYPE_AKA),
                        st.integers(0, 255), st.lists(st.tuples(st.integers(0, 255), aligned), max_size=5))


@given(aka_packets)
def test_aka_roundtrip(pkt):
    assert eap.decode_eap(eap.encode_eap(pkt)) == pkt


@given(st.integers(1, 4), st.integers(0, 255))
def test_bare_roundtrip(code, ident):
    wire = eap.encode_eap(EapPacket(code, ident))
    assert wire == bytes([code, ident, 0, 4])
    assert eap.decode_eap(wire) == EapPacket(code, ident)


@given(st.binary(max_size=64))
def test_decode_total(data):
    try:
        pkt = eap.decode_eap(data)
    except eap.EapError:
        return
    assert eap.encode_eap(pkt) == data


def test_unaligned_attribute_rejected():
    with pytest.raises(eap.EapError):
        eap.encode_eap(EapPacket(1, 1, eap.EAP_TYPE_AKA, 1, [(1, b"abc")]))


def test_aka_vector_verifies_on_ue():
    rand = bytes(range(16))
    vec = eap.aka_challenge(K, OP, rand)
    got = eap.ue_aka(K, OP, rand, vec.autn)
    assert got == (vec.xres, vec.ck, vec.ik)
    assert len(vec.autn) == 16 and vec.autn[6:8] == b"\x80\x00"


@given(st.integers(0, 15))
def test_tampered_autn_rejected(pos):
    rand = bytes(16)
    autn = bytearray(eap.aka_challenge(K, OP, rand).autn)
    autn[pos] ^= 0x40
    assert eap.ue_aka(K, OP, rand, bytes(autn)) is None


def test_wrong_key_rejected():
    vec = eap.aka_challenge(K, OP, bytes(16))
    assert eap.ue_aka(bytes(16), OP, bytes(16), vec.autn) is None


def test_key_hierarchy_reference():
    keys = eap.derive_aka_keys("0001@nai", b"i" * 16, b"c" * 16)
    mk = hashlib.sha1(b"0001@nai" + b"i" * 16 + b"c" * 16).digest()
    stream = b"".join(hmac.new(mk, b"EAP-AKA keys" + bytes([n]), hashlib.sha1).digest() for n in range(1, 9))
    assert keys == (mk, stream[:16], stream[16:32], stream[32:96], stream[96:160])


def test_challenge_mac_roundtrip():
    k_aut = b"a" * 16
    vec = eap.aka_challenge(K, OP, bytes(16))
    pkt = eap.decode_eap(eap.encode_eap(eap.build_challenge(7, vec, k_aut)))
    assert eap.check_packet_mac(pkt, k_aut)
    assert eap.attr_payload(pkt.get(AkaAttr.AT_RAND)) == vec.rand
    assert eap.attr_payload(pkt.get(AkaAttr.AT_AUTN)) == vec.autn
    assert not eap.check_packet_mac(pkt, b"b" * 16)
    pkt.set(AkaAttr.AT_RAND, eap.rand_attr(b"x" * 16))
    assert not eap.check_packet_mac(pkt, k_aut)


def test_at_mac_is_hmac_over_zeroed_packet():
    k_aut = b"k" * 16
    pkt = eap.build_challenge_response(2, b"r" * 8, k_aut)
    wire = eap.encode_eap(pkt)
    mac = pkt.get(AkaAttr.AT_MAC)[2:]
    zeroed = wire.replace(mac, bytes(16))
    assert mac == hmac.new(k_aut, zeroed, hashlib.sha1).digest()[:16]


@given(st.binary(min_size=4, max_size=16))
def test_res_attr_roundtrip(res):
    v = eap.res_attr(res)
    assert (len(v) + 2) % 4 == 0
    assert eap.res_from_attr(v) == res


def test_success_failure():
    assert eap.encode_eap(eap.build_success(3)) == bytes([EapCode.SUCCESS, 3, 0, 4])
    assert eap.encode_eap(eap.build_failure(3)) == bytes([EapCode.FAILURE, 3, 0, 4])
