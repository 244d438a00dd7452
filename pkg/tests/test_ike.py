import copy
import os
import struct

import pytest
from hypothesis import given, settings, strategies as st

from vowifi_advtest import crypto, eap, ike
from vowifi_advtest.crypto import DhGroupId, EncrId, IntegId, PrfId, TransformType
from vowifi_advtest.ike import (AuthPayload, CpPayload, DeletePayload, EapPayload, EncryptedPayload, IdPayload,
                                IkeHeader, IkeMessage, KePayload, NoncePayload, NotifyPayload, OpaquePayload,
                                Proposal, SaPayload, Transform, TrafficSelector, TsPayload, VendorPayload)

u8 = st.integers(0, 255)
u16 = st.integers(0, 0xFFFF)
small = st.binary(max_size=40)

attr_tv = st.tuples(st.integers(0, 0x7FFF), u16)
attr_tlv = st.tuples(st.integers(0, 0x7FFF), st.binary(max_size=12))
transforms = st.builds(Transform, st.integers(1, 5), u16, st.lists(st.one_of(attr_tv, attr_tlv), max_size=3))
proposals = st.builds(Proposal, st.integers(1, 255), st.integers(1, 3), st.sampled_from([b"", bytes(4), bytes(8)]),
                      st.lists(transforms, max_size=5))
selectors = st.one_of(
    st.builds(TrafficSelector, st.just(7), u8, u16, u16, st.binary(min_size=4, max_size=4),
              st.binary(min_size=4, max_size=4)),
    st.builds(TrafficSelector, st.just(8), u8, u16, u16, st.binary(min_size=16, max_size=16),
              st.binary(min_size=16, max_size=16)),
)


@st.composite
def deletes(draw):
    size = draw(st.sampled_from([0, 4, 8]))
    n = draw(st.integers(0, 3)) if size else 0
    return DeletePayload(draw(st.integers(1, 3)), size, [draw(st.binary(min_size=size, max_size=size))
                                                           for _ in range(n)])


crit = st.booleans()
plain_payloads = st.one_of(
    st.builds(SaPayload, st.lists(proposals, max_size=3), critical=crit),
    st.builds(KePayload, u16, small, critical=crit),
    st.builds(NoncePayload, st.binary(min_size=16, max_size=64), critical=crit),
    st.builds(NotifyPayload, u16, small, st.integers(0, 3), st.sampled_from([b"", bytes(4), bytes(8)]), critical=crit),
    st.builds(IdPayload, st.integers(1, 11), small, st.booleans(), critical=crit),
    st.builds(AuthPayload, st.integers(1, 14), small, critical=crit),
    st.builds(EapPayload, small, critical=crit),
    deletes(),
    st.builds(VendorPayload, small, critical=crit),
    st.builds(TsPayload, st.lists(selectors, max_size=3), st.booleans(), critical=crit),
    st.builds(CpPayload, st.integers(1, 4), st.lists(st.tuples(st.integers(0, 0x7FFF), st.binary(max_size=16)),
                                                     max_size=3), critical=crit),
    st.builds(OpaquePayload, st.integers(128, 255), small, critical=crit),
)
headers = st.builds(IkeHeader, st.integers(0, 2 ** 64 - 1), st.integers(0, 2 ** 64 - 1), st.integers(34, 37),
                    st.sampled_from([0x08, 0x20, 0x28, 0x00]), st.integers(0, 2 ** 32 - 1))


@st.composite
def messages(draw):
    payloads = draw(st.lists(plain_payloads, max_size=6))
    if draw(st.booleans()):
        payloads.append(EncryptedPayload(draw(st.integers(0, 255)), draw(small)))
    return IkeMessage(draw(headers), payloads)


@settings(max_examples=300)
@given(messages())
def test_message_roundtrip(msg):
    wire = ike.serialize_message(msg)
    back = ike.parse_message(wire)
    assert back == msg
    assert ike.serialize_message(back) == wire
    assert back.header.length == len(wire)


@settings(max_examples=300)
@given(st.binary(max_size=200))
def test_parse_never_crashes(data):
    got = ike.try_parse(data)
    if isinstance(got, ike.IkeMessage):
        assert ike.serialize_message(got) == data
    else:
        assert isinstance(got, ike.IkeError)


@given(messages(), st.data())
def test_truncation_rejected(msg, data):
    wire = ike.serialize_message(msg)
    cut = data.draw(st.integers(0, len(wire) - 1))
    with pytest.raises(ike.IkeError):
        ike.parse_message(wire[:cut])


def test_header_layout():
    msg = IkeMessage(IkeHeader(1, 2, ike.ExchangeType.IKE_SA_INIT, ike.FLAG_INITIATOR, 0),
                     [NoncePayload(b"n" * 16)])
    wire = ike.serialize_message(msg)
    assert struct.unpack(">QQBBBBII", wire[:28]) == (1, 2, ike.PayloadType.NONCE, 0x20, 34, 0x08, 0, len(wire))
    assert wire[28:32] == struct.pack(">BBH", 0, 0, 20)


def test_length_override_survives():
    msg = IkeMessage(IkeHeader(1, 0, 34, 8, 0), [NoncePayload(b"n" * 16)], overrides={"length": 999})
    with pytest.raises(ike.LengthMismatch):
        ike.parse_message(ike.serialize_message(msg))


def test_bad_chain_trailing_octets():
    wire = ike.serialize_message(IkeMessage(IkeHeader(1, 0, 34, 8, 0), [NoncePayload(b"n" * 16)])) + b"xx"
    wire = wire[:24] + struct.pack(">I", len(wire)) + wire[28:]
    with pytest.raises(ike.BadChain):
        ike.parse_message(wire)


def test_malformed_known_body_kept_opaque():
    # a KE body shorter than its fixed header cannot decode
    msg = IkeMessage(IkeHeader(1, 0, 34, 8, 0), [OpaquePayload(ike.PayloadType.KE, b"\x00")])
    back = ike.parse_message(ike.serialize_message(msg))
    assert back.payloads == [OpaquePayload(ike.PayloadType.KE, b"\x00")]


def _sa(*props):
    return SaPayload([Proposal(i + 1, 1, b"", ts) for i, ts in enumerate(props)])


AES128 = Transform(TransformType.ENCR, EncrId.ENCR_AES_CBC, [(ike.ATTR_KEY_LENGTH, 128)])
STRONG = [AES128, Transform(TransformType.PRF, PrfId.PRF_HMAC_SHA1),
          Transform(TransformType.INTEG, IntegId.AUTH_HMAC_SHA1_96), Transform(TransformType.DH, DhGroupId.MODP_2048)]
WEAK = [Transform(TransformType.ENCR, EncrId.ENCR_DES), Transform(TransformType.PRF, PrfId.PRF_HMAC_MD5),
        Transform(TransformType.INTEG, IntegId.AUTH_HMAC_MD5_96), Transform(TransformType.DH, DhGroupId.MODP_768)]
POLICY = {TransformType.ENCR: {EncrId.ENCR_AES_CBC}, TransformType.PRF: {PrfId.PRF_HMAC_SHA1},
          TransformType.INTEG: {IntegId.AUTH_HMAC_SHA1_96}, TransformType.DH: {DhGroupId.MODP_2048}}


def test_select_proposal_skips_unacceptable():
    chosen = ike.select_proposal(_sa(WEAK, STRONG), POLICY)
    assert chosen.num == 2
    assert [t.id for t in chosen.transforms] == [t.id for t in STRONG]
    assert ike.select_proposal(_sa(WEAK), POLICY) is None


def test_select_proposal_checks_aes_key_length():
    aes256 = Transform(TransformType.ENCR, EncrId.ENCR_AES_CBC, [(ike.ATTR_KEY_LENGTH, 256)])
    assert ike.select_proposal(_sa([aes256] + STRONG[1:]), POLICY) is None


def test_single_choice():
    assert set(ike.single_choice(_sa(STRONG))) == set(ike.IKE_REQUIRED)
    assert ike.single_choice(_sa(STRONG, STRONG)) is None
    assert ike.single_choice(_sa(STRONG + [WEAK[0]])) is None
    assert ike.single_choice(_sa(STRONG[:3])) is None
    assert ike.single_choice(None) is None


def _init():
    return IkeMessage(IkeHeader(5, 0, 34, 8, 0),
                      [_sa(copy.deepcopy(STRONG)), KePayload(14, bytes(256)), NoncePayload(b"n" * 32)])


@pytest.mark.parametrize("path,value,check", [
    ("security_association.dh", "MODP_768", lambda m: m.payloads[0].proposals[0].transforms[3].id == 1),
    ("security_association.encr", 2, lambda m: m.payloads[0].proposals[0].transforms[0].id == 2),
    ("security_association.key_length", 256, lambda m: m.payloads[0].proposals[0].transforms[0].key_length == 256),
    ("key_exchange.group", "MODP_1024", lambda m: m.payloads[1].group == 2),
    ("nonce.data", "0x" + "00" * 16, lambda m: m.payloads[2].data == bytes(16)),
    ("header.message_id", 7, lambda m: m.header.message_id == 7),
    ("header.length", 3, lambda m: len(ike.serialize_message(m)) != 3 and ike.serialize_message(m)[24:28] == bytes(
        [0, 0, 0, 3])),
])
def test_apply_update(path, value, check):
    assert check(ike.apply_update(_init(), path, value))


def test_apply_drop_and_insert():
    m = ike.apply_drop(_init(), "key_exchange")
    assert m.find(KePayload) is None
    m = ike.apply_insert(m, "key_exchange", "MODP_768")
    assert m.find(KePayload) == KePayload(1, bytes(96))
    m = ike.apply_drop(m, "security_association.integ")
    assert not m.payloads[0].proposals[0].of_type(TransformType.INTEG)
    m = ike.apply_insert(m, "notify", "INVALID_KE_PAYLOAD")
    assert m.find(NotifyPayload).notify_type == ike.NotifyType.INVALID_KE_PAYLOAD


def test_path_errors():
    with pytest.raises(ike.UnknownAttribute):
        ike.apply_update(_init(), "no.such.path", 1)
    with pytest.raises(ike.AttributeAbsent):
        ike.apply_update(_init(), "auth.method", 2)
    with pytest.raises(ike.UnknownAttribute):
        ike.apply_drop(_init(), "header.length")


def test_eap_path_edits_inner_packet():
    vec = eap.aka_challenge(bytes(16), bytes(16), bytes(range(16)))
    m = IkeMessage(IkeHeader(1, 2, 35, 0x20, 1),
                   [EapPayload(eap.encode_eap(eap.build_challenge(3, vec, bytes(16))))])
    ike.apply_update(m, "eap.code", 4)
    assert eap.decode_eap(m.payloads[0].data).code == 4
    ike.apply_drop(m, "eap.at_mac")
    assert eap.decode_eap(m.payloads[0].data).get(eap.AkaAttr.AT_MAC) is None


@settings(max_examples=40)
@given(st.lists(plain_payloads, min_size=1, max_size=4), st.sampled_from(list(EncrId)),
       st.sampled_from(list(IntegId)), st.booleans())
def test_seal_open_roundtrip(payloads, encr, integ, initiator):
    lens = crypto.key_lengths(PrfId.PRF_HMAC_SHA1, integ, encr)
    keys = crypto.derive_ike_keys(PrfId.PRF_HMAC_SHA1, b"i" * 16, b"r" * 16, b"s", 1, 2, lens)
    algs = ike.SaAlgs(encr, PrfId.PRF_HMAC_SHA1, integ, DhGroupId.MODP_2048)
    msg = IkeMessage(IkeHeader(1, 2, 35, 0x08, 1), payloads)
    sealed = ike.seal_message(msg, keys, algs, initiator, b"seed")
    parsed = ike.parse_message(sealed.raw)
    assert ike.serialize_message(parsed) == sealed.raw
    opened = ike.open_message(parsed, keys, algs, initiator)
    assert opened.payloads == payloads
    with pytest.raises(crypto.IntegrityFailure):
        ike.open_message(parsed, keys, algs, not initiator)


def test_summarize_labels():
    m = _init()
    m.payloads.append(NotifyPayload(ike.NotifyType.INVALID_KE_PAYLOAD))
    m.payloads.append(OpaquePayload(200, b""))
    s = ike.summarize(m)
    assert s["exchange"] == "IKE_SA_INIT"
    assert s["payloads"] == ["SA", "KE", "Nonce", "N(INVALID_KE_PAYLOAD)", "?200"]


def test_hexdump_shape():
    out = ike.hexdump(os.urandom(40)).splitlines()
    assert len(out) == 3 and out[2].startswith("0020")
