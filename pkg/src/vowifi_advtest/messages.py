"""Catalog of the messages in the Wi-Fi calling registration flow.

Each entry names the sending entity, the protocol, and the attribute paths
that make sense to mutate in that message.
"""

from collections import namedtuple

from . import ike, sip

UE = "ue"
EPDG = "epdg"
IMS = "ims"
ENTITIES = (UE, EPDG, IMS)
NETWORK_ENTITIES = (EPDG, IMS)

MessageInfo = namedtuple("MessageInfo", "name sender protocol vocabulary")

_IKE_HEADER = (
    "header.version", "header.exchange_type", "header.flags", "header.message_id",
    "header.length", "header.next_payload", "header.spi_i", "header.spi_r",
)

_CATALOG = [
    MessageInfo("ike_sa_init_request", UE, "ike", ()),
    MessageInfo("ike_sa_init_response", EPDG, "ike", _IKE_HEADER + (
        "security_association", "security_association.encr", "security_association.integ",
        "security_association.prf", "security_association.dh", "security_association.key_length",
        "key_exchange", "key_exchange.group", "key_exchange.data", "nonce", "nonce.data",
        "notify", "notify.type", "notify.data", "vendor_id",
    )),
    MessageInfo("ike_auth_request", UE, "ike", ()),
    MessageInfo("eap_aka_challenge", EPDG, "ike", _IKE_HEADER + (
        "identity_r", "identity_r.id_type", "identity_r.data", "eap", "eap.code", "eap.identifier",
        "eap.type", "eap.subtype", "eap.at_rand", "eap.at_autn", "eap.at_mac", "notify", "vendor_id",
    )),
    MessageInfo("eap_aka_response", UE, "ike", ()),
    MessageInfo("eap_success", EPDG, "ike", _IKE_HEADER + (
        "eap", "eap.code", "eap.identifier", "auth", "auth.method", "auth.data",
        "configuration", "configuration.cfg_type", "security_association",
        "traffic_selector_i", "traffic_selector_r", "notify", "vendor_id",
    )),
    MessageInfo("sip_register", UE, "sip", ()),
    MessageInfo("401_unauthorized", IMS, "sip", (
        "status.code", "status.reason", "www_authenticate", "www_authenticate.algorithm",
        "www_authenticate.nonce", "www_authenticate.realm", "www_authenticate.qop",
        "security_server", "security_server.ealg", "security_server.alg", "security_server.mechanism",
        "call_id", "cseq", "via",
    )),
    MessageInfo("sip_register_auth", UE, "sip", ()),
    MessageInfo("200_ok", IMS, "sip", (
        "status.code", "status.reason", "contact", "contact.expires", "p_associated_uri",
        "service_route", "call_id", "cseq", "via",
    )),
]

MESSAGES = {m.name: m for m in _CATALOG}
MESSAGE_ORDER = [m.name for m in _CATALOG]

for _m in _CATALOG:
    _vocab = ike.IKE_VOCABULARY if _m.protocol == "ike" else sip.SIP_VOCABULARY
    assert set(_m.vocabulary) <= _vocab, _m.name

# UE messages that report a failure back to the network
NEGATIVE_UE_MESSAGES = frozenset({"ike_error_notify", "ike_delete", "eap_aka_reject", "eap_client_error"})


def info(name):
    return MESSAGES[name]


def sender_of(name):
    return MESSAGES[name].sender


def protocol_of(name):
    return MESSAGES[name].protocol


def vocabulary(name):
    return frozenset(MESSAGES[name].vocabulary)


def codec_vocabulary(protocol):
    return ike.IKE_VOCABULARY if protocol == "ike" else sip.SIP_VOCABULARY


def network_messages(entity=None):
    return [m.name for m in _CATALOG if m.sender != UE and (entity is None or m.sender == entity)]
