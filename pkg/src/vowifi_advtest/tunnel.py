"""Sealed UE <-> ePDG channel that carries SIP once the IKE SA is up.

Keys come from KEYMAT = prf+(SK_d, Ni | Nr), split in RFC 7296 order. The
packet format (SPI, sequence number, sealed blob) is a stand-in for ESP.
"""

import struct
from collections import namedtuple

from . import crypto

ChildKeys = namedtuple("ChildKeys", "sk_ei sk_ai sk_er sk_ar")


def derive_child_keys(algs, sk_d, ni, nr):
    e = crypto.encr_key_len(algs.encr)
    a = crypto.integ_key_len(algs.integ)
    km = crypto.prf_plus(algs.prf, sk_d, ni + nr, 2 * e + 2 * a)
    return ChildKeys(km[:e], km[e:e + a], km[e + a:2 * e + a], km[2 * e + a:])


class Tunnel:
    def __init__(self, algs, keys, initiator, spi=0x1000):
        self.algs = algs
        self.keys = keys
        self.initiator = initiator
        self.spi = spi
        self.seq = 0

    def _send_keys(self):
        k = self.keys
        return (k.sk_ei, k.sk_ai) if self.initiator else (k.sk_er, k.sk_ar)

    def _recv_keys(self):
        k = self.keys
        return (k.sk_er, k.sk_ar) if self.initiator else (k.sk_ei, k.sk_ai)

    def seal(self, data):
        self.seq += 1
        head = struct.pack(">II", self.spi, self.seq)
        sk_e, sk_a = self._send_keys()
        return head + crypto.seal(self.algs.encr, self.algs.integ, sk_e, sk_a, data, head, aad=head)

    def open(self, packet):
        if len(packet) < 8:
            raise crypto.BadPadding("tunnel packet too short")
        head = packet[:8]
        sk_e, sk_a = self._recv_keys()
        return crypto.unseal(self.algs.encr, self.algs.integ, sk_e, sk_a, packet[8:], aad=head)
