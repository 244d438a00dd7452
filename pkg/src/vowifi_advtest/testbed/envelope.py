"""Controller <-> agent envelopes and their length-prefixed wire framing."""

import json
import struct

KINDS = ("command", "report", "error")
_LEN = struct.Struct(">I")
MAX_FRAME = 1 << 24


class FramingError(Exception):
    pass


def make_envelope(kind, seq, entity, body):
    if kind not in KINDS:
        raise ValueError(f"unknown envelope kind {kind!r}")
    return {"kind": kind, "seq": seq, "entity": entity, "body": body}


def _load(data):
    try:
        return json.loads(data)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FramingError(f"frame is not JSON: {exc}") from None


def encode_frame(envelope):
    data = json.dumps(envelope, sort_keys=True, separators=(",", ":")).encode()
    if len(data) > MAX_FRAME:
        raise FramingError("envelope too large")
    return _LEN.pack(len(data)) + data


def decode_frames(buf):
    """Split ``buf`` into complete envelopes; returns (envelopes, leftover bytes)."""
    out = []
    while len(buf) >= _LEN.size:
        (n,) = _LEN.unpack_from(buf)
        if n > MAX_FRAME:
            raise FramingError("frame length exceeds limit")
        if len(buf) < _LEN.size + n:
            break
        out.append(_load(buf[_LEN.size:_LEN.size + n]))
        buf = buf[_LEN.size + n:]
    return out, buf


def _recv_exact(sock, n):
    chunks = []
    while n:
        chunk = sock.recv(n)
        if not chunk:
            return None
        chunks.append(chunk)
        n -= len(chunk)
    return b"".join(chunks)


def read_frame(sock):
    """One envelope from a stream socket, or None at end of stream."""
    head = _recv_exact(sock, _LEN.size)
    if head is None:
        return None
    (n,) = _LEN.unpack(head)
    if n > MAX_FRAME:
        raise FramingError("frame length exceeds limit")
    data = _recv_exact(sock, n)
    if data is None:
        raise FramingError("stream ended inside a frame")
    return _load(data)


def write_frame(sock, envelope):
    sock.sendall(encode_frame(envelope))
