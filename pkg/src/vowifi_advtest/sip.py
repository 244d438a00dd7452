"""SIP codec for the IMS registration exchange (REGISTER / 401 / 200).

Headers keep their wire order and spelling so that sample traffic
round-trips byte for byte. Content-Length is recomputed on serialization.
"""

import base64
import hashlib
import re
from dataclasses import dataclass, field

from .values import InvalidValue, to_int, to_text

SIP_VERSION = "SIP/2.0"
CRLF = "\r\n"


class SipError(Exception):
    pass


class MalformedStartLine(SipError):
    pass


class MissingSeparator(SipError):
    pass


class HeaderSyntax(SipError):
    pass


class UnsupportedAlgorithm(SipError):
    pass


class UnknownAttribute(SipError):
    pass


class AttributeAbsent(SipError):
    pass


@dataclass
class RequestLine:
    method: str
    uri: str


@dataclass
class StatusLine:
    code: int
    reason: str


@dataclass
class SipMessage:
    start: object
    headers: list = field(default_factory=list)
    body: bytes = b""

    @property
    def is_request(self):
        return isinstance(self.start, RequestLine)

    @property
    def status(self):
        return None if self.is_request else self.start.code

    def get(self, name):
        lname = name.lower()
        for n, v in self.headers:
            if n.lower() == lname:
                return v
        return None

    def get_all(self, name):
        lname = name.lower()
        return [v for n, v in self.headers if n.lower() == lname]

    def set(self, name, value):
        lname = name.lower()
        for i, (n, _v) in enumerate(self.headers):
            if n.lower() == lname:
                self.headers[i] = (n, value)
                return
        self.headers.append((name, value))

    def remove(self, name):
        lname = name.lower()
        self.headers = [(n, v) for n, v in self.headers if n.lower() != lname]

    def cseq(self):
        value = self.get("CSeq")
        if not value:
            return None, None
        parts = value.split()
        try:
            return int(parts[0]), parts[1] if len(parts) > 1 else None
        except ValueError:
            return None, None


_TOKEN = re.compile(r"^[A-Za-z0-9.!%*_+`'~-]+$")


def _parse_start(line):
    if line.startswith(SIP_VERSION + " "):
        parts = line.split(" ", 2)
        if len(parts) < 2 or not parts[1].isdigit() or len(parts[1]) != 3:
            raise MalformedStartLine(f"bad status line {line!r}")
        return StatusLine(int(parts[1]), parts[2] if len(parts) == 3 else "")
    parts = line.split(" ")
    if len(parts) != 3 or parts[2] != SIP_VERSION or not _TOKEN.match(parts[0]) or not parts[1]:
        raise MalformedStartLine(f"bad request line {line!r}")
    return RequestLine(parts[0], parts[1])


def parse_sip(data):
    data = bytes(data)
    head, sep, body = data.partition(b"\r\n\r\n")
    if not sep:
        raise MissingSeparator("no blank line between headers and body")
    try:
        text = head.decode("utf-8")
    except UnicodeDecodeError:
        raise MalformedStartLine("header section is not UTF-8") from None
    lines = text.split(CRLF)
    start = _parse_start(lines[0])
    headers = []
    for line in lines[1:]:
        name, colon, value = line.partition(":")
        if not colon or not name or not _TOKEN.match(name):
            raise HeaderSyntax(f"bad header line {line!r}")
        headers.append((name, value.strip()))
    return SipMessage(start, headers, body)


def try_parse(data):
    try:
        return parse_sip(data)
    except SipError as exc:
        return exc


def serialize_sip(msg):
    if isinstance(msg.start, RequestLine):
        first = f"{msg.start.method} {msg.start.uri} {SIP_VERSION}"
    else:
        first = f"{SIP_VERSION} {msg.start.code} {msg.start.reason}"
    headers = list(msg.headers)
    clen = str(len(msg.body))
    for i, (n, _v) in enumerate(headers):
        if n.lower() in ("content-length", "l"):
            headers[i] = (n, clen)
            break
    else:
        headers.append(("Content-Length", clen))
    lines = [first] + [f"{n}: {v}" for n, v in headers]
    return (CRLF.join(lines) + CRLF + CRLF).encode() + msg.body


# -- structured header values -------------------------------------------------

@dataclass
class AuthChallenge:
    scheme: str = "Digest"
    params: dict = field(default_factory=dict)

    @property
    def algorithm(self):
        return self.params.get("algorithm", "MD5")


_PARAM = re.compile(r'\s*([A-Za-z0-9_-]+)\s*=\s*("(?:[^"\\]|\\.)*"|[^,\s]*)\s*(,|$)')
_QUOTED = {"realm", "nonce", "qop", "opaque", "username", "uri", "response", "cnonce", "domain"}


def parse_challenge(value):
    scheme, _sp, rest = value.strip().partition(" ")
    if not scheme:
        raise HeaderSyntax("empty authentication header")
    params = {}
    pos = 0
    rest = rest.strip()
    while pos < len(rest):
        m = _PARAM.match(rest, pos)
        if not m:
            raise HeaderSyntax(f"bad auth parameter near {rest[pos:]!r}")
        key, val = m.group(1), m.group(2)
        if val.startswith('"'):
            val = val[1:-1]
        params[key] = val
        pos = m.end()
    return AuthChallenge(scheme, params)


def format_challenge(ch):
    parts = []
    for k, v in ch.params.items():
        parts.append(f'{k}="{v}"' if k in _QUOTED else f"{k}={v}")
    return f"{ch.scheme} " + ", ".join(parts)


@dataclass
class SecurityMechanism:
    mechanism: str
    params: dict = field(default_factory=dict)

    @property
    def ealg(self):
        return self.params.get("ealg", "null")

    @property
    def alg(self):
        return self.params.get("alg")


def parse_security(value):
    mechs = []
    for item in value.split(","):
        item = item.strip()
        if not item:
            continue
        name, *params = [x.strip() for x in item.split(";")]
        pd = {}
        for p in params:
            k, eq, v = p.partition("=")
            if not eq or not k:
                raise HeaderSyntax(f"bad security parameter {p!r}")
            pd[k.strip()] = v.strip()
        mechs.append(SecurityMechanism(name, pd))
    return mechs


def format_security(mechs):
    out = []
    for m in mechs:
        out.append("; ".join([m.mechanism] + [f"{k}={v}" for k, v in m.params.items()]))
    return ", ".join(out)


# -- digest -------------------------------------------------------------------

DEFAULT_ALGORITHMS = frozenset({"MD5", "AKAv1-MD5"})


def _md5_hex(data):
    return hashlib.md5(data).hexdigest()


def _b(x):
    return x if isinstance(x, bytes) else str(x).encode()


def compute_digest(algorithm, username, realm, nonce, method, uri, secret, allowed=DEFAULT_ALGORITHMS):
    """RFC 2617 digest response without qop: MD5(HA1:nonce:HA2).

    For AKAv1-MD5 the password is the AKA RES octets.
    """
    if algorithm not in allowed or algorithm not in DEFAULT_ALGORITHMS:
        raise UnsupportedAlgorithm(f"digest algorithm {algorithm!r} not supported")
    ha1 = _md5_hex(_b(username) + b":" + _b(realm) + b":" + _b(secret))
    ha2 = _md5_hex(_b(method) + b":" + _b(uri))
    return _md5_hex(f"{ha1}:{nonce}:{ha2}".encode())


def aka_nonce(rand, autn, server_data=b""):
    return base64.b64encode(rand + autn + server_data).decode()


def split_aka_nonce(nonce):
    """(RAND, AUTN) from an AKA digest nonce, or None if it does not decode."""
    try:
        raw = base64.b64decode(nonce, validate=True)
    except (ValueError, TypeError):
        return None
    if len(raw) < 32:
        return None
    return raw[:16], raw[16:32]


# -- builders -----------------------------------------------------------------

def _base_headers(identity, domain, call_id, cseq, method="REGISTER"):
    return [
        ("Via", f"SIP/2.0/UDP [fd00::2]:5060;branch=z9hG4bK{cseq:04d}{call_id[:8]}"),
        ("Max-Forwards", "70"),
        ("From", f"<sip:{identity}>;tag={call_id[:6]}"),
        ("To", f"<sip:{identity}>"),
        ("Call-ID", call_id),
        ("CSeq", f"{cseq} {method}"),
    ]


def build_register(identity, challenge=None, sec_client=(), *, domain, call_id, cseq=1,
                   second=False, response=None, security_verify=None, contact="sip:ue@[fd00::2]:5060"):
    """REGISTER request; the second one must carry a digest ``response`` to ``challenge``."""
    if second and challenge is None:
        raise ValueError("second REGISTER needs the challenge it answers")
    uri = f"sip:{domain}"
    headers = _base_headers(identity, domain, call_id, cseq)
    headers.append(("Contact", f"<{contact}>;expires=600000"))
    if second:
        params = {
            "username": identity,
            "realm": challenge.params.get("realm", ""),
            "nonce": challenge.params.get("nonce", ""),
            "uri": uri,
            "response": response or "",
            "algorithm": challenge.algorithm,
        }
        headers.append(("Authorization", format_challenge(AuthChallenge("Digest", params))))
    else:
        params = {"username": identity, "realm": domain, "nonce": "", "uri": uri, "response": ""}
        headers.append(("Authorization", format_challenge(AuthChallenge("Digest", params))))
    headers.append(("Security-Client", format_security(sec_client)))
    if security_verify:
        headers.append(("Security-Verify", format_security(security_verify)))
    headers += [("Require", "sec-agree"), ("Proxy-Require", "sec-agree"), ("Supported", "path"),
                ("Expires", "600000"), ("Content-Length", "0")]
    return SipMessage(RequestLine("REGISTER", uri), headers)


_REASONS = {200: "OK", 401: "Unauthorized", 403: "Forbidden", 420: "Bad Extension",
            494: "Security Agreement Required", 500: "Server Internal Error", 503: "Service Unavailable"}


def reason_phrase(code):
    return _REASONS.get(code, "Response")


def build_response(request, code, extra=()):
    copied = [(n, v) for n, v in request.headers if n.lower() in ("via", "from", "to", "call-id", "cseq")]
    headers = copied + list(extra) + [("Content-Length", "0")]
    return SipMessage(StatusLine(code, reason_phrase(code)), headers)


# -- attribute paths ----------------------------------------------------------

SIP_VOCABULARY = frozenset({
    "status.code", "status.reason", "request.method", "request.uri",
    "www_authenticate", "www_authenticate.algorithm", "www_authenticate.nonce",
    "www_authenticate.realm", "www_authenticate.qop",
    "security_server", "security_server.ealg", "security_server.alg", "security_server.mechanism",
    "contact", "contact.expires", "p_associated_uri", "service_route", "call_id", "cseq", "via",
})


def _header_name(root):
    return {"www_authenticate": "WWW-Authenticate", "security_server": "Security-Server",
            "contact": "Contact", "p_associated_uri": "P-Associated-URI", "service_route": "Service-Route",
            "call_id": "Call-ID", "cseq": "CSeq", "via": "Via"}[root]


def _require_header(msg, root):
    value = msg.get(_header_name(root))
    if value is None:
        raise AttributeAbsent(f"{root}: header not present")
    return value


def apply_update(msg, path, value):
    if path not in SIP_VOCABULARY:
        raise UnknownAttribute(f"unknown SIP attribute {path!r}")
    root, _dot, leaf = path.partition(".")
    if root == "status":
        if msg.is_request:
            raise AttributeAbsent("request has no status line")
        if leaf == "code":
            code = to_int(value, 2)
            if not 100 <= code <= 699:
                raise InvalidValue(f"status code {code} out of range")
            msg.start = StatusLine(code, reason_phrase(code))
        else:
            msg.start = StatusLine(msg.start.code, to_text(value))
    elif root == "request":
        if not msg.is_request:
            raise AttributeAbsent("response has no request line")
        setattr(msg.start, leaf, to_text(value))
    elif root == "www_authenticate" and leaf:
        ch = parse_challenge(_require_header(msg, root))
        ch.params[leaf] = to_text(value)
        msg.set("WWW-Authenticate", format_challenge(ch))
    elif root == "security_server" and leaf:
        mechs = parse_security(_require_header(msg, root))
        if not mechs:
            raise AttributeAbsent("security_server: no mechanism")
        if leaf == "mechanism":
            mechs[0].mechanism = to_text(value)
        else:
            mechs[0].params[leaf] = to_text(value)
        msg.set("Security-Server", format_security(mechs))
    elif root == "contact" and leaf == "expires":
        contact = _require_header(msg, root)
        base = re.sub(r";\s*expires=[^;,]*", "", contact)
        msg.set("Contact", f"{base};expires={to_int(value, 4)}")
    else:
        _require_header(msg, root)
        msg.set(_header_name(root), to_text(value))
    return msg


def apply_drop(msg, path):
    if path not in SIP_VOCABULARY:
        raise UnknownAttribute(f"unknown SIP attribute {path!r}")
    root, _dot, leaf = path.partition(".")
    if root in ("status", "request"):
        raise UnknownAttribute(f"{path!r} cannot be dropped")
    if not leaf:
        _require_header(msg, root)
        msg.remove(_header_name(root))
    elif root == "www_authenticate":
        ch = parse_challenge(_require_header(msg, root))
        if leaf not in ch.params:
            raise AttributeAbsent(f"{path}: parameter not present")
        del ch.params[leaf]
        msg.set("WWW-Authenticate", format_challenge(ch))
    elif root == "security_server":
        mechs = parse_security(_require_header(msg, root))
        for m in mechs:
            m.params.pop(leaf, None)
        msg.set("Security-Server", format_security(mechs))
    elif root == "contact":
        msg.set("Contact", re.sub(r";\s*expires=[^;,]*", "", _require_header(msg, root)))
    else:
        raise UnknownAttribute(f"{path!r} cannot be dropped")
    return msg


def apply_insert(msg, path, value=None):
    if path not in SIP_VOCABULARY or "." in path:
        raise UnknownAttribute(f"{path!r} cannot be inserted")
    msg.headers.insert(len(msg.headers) - 1 if msg.headers else 0,
                       (_header_name(path), to_text(value) if value is not None else ""))
    return msg


def summarize(msg):
    if msg.is_request:
        return {"method": msg.start.method, "cseq": msg.cseq()[0]}
    return {"status": msg.start.code, "cseq": msg.cseq()[0]}
