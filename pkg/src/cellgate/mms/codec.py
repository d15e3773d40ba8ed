"""Binary MMS encapsulation: the seven client-transaction PDU types.

Well-known headers are emitted as (0x80 | field id) followed by a WSP-encoded
value; the message-type header always comes first and Content-Type, when
present, is the last header before the multipart body.  Unknown headers are
preserved as opaque (tag, bytes) pairs so foreign PDUs survive a roundtrip.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Optional

from ..errors import MmsDecodeError, MmsMissingHeader, MmsTruncated, MmsUnknownType


class MmsMessageType(enum.Enum):
    SEND_REQ = 0x80
    SEND_CONF = 0x81
    NOTIFICATION_IND = 0x82
    NOTIFYRESP_IND = 0x83
    RETRIEVE_CONF = 0x84
    ACKNOWLEDGE_IND = 0x85
    DELIVERY_IND = 0x86


class MessageClass(enum.Enum):
    PERSONAL = 0x80
    ADVERTISEMENT = 0x81
    INFORMATIONAL = 0x82
    AUTO = 0x83


class MmsStatus(enum.Enum):
    # request outcome vocabulary (send-conf / retrieve-conf)
    OK = "ok"
    ERROR_UNSPECIFIED = "error-unspecified"
    ERROR_SERVICE_DENIED = "error-service-denied"
    ERROR_MESSAGE_FORMAT_CORRUPT = "error-message-format-corrupt"
    ERROR_ADDRESS_UNRESOLVED = "error-sending-address-unresolved"
    ERROR_MESSAGE_NOT_FOUND = "error-message-not-found"
    ERROR_NETWORK_PROBLEM = "error-network-problem"
    ERROR_CONTENT_NOT_ACCEPTED = "error-content-not-accepted"
    ERROR_UNSUPPORTED_MESSAGE = "error-unsupported-message"
    # message state vocabulary (notify-resp / delivery-ind)
    EXPIRED = "expired"
    RETRIEVED = "retrieved"
    REJECTED = "rejected"
    DEFERRED = "deferred"
    UNRECOGNISED = "unrecognised"


_RESPONSE_STATUS = {
    MmsStatus.OK: 0x80,
    MmsStatus.ERROR_UNSPECIFIED: 0x81,
    MmsStatus.ERROR_SERVICE_DENIED: 0x82,
    MmsStatus.ERROR_MESSAGE_FORMAT_CORRUPT: 0x83,
    MmsStatus.ERROR_ADDRESS_UNRESOLVED: 0x84,
    MmsStatus.ERROR_MESSAGE_NOT_FOUND: 0x85,
    MmsStatus.ERROR_NETWORK_PROBLEM: 0x86,
    MmsStatus.ERROR_CONTENT_NOT_ACCEPTED: 0x87,
    MmsStatus.ERROR_UNSUPPORTED_MESSAGE: 0x88,
}
_RESPONSE_STATUS_REV = {v: k for k, v in _RESPONSE_STATUS.items()}

_STATE_STATUS = {
    MmsStatus.EXPIRED: 0x80,
    MmsStatus.RETRIEVED: 0x81,
    MmsStatus.REJECTED: 0x82,
    MmsStatus.DEFERRED: 0x83,
    MmsStatus.UNRECOGNISED: 0x84,
}
_STATE_STATUS_REV = {v: k for k, v in _STATE_STATUS.items()}

# Field ids (without the 0x80 short-cut bit).
F_CONTENT_LOCATION = 0x03
F_CONTENT_TYPE = 0x04
F_DATE = 0x05
F_DELIVERY_REPORT = 0x06
F_EXPIRY = 0x08
F_FROM = 0x09
F_MESSAGE_CLASS = 0x0A
F_MESSAGE_ID = 0x0B
F_MESSAGE_TYPE = 0x0C
F_VERSION = 0x0D
F_MESSAGE_SIZE = 0x0E
F_REPORT_ALLOWED = 0x11
F_RESPONSE_STATUS = 0x12
F_STATUS = 0x15
F_SUBJECT = 0x16
F_TO = 0x17
F_TRANSACTION_ID = 0x18
F_RETRIEVE_STATUS = 0x19

_WELL_KNOWN_CONTENT_TYPES = {
    "text/plain": 0x03,
    "application/vnd.wap.multipart.mixed": 0x23,
    "application/vnd.wap.multipart.related": 0x33,
}
_WELL_KNOWN_CONTENT_TYPES_REV = {v: k for k, v in _WELL_KNOWN_CONTENT_TYPES.items()}

MULTIPART_MIXED = "application/vnd.wap.multipart.mixed"
INSERT_ADDRESS_TOKEN = 0x81
ADDRESS_PRESENT_TOKEN = 0x80


@dataclass(frozen=True)
class MmsPart:
    content_type: str
    payload: bytes
    content_id: Optional[str] = None


@dataclass(frozen=True)
class MmsBody:
    content_type: str = MULTIPART_MIXED
    parts: "tuple[MmsPart, ...]" = ()


@dataclass(frozen=True)
class MmsHeaders:
    transaction_id: Optional[str] = None
    message_id: Optional[str] = None
    version: "tuple[int, int]" = (1, 2)
    from_: Optional[str] = None
    to: "tuple[str, ...]" = ()
    subject: Optional[str] = None
    message_class: Optional[MessageClass] = None
    expiry: Optional[int] = None  # relative seconds
    content_location: Optional[str] = None
    status: Optional[MmsStatus] = None
    message_size: Optional[int] = None
    date: Optional[int] = None  # unix seconds
    delivery_report: Optional[bool] = None
    report_allowed: Optional[bool] = None
    extra: "tuple[tuple[int, bytes], ...]" = ()


# --- WSP primitive encoders ---------------------------------------------------

def _uintvar(value: int) -> bytes:
    out = bytearray([value & 0x7F])
    value >>= 7
    while value:
        out.insert(0, 0x80 | (value & 0x7F))
        value >>= 7
    return bytes(out)


def _short_int(value: int) -> bytes:
    return bytes([0x80 | (value & 0x7F)])


def _long_int(value: int) -> bytes:
    octets = bytearray()
    while value:
        octets.insert(0, value & 0xFF)
        value >>= 8
    if not octets:
        octets.append(0)
    return bytes([len(octets)]) + bytes(octets)


def _text_string(value: str) -> bytes:
    raw = value.encode("utf-8")
    quote = b"\x7f" if raw and raw[0] >= 0x80 else b""
    return quote + raw + b"\x00"


def _value_length(length: int) -> bytes:
    if length < 31:
        return bytes([length])
    return bytes([31]) + _uintvar(length)


def _encode_expiry(seconds: int) -> bytes:
    inner = bytes([0x81]) + _long_int(seconds)  # relative token
    return _value_length(len(inner)) + inner


def _encode_from(sender: Optional[str]) -> bytes:
    if sender is None:
        inner = bytes([INSERT_ADDRESS_TOKEN])
    else:
        inner = bytes([ADDRESS_PRESENT_TOKEN]) + _text_string(sender)
    return _value_length(len(inner)) + inner


def _encode_content_type(content_type: str) -> bytes:
    known = _WELL_KNOWN_CONTENT_TYPES.get(content_type)
    if known is not None:
        return _short_int(known)
    return _text_string(content_type)


# --- WSP primitive decoders ----------------------------------------------------

class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def eof(self) -> bool:
        return self.pos >= len(self.data)

    def peek(self) -> int:
        if self.eof():
            raise MmsTruncated("unexpected end of PDU")
        return self.data[self.pos]

    def byte(self) -> int:
        value = self.peek()
        self.pos += 1
        return value

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise MmsTruncated("unexpected end of PDU")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def uintvar(self) -> int:
        value = 0
        for _ in range(5):
            b = self.byte()
            value = (value << 7) | (b & 0x7F)
            if not b & 0x80:
                return value
        raise MmsDecodeError("uintvar too long")

    def text_string(self) -> str:
        if self.peek() == 0x7F:
            self.byte()
        end = self.data.find(b"\x00", self.pos)
        if end < 0:
            raise MmsTruncated("unterminated text string")
        raw = self.data[self.pos:end]
        self.pos = end + 1
        return raw.decode("utf-8", errors="replace")

    def long_int(self) -> int:
        n = self.byte()
        if n > 30:
            raise MmsDecodeError("long-integer length out of range")
        value = 0
        for b in self.take(n):
            value = (value << 8) | b
        return value

    def value_length(self) -> int:
        first = self.byte()
        if first < 31:
            return first
        if first == 31:
            return self.uintvar()
        raise MmsDecodeError("expected value-length")

    def field_value_raw(self) -> bytes:
        """Consume one header value of unknown meaning, returning its bytes."""
        start = self.pos
        first = self.peek()
        if first <= 30:
            self.byte()
            self.take(first)
        elif first == 31:
            self.byte()
            n = self.uintvar()
            self.take(n)
        elif first <= 127:
            self.text_string()
        else:
            self.byte()
        return self.data[start:self.pos]

    def content_type(self) -> str:
        first = self.peek()
        if first >= 0x80:
            code = self.byte() & 0x7F
            return _WELL_KNOWN_CONTENT_TYPES_REV.get(code, f"application/x-wap-0x{code:02X}")
        if first <= 31:
            length = self.value_length()
            end = self.pos + length
            if end > len(self.data):
                raise MmsTruncated("content-type value")
            inner = _Reader(self.data[self.pos:end])
            self.pos = end
            media_first = inner.peek()
            if media_first >= 0x80:
                code = inner.byte() & 0x7F
                return _WELL_KNOWN_CONTENT_TYPES_REV.get(code, f"application/x-wap-0x{code:02X}")
            return inner.text_string()  # parameters, if any, are skipped
        return self.text_string()


# --- PDU encode ----------------------------------------------------------------

_MANDATORY = {
    MmsMessageType.SEND_REQ: ("transaction_id", "to", "body"),
    MmsMessageType.SEND_CONF: ("transaction_id", "status"),
    MmsMessageType.NOTIFICATION_IND: ("transaction_id", "message_class", "message_size", "expiry", "content_location"),
    MmsMessageType.NOTIFYRESP_IND: ("transaction_id", "status"),
    MmsMessageType.RETRIEVE_CONF: ("body",),
    MmsMessageType.ACKNOWLEDGE_IND: ("transaction_id",),
    MmsMessageType.DELIVERY_IND: ("message_id", "to", "date", "status"),
}

_STATE_STATUS_TYPES = (MmsMessageType.NOTIFYRESP_IND, MmsMessageType.DELIVERY_IND)


def validate_mandatory(mtype: MmsMessageType, headers: MmsHeaders, body: Optional[MmsBody]) -> None:
    for name in _MANDATORY[mtype]:
        if name == "body":
            if body is None:
                raise MmsMissingHeader("content-type")
            continue
        value = getattr(headers, name)
        if value is None or value == ():
            raise MmsMissingHeader(name)


def _encode_status(mtype: MmsMessageType, status: MmsStatus) -> bytes:
    if mtype in _STATE_STATUS_TYPES:
        return bytes([0x80 | F_STATUS, _STATE_STATUS[status]])
    if mtype is MmsMessageType.RETRIEVE_CONF:
        return bytes([0x80 | F_RETRIEVE_STATUS, _RESPONSE_STATUS[status]])
    return bytes([0x80 | F_RESPONSE_STATUS, _RESPONSE_STATUS[status]])


def encode_pdu(mtype: MmsMessageType, headers: MmsHeaders, body: Optional[MmsBody] = None) -> bytes:
    """Encode one PDU; raises MmsMissingHeader if the per-type mandatory
    header set is not satisfied."""
    validate_mandatory(mtype, headers, body)
    out = bytearray()
    out += bytes([0x80 | F_MESSAGE_TYPE, mtype.value])
    if headers.transaction_id is not None:
        out += bytes([0x80 | F_TRANSACTION_ID]) + _text_string(headers.transaction_id)
    major, minor = headers.version
    out += bytes([0x80 | F_VERSION]) + _short_int(((major & 0x07) << 4) | (minor & 0x0F))
    if headers.date is not None:
        out += bytes([0x80 | F_DATE]) + _long_int(headers.date)
    if mtype is MmsMessageType.SEND_REQ or headers.from_ is not None:
        out += bytes([0x80 | F_FROM]) + _encode_from(headers.from_)
    for recipient in headers.to:
        out += bytes([0x80 | F_TO]) + _text_string(recipient)
    if headers.subject is not None:
        out += bytes([0x80 | F_SUBJECT]) + _text_string(headers.subject)
    if headers.message_class is not None:
        out += bytes([0x80 | F_MESSAGE_CLASS, headers.message_class.value])
    if headers.message_id is not None:
        out += bytes([0x80 | F_MESSAGE_ID]) + _text_string(headers.message_id)
    if headers.message_size is not None:
        out += bytes([0x80 | F_MESSAGE_SIZE]) + _long_int(headers.message_size)
    if headers.expiry is not None:
        out += bytes([0x80 | F_EXPIRY]) + _encode_expiry(headers.expiry)
    if headers.content_location is not None:
        out += bytes([0x80 | F_CONTENT_LOCATION]) + _text_string(headers.content_location)
    if headers.delivery_report is not None:
        out += bytes([0x80 | F_DELIVERY_REPORT, 0x80 if headers.delivery_report else 0x81])
    if headers.report_allowed is not None:
        out += bytes([0x80 | F_REPORT_ALLOWED, 0x80 if headers.report_allowed else 0x81])
    if headers.status is not None:
        out += _encode_status(mtype, headers.status)
    for tag, raw in headers.extra:
        out += bytes([0x80 | (tag & 0x7F)]) + raw
    if body is not None:
        out += bytes([0x80 | F_CONTENT_TYPE]) + _encode_content_type(body.content_type)
        out += _encode_body(body)
    return bytes(out)


def _encode_body(body: MmsBody) -> bytes:
    if not body.content_type.startswith("application/vnd.wap.multipart"):
        return body.parts[0].payload if body.parts else b""
    out = bytearray(_uintvar(len(body.parts)))
    for part in body.parts:
        part_headers = bytearray(_encode_content_type(part.content_type))
        if part.content_id is not None:
            part_headers += _text_string("Content-ID")
            part_headers += _text_string(part.content_id)
        out += _uintvar(len(part_headers))
        out += _uintvar(len(part.payload))
        out += part_headers
        out += part.payload
    return bytes(out)


# --- PDU decode ------------------------------------------------------------------

def decode_pdu(data: bytes) -> "tuple[MmsMessageType, MmsHeaders, Optional[MmsBody]]":
    """Inverse of encode_pdu; unknown headers land in headers.extra."""
    if not data:
        raise MmsTruncated("empty PDU")
    reader = _Reader(data)
    first = reader.byte()
    if first != (0x80 | F_MESSAGE_TYPE):
        raise MmsUnknownType(f"first header is 0x{first:02X}, not message-type")
    type_octet = reader.byte()
    try:
        mtype = MmsMessageType(type_octet)
    except ValueError:
        raise MmsUnknownType(f"unknown message type 0x{type_octet:02X}") from None

    headers = MmsHeaders(version=(0, 0))
    body: Optional[MmsBody] = None
    to: "list[str]" = []
    extra: "list[tuple[int, bytes]]" = []

    while not reader.eof():
        tag_octet = reader.byte()
        if tag_octet < 0x80:
            # text-mode header name: not produced by this encoder; skip its value
            reader.pos -= 1
            reader.text_string()
            reader.field_value_raw()
            continue
        tag = tag_octet & 0x7F
        if tag == F_CONTENT_TYPE:
            content_type = reader.content_type()
            body = _decode_body(reader, content_type)
            break
        headers = _decode_header(reader, mtype, tag, headers, to, extra)

    headers = replace(headers, to=tuple(to), extra=tuple(extra))
    return mtype, headers, body


def _decode_header(
    reader: _Reader,
    mtype: MmsMessageType,
    tag: int,
    headers: MmsHeaders,
    to: "list[str]",
    extra: "list[tuple[int, bytes]]",
) -> MmsHeaders:
    if tag == F_TRANSACTION_ID:
        return replace(headers, transaction_id=reader.text_string())
    if tag == F_VERSION:
        octet = reader.byte() & 0x7F
        return replace(headers, version=((octet >> 4) & 0x07, octet & 0x0F))
    if tag == F_DATE:
        return replace(headers, date=reader.long_int())
    if tag == F_FROM:
        length = reader.value_length()
        end = reader.pos + length
        token = reader.byte()
        if token == ADDRESS_PRESENT_TOKEN:
            sender = reader.text_string()
        else:
            sender = None
        reader.pos = end
        return replace(headers, from_=sender)
    if tag == F_TO:
        to.append(reader.text_string())
        return headers
    if tag == F_SUBJECT:
        return replace(headers, subject=reader.text_string())
    if tag == F_MESSAGE_CLASS:
        octet = reader.peek()
        if octet >= 0x80:
            reader.byte()
            try:
                return replace(headers, message_class=MessageClass(octet))
            except ValueError:
                return headers
        reader.text_string()
        return headers
    if tag == F_MESSAGE_ID:
        return replace(headers, message_id=reader.text_string())
    if tag == F_MESSAGE_SIZE:
        return replace(headers, message_size=reader.long_int())
    if tag == F_EXPIRY:
        length = reader.value_length()
        end = reader.pos + length
        reader.byte()  # relative/absolute token; this client treats both as seconds
        value = reader.long_int()
        reader.pos = end
        return replace(headers, expiry=value)
    if tag == F_CONTENT_LOCATION:
        return replace(headers, content_location=reader.text_string())
    if tag == F_DELIVERY_REPORT:
        return replace(headers, delivery_report=reader.byte() == 0x80)
    if tag == F_REPORT_ALLOWED:
        return replace(headers, report_allowed=reader.byte() == 0x80)
    if tag == F_STATUS:
        code = reader.byte()
        return replace(headers, status=_STATE_STATUS_REV.get(code, MmsStatus.UNRECOGNISED))
    if tag in (F_RESPONSE_STATUS, F_RETRIEVE_STATUS):
        code = reader.byte()
        return replace(headers, status=_RESPONSE_STATUS_REV.get(code, MmsStatus.ERROR_UNSPECIFIED))
    extra.append((tag, reader.field_value_raw()))
    return headers


def _decode_body(reader: _Reader, content_type: str) -> MmsBody:
    if not content_type.startswith("application/vnd.wap.multipart"):
        payload = reader.data[reader.pos:]
        reader.pos = len(reader.data)
        return MmsBody(content_type=content_type, parts=(MmsPart(content_type, payload),))
    count = reader.uintvar()
    parts = []
    for _ in range(count):
        headers_len = reader.uintvar()
        data_len = reader.uintvar()
        headers_end = reader.pos + headers_len
        if headers_end > len(reader.data):
            raise MmsTruncated("part headers")
        part_ct = reader.content_type()
        content_id = None
        while reader.pos < headers_end:
            name = reader.text_string()
            value = reader.text_string()
            if name.lower() == "content-id":
                content_id = value
        reader.pos = headers_end
        payload = reader.take(data_len)
        parts.append(MmsPart(content_type=part_ct, payload=payload, content_id=content_id))
    return MmsBody(content_type=content_type, parts=tuple(parts))
