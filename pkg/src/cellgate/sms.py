"""SMS TPDU codec: GSM 7-bit septet packing, UCS-2, semi-octet addresses,
SUBMIT/DELIVER encode/decode and concatenation segmenting.

All functions are pure.  PDU hex strings are uppercase without separators,
exactly as exchanged after the '>' prompt.  The leading service-center
address is always encoded as 00 (use the SIM-stored SMSC).
"""

from __future__ import annotations

import enum
import itertools
import threading
from dataclasses import dataclass
from typing import Optional

from .errors import (
    BadHex,
    InvalidDigit,
    LengthMismatch,
    MessageTooLong,
    SmsCodecError,
    TruncatedPdu,
    UnmappableCharacter,
    UnsupportedDcs,
)

# GSM 03.38 default alphabet; string index == septet code.
GSM7_BASIC = (
    "@£$¥èéùìòÇ\nØø\rÅåΔ_ΦΓΛΩΠΨΣΘΞ\x1bÆæßÉ"
    " !\"#¤%&'()*+,-./0123456789:;<=>?"
    "¡ABCDEFGHIJKLMNOPQRSTUVWXYZÄÖÑÜ§"
    "¿abcdefghijklmnopqrstuvwxyzäöñüà"
)
GSM7_EXT = {
    0x0A: "\x0c",
    0x14: "^",
    0x28: "{",
    0x29: "}",
    0x2F: "\\",
    0x3C: "[",
    0x3D: "~",
    0x3E: "]",
    0x40: "|",
    0x65: "€",
}
_ESCAPE = 0x1B
_ENC_BASIC = {ch: i for i, ch in enumerate(GSM7_BASIC) if i != _ESCAPE}
_ENC_EXT = {ch: code for code, ch in GSM7_EXT.items()}

SEPTETS_PER_MESSAGE = 160
UCS2_UNITS_PER_MESSAGE = 70
OCTETS_PER_MESSAGE = 140
# Capacities with a 6-octet concatenation header in the user data.
SEPTETS_PER_SEGMENT = 153
UCS2_UNITS_PER_SEGMENT = 67

MAX_TPDU_OCTETS = 175


class Ton(enum.Enum):
    UNKNOWN = 0
    INTERNATIONAL = 1
    NATIONAL = 2
    ALPHANUMERIC = 5


class Npi(enum.Enum):
    UNKNOWN = 0
    ISDN = 1


class Alphabet(enum.Enum):
    GSM7 = "gsm7"
    UCS2 = "ucs2"
    OCTET = "octet"


@dataclass(frozen=True)
class Address:
    """Semi-octet (or alphanumeric) address with TON/NPI."""

    digits: str
    ton: Ton = Ton.UNKNOWN
    npi: Npi = Npi.ISDN

    def __post_init__(self):
        digits = self.digits
        if digits.startswith("+"):
            object.__setattr__(self, "digits", digits[1:])
            object.__setattr__(self, "ton", Ton.INTERNATIONAL)
            digits = digits[1:]
        if "+" in digits:
            raise InvalidDigit("'+' allowed only as leading character")
        if self.ton is Ton.ALPHANUMERIC:
            object.__setattr__(self, "npi", Npi.UNKNOWN)
            if len(digits) > 11:
                raise SmsCodecError("alphanumeric address longer than 11 characters")
            for ch in digits:
                if ch not in _ENC_BASIC and ch not in _ENC_EXT:
                    raise UnmappableCharacter(f"address character {ch!r} not in GSM7")
        else:
            if len(digits) > 20:
                raise SmsCodecError("address longer than 20 digits")
            for ch in digits:
                if ch not in "0123456789*#":
                    raise InvalidDigit(f"invalid address digit {ch!r}")

    @classmethod
    def parse(cls, text: str) -> "Address":
        """Build from a dial string; leading '+' selects international."""
        if text.startswith("+"):
            return cls(digits=text, ton=Ton.INTERNATIONAL, npi=Npi.ISDN)
        if any(ch not in "0123456789*#" for ch in text):
            return cls(digits=text, ton=Ton.ALPHANUMERIC, npi=Npi.UNKNOWN)
        return cls(digits=text, ton=Ton.UNKNOWN, npi=Npi.ISDN)

    def dial_string(self) -> str:
        if self.ton is Ton.INTERNATIONAL:
            return "+" + self.digits
        return self.digits


@dataclass(frozen=True)
class ConcatHeader:
    ref: int
    total: int
    seq: int

    def __post_init__(self):
        if not 0 <= self.ref <= 255:
            raise SmsCodecError("concat ref out of range")
        if not 1 <= self.total <= 255:
            raise SmsCodecError("concat total out of range")
        if not 1 <= self.seq <= self.total:
            raise SmsCodecError("concat seq out of [1, total]")


@dataclass(frozen=True)
class ScTimestamp:
    """Service-centre time; timezone in signed quarter-hours."""

    year: int
    month: int
    day: int
    hour: int
    minute: int
    second: int
    tz_quarters: int = 0

    @property
    def tz_hours(self) -> float:
        return self.tz_quarters / 4.0


@dataclass(frozen=True)
class SmsSubmit:
    destination: Address
    user_data: str
    message_ref: int = 0
    pid: int = 0
    alphabet: Alphabet = Alphabet.GSM7
    validity_relative: Optional[int] = None
    udh: Optional[ConcatHeader] = None

    def __post_init__(self):
        if not 0 <= self.message_ref <= 255:
            raise SmsCodecError("message_ref out of range")
        if not 0 <= self.pid <= 255:
            raise SmsCodecError("pid out of range")
        if self.validity_relative is not None and not 0 <= self.validity_relative <= 255:
            raise SmsCodecError("validity_relative out of range")


@dataclass(frozen=True)
class SmsDeliver:
    originator: Address
    user_data: str
    pid: int = 0
    alphabet: Alphabet = Alphabet.GSM7
    timestamp: ScTimestamp = ScTimestamp(2000, 1, 1, 0, 0, 0, 0)
    udh: Optional[ConcatHeader] = None


# --- GSM 7-bit packing -------------------------------------------------------

def text_to_septets(text: str) -> "list[int]":
    """Map text to septet codes; extension-table characters cost two."""
    codes = []
    for ch in text:
        code = _ENC_BASIC.get(ch)
        if code is not None:
            codes.append(code)
            continue
        ext = _ENC_EXT.get(ch)
        if ext is None:
            raise UnmappableCharacter(f"character {ch!r} not in the GSM 7-bit alphabet")
        codes.append(_ESCAPE)
        codes.append(ext)
    return codes


def septets_to_text(codes: "list[int]") -> str:
    out = []
    it = iter(codes)
    for code in it:
        if code == _ESCAPE:
            ext = next(it, None)
            if ext is None:
                break
            out.append(GSM7_EXT.get(ext, GSM7_BASIC[ext]))
        else:
            out.append(GSM7_BASIC[code])
    return "".join(out)


def septet_length(text: str) -> int:
    return len(text_to_septets(text))


def _pack_septets(codes: "list[int]", fill_bits: int = 0) -> bytes:
    out = bytearray()
    acc = 0
    nbits = fill_bits
    for code in codes:
        acc |= (code & 0x7F) << nbits
        nbits += 7
        while nbits >= 8:
            out.append(acc & 0xFF)
            acc >>= 8
            nbits -= 8
    if nbits:
        out.append(acc & 0xFF)
    return bytes(out)


def _unpack_septets(data: bytes, septets: int, fill_bits: int = 0) -> "list[int]":
    codes = []
    acc = 0
    nbits = 0
    pos = 0
    if fill_bits:
        if not data:
            if septets:
                raise LengthMismatch("empty buffer with nonzero septet count")
            return []
        acc = data[0] >> fill_bits
        nbits = 8 - fill_bits
        pos = 1
    while len(codes) < septets:
        while nbits < 7:
            if pos >= len(data):
                raise LengthMismatch("packed buffer too short for septet count")
            acc |= data[pos] << nbits
            nbits += 8
            pos += 1
        codes.append(acc & 0x7F)
        acc >>= 7
        nbits -= 7
    return codes


def pack_gsm7(text: str) -> "tuple[bytes, int]":
    """Pack text LSB-first into octets; returns (packed, septet count)."""
    codes = text_to_septets(text)
    return _pack_septets(codes), len(codes)


def unpack_gsm7(packed: bytes, septets: int) -> str:
    expected = (7 * septets + 7) // 8
    if len(packed) != expected:
        raise LengthMismatch(f"expected {expected} octets for {septets} septets, got {len(packed)}")
    return septets_to_text(_unpack_septets(packed, septets))


# --- semi-octet digits -------------------------------------------------------

_DIGIT_TO_NIBBLE = {**{str(d): d for d in range(10)}, "*": 0xA, "#": 0xB}
_NIBBLE_TO_DIGIT = {v: k for k, v in _DIGIT_TO_NIBBLE.items()}


def encode_semi_octets(digits: str) -> bytes:
    """Nibble-swapped BCD pairs; odd length padded with 0xF high nibble."""
    out = bytearray()
    try:
        nibbles = [_DIGIT_TO_NIBBLE[d] for d in digits]
    except KeyError as exc:
        raise InvalidDigit(f"invalid digit {exc.args[0]!r}") from None
    if len(nibbles) % 2:
        nibbles.append(0xF)
    for i in range(0, len(nibbles), 2):
        out.append(nibbles[i] | (nibbles[i + 1] << 4))
    return bytes(out)


def decode_semi_octets(data: bytes, ndigits: int) -> str:
    digits = []
    for octet in data:
        digits.append(octet & 0x0F)
        digits.append(octet >> 4)
    digits = digits[:ndigits]
    try:
        return "".join(_NIBBLE_TO_DIGIT[d] for d in digits)
    except KeyError:
        raise InvalidDigit("non-BCD nibble in address") from None


# --- address field -----------------------------------------------------------

def _encode_address(addr: Address) -> bytes:
    toa = 0x80 | (addr.ton.value << 4) | addr.npi.value
    if addr.ton is Ton.ALPHANUMERIC:
        packed, septets = pack_gsm7(addr.digits)
        length = (7 * septets + 3) // 4  # useful semi-octets
        return bytes([length, toa]) + packed
    value = encode_semi_octets(addr.digits)
    return bytes([len(addr.digits), toa]) + value


def _decode_address(data: bytes, pos: int) -> "tuple[Address, int]":
    if pos + 2 > len(data):
        raise TruncatedPdu("address header")
    length = data[pos]
    toa = data[pos + 1]
    pos += 2
    ton_bits = (toa >> 4) & 0x07
    npi_bits = toa & 0x0F
    try:
        ton = Ton(ton_bits)
    except ValueError:
        ton = Ton.UNKNOWN
    npi = Npi.ISDN if npi_bits == Npi.ISDN.value else Npi.UNKNOWN
    if ton is Ton.ALPHANUMERIC:
        nbytes = (length + 1) // 2
        if pos + nbytes > len(data):
            raise TruncatedPdu("alphanumeric address value")
        septets = (length * 4) // 7
        text = septets_to_text(_unpack_septets(data[pos:pos + nbytes], septets))
        return Address(digits=text, ton=ton, npi=Npi.UNKNOWN), pos + nbytes
    nbytes = (length + 1) // 2
    if pos + nbytes > len(data):
        raise TruncatedPdu("address value")
    digits = decode_semi_octets(data[pos:pos + nbytes], length)
    return Address(digits=digits, ton=ton, npi=npi), pos + nbytes


# --- DCS, UDH, timestamps ----------------------------------------------------

_DCS_ENCODE = {Alphabet.GSM7: 0x00, Alphabet.OCTET: 0x04, Alphabet.UCS2: 0x08}


def _decode_dcs(octet: int) -> Alphabet:
    group = octet >> 4
    if group in (0x0, 0x1, 0x2, 0x3):  # general data coding
        bits = (octet >> 2) & 0x03
        if bits == 0:
            return Alphabet.GSM7
        if bits == 1:
            return Alphabet.OCTET
        if bits == 2:
            return Alphabet.UCS2
        raise UnsupportedDcs(f"reserved alphabet in DCS 0x{octet:02X}")
    if group == 0xF:  # data coding / message class
        return Alphabet.OCTET if octet & 0x04 else Alphabet.GSM7
    raise UnsupportedDcs(f"unsupported DCS 0x{octet:02X}")


def _encode_udh(udh: ConcatHeader) -> bytes:
    return bytes([0x05, 0x00, 0x03, udh.ref, udh.total, udh.seq])


def _decode_udh(data: bytes) -> "tuple[Optional[ConcatHeader], int]":
    """Returns (concat header or None, total UDH octets including UDHL)."""
    if not data:
        raise TruncatedPdu("user data header")
    udhl = data[0]
    if 1 + udhl > len(data):
        raise TruncatedPdu("user data header")
    pos = 1
    end = 1 + udhl
    concat = None
    while pos + 2 <= end:
        iei = data[pos]
        ielen = data[pos + 1]
        body = data[pos + 2:pos + 2 + ielen]
        if iei == 0x00 and ielen == 3:
            concat = ConcatHeader(ref=body[0], total=body[1], seq=body[2])
        elif iei == 0x08 and ielen == 4:
            concat = ConcatHeader(ref=(body[0] << 8) | body[1], total=body[2], seq=body[3])
        pos += 2 + ielen
    return concat, end


def _encode_scts(ts: ScTimestamp) -> bytes:
    def swap(value: int) -> int:
        return ((value % 10) << 4) | (value // 10)

    tz = abs(ts.tz_quarters)
    tz_octet = ((tz % 10) << 4) | (tz // 10)
    if ts.tz_quarters < 0:
        tz_octet |= 0x08
    return bytes(
        [
            swap(ts.year % 100),
            swap(ts.month),
            swap(ts.day),
            swap(ts.hour),
            swap(ts.minute),
            swap(ts.second),
            tz_octet,
        ]
    )


def _decode_scts(data: bytes) -> ScTimestamp:
    if len(data) < 7:
        raise TruncatedPdu("service centre timestamp")

    def unswap(octet: int) -> int:
        return (octet & 0x0F) * 10 + (octet >> 4)

    tz_octet = data[6]
    # Sign lives in bit 3 of the first (tens) semi-octet of the TZ field.
    negative = bool(tz_octet & 0x08)
    quarters = (tz_octet & 0x07) * 10 + (tz_octet >> 4)
    return ScTimestamp(
        year=2000 + unswap(data[0]),
        month=unswap(data[1]),
        day=unswap(data[2]),
        hour=unswap(data[3]),
        minute=unswap(data[4]),
        second=unswap(data[5]),
        tz_quarters=-quarters if negative else quarters,
    )


# --- user data assembly ------------------------------------------------------

def _capacity(alphabet: Alphabet, with_udh: bool) -> int:
    if alphabet is Alphabet.GSM7:
        return SEPTETS_PER_SEGMENT if with_udh else SEPTETS_PER_MESSAGE
    if alphabet is Alphabet.UCS2:
        return UCS2_UNITS_PER_SEGMENT if with_udh else UCS2_UNITS_PER_MESSAGE
    return OCTETS_PER_MESSAGE - 6 if with_udh else OCTETS_PER_MESSAGE


def _encode_user_data(text: str, alphabet: Alphabet, udh: Optional[ConcatHeader]) -> "tuple[int, bytes]":
    """Returns (UDL, UD octets) with the UDH and any fill bits applied."""
    header = _encode_udh(udh) if udh else b""
    if alphabet is Alphabet.GSM7:
        codes = text_to_septets(text)
        if udh:
            header_bits = len(header) * 8
            fill = (7 - header_bits % 7) % 7
            header_septets = (header_bits + fill) // 7
            if len(codes) > SEPTETS_PER_MESSAGE - header_septets:
                raise MessageTooLong(f"{len(codes)} septets with concat header")
            udl = header_septets + len(codes)
            return udl, header + _pack_septets(codes, fill_bits=fill)
        if len(codes) > SEPTETS_PER_MESSAGE:
            raise MessageTooLong(f"{len(codes)} septets exceeds {SEPTETS_PER_MESSAGE}")
        return len(codes), _pack_septets(codes)
    if alphabet is Alphabet.UCS2:
        encoded = text.encode("utf-16-be")
        if len(header) + len(encoded) > OCTETS_PER_MESSAGE:
            raise MessageTooLong(f"{len(encoded) // 2} UCS-2 units with header")
        return len(header) + len(encoded), header + encoded
    encoded = text.encode("latin-1")
    if len(header) + len(encoded) > OCTETS_PER_MESSAGE:
        raise MessageTooLong(f"{len(encoded)} octets with header")
    return len(header) + len(encoded), header + encoded


def _decode_user_data(
    data: bytes, pos: int, udl: int, alphabet: Alphabet, has_udh: bool
) -> "tuple[str, Optional[ConcatHeader]]":
    udh = None
    if alphabet is Alphabet.GSM7:
        nbytes = (7 * udl + 7) // 8
        ud = data[pos:pos + nbytes]
        if len(ud) < nbytes:
            raise TruncatedPdu("user data")
        if has_udh:
            udh, header_len = _decode_udh(ud)
            header_bits = header_len * 8
            fill = (7 - header_bits % 7) % 7
            header_septets = (header_bits + fill) // 7
            text_septets = udl - header_septets
            if text_septets < 0:
                raise TruncatedPdu("user data header exceeds UDL")
            codes = _unpack_septets(ud[header_len:], text_septets, fill_bits=fill)
            return septets_to_text(codes), udh
        return septets_to_text(_unpack_septets(ud, udl)), None
    ud = data[pos:pos + udl]
    if len(ud) < udl:
        raise TruncatedPdu("user data")
    if has_udh:
        udh, header_len = _decode_udh(ud)
        ud = ud[header_len:]
    if alphabet is Alphabet.UCS2:
        if len(ud) % 2:
            ud = ud[:-1]
        return ud.decode("utf-16-be", errors="replace"), udh
    return ud.decode("latin-1"), udh


# --- SUBMIT / DELIVER --------------------------------------------------------

def _from_hex(pdu_hex: str) -> bytes:
    try:
        return bytes.fromhex(pdu_hex)
    except ValueError as exc:
        raise BadHex(str(exc)) from None


def encode_submit(msg: SmsSubmit) -> "tuple[str, int]":
    """Encode an SMS-SUBMIT; returns (uppercase hex with leading SCA=00,
    TPDU octet count as passed to the message-send command)."""
    fo = 0x01
    if msg.udh:
        fo |= 0x40
    if msg.validity_relative is not None:
        fo |= 0x10
    out = bytearray([0x00, fo, msg.message_ref])
    out += _encode_address(msg.destination)
    out.append(msg.pid)
    out.append(_DCS_ENCODE[msg.alphabet])
    if msg.validity_relative is not None:
        out.append(msg.validity_relative)
    udl, ud = _encode_user_data(msg.user_data, msg.alphabet, msg.udh)
    out.append(udl)
    out += ud
    tpdu_len = len(out) - 1
    if tpdu_len > MAX_TPDU_OCTETS:
        raise MessageTooLong(f"TPDU of {tpdu_len} octets exceeds {MAX_TPDU_OCTETS}")
    return out.hex().upper(), tpdu_len


def decode_submit(pdu_hex: str) -> SmsSubmit:
    data = _from_hex(pdu_hex)
    pos = _skip_sca(data)
    if pos >= len(data):
        raise TruncatedPdu("first octet")
    fo = data[pos]
    if fo & 0x03 != 0x01:
        raise SmsCodecError(f"not an SMS-SUBMIT (first octet 0x{fo:02X})")
    has_udh = bool(fo & 0x40)
    vpf = (fo >> 3) & 0x03
    pos += 1
    if pos >= len(data):
        raise TruncatedPdu("message reference")
    mref = data[pos]
    pos += 1
    dest, pos = _decode_address(data, pos)
    if pos + 2 > len(data):
        raise TruncatedPdu("pid/dcs")
    pid = data[pos]
    alphabet = _decode_dcs(data[pos + 1])
    pos += 2
    validity = None
    if vpf == 0x02:  # relative
        if pos >= len(data):
            raise TruncatedPdu("validity period")
        validity = data[pos]
        pos += 1
    elif vpf in (0x01, 0x03):  # enhanced / absolute: 7 octets, not retained
        pos += 7
    if pos >= len(data):
        raise TruncatedPdu("user data length")
    udl = data[pos]
    pos += 1
    text, udh = _decode_user_data(data, pos, udl, alphabet, has_udh)
    return SmsSubmit(
        destination=dest,
        user_data=text,
        message_ref=mref,
        pid=pid,
        alphabet=alphabet,
        validity_relative=validity,
        udh=udh,
    )


def encode_deliver(msg: SmsDeliver) -> str:
    """Encode an SMS-DELIVER (uppercase hex with leading SCA=00).

    Provided for completeness and local tooling; incoming DELIVER PDUs in
    tests are produced by the simulator's own encoder.
    """
    fo = 0x00 | 0x04  # MMS=1: no more messages waiting
    if msg.udh:
        fo |= 0x40
    out = bytearray([0x00, fo])
    out += _encode_address(msg.originator)
    out.append(msg.pid)
    out.append(_DCS_ENCODE[msg.alphabet])
    out += _encode_scts(msg.timestamp)
    udl, ud = _encode_user_data(msg.user_data, msg.alphabet, msg.udh)
    out.append(udl)
    out += ud
    return out.hex().upper()


def _skip_sca(data: bytes) -> int:
    if not data:
        raise TruncatedPdu("service centre address")
    sca_len = data[0]
    pos = 1 + sca_len
    if pos > len(data):
        raise TruncatedPdu("service centre address")
    return pos


def decode_deliver(pdu_hex: str) -> SmsDeliver:
    data = _from_hex(pdu_hex)
    pos = _skip_sca(data)
    if pos >= len(data):
        raise TruncatedPdu("first octet")
    fo = data[pos]
    if fo & 0x03 != 0x00:
        raise SmsCodecError(f"not an SMS-DELIVER (first octet 0x{fo:02X})")
    has_udh = bool(fo & 0x40)
    pos += 1
    orig, pos = _decode_address(data, pos)
    if pos + 2 > len(data):
        raise TruncatedPdu("pid/dcs")
    pid = data[pos]
    alphabet = _decode_dcs(data[pos + 1])
    pos += 2
    scts = _decode_scts(data[pos:pos + 7])
    pos += 7
    if pos >= len(data):
        raise TruncatedPdu("user data length")
    udl = data[pos]
    pos += 1
    text, udh = _decode_user_data(data, pos, udl, alphabet, has_udh)
    return SmsDeliver(
        originator=orig,
        user_data=text,
        pid=pid,
        alphabet=alphabet,
        timestamp=scts,
        udh=udh,
    )


# --- segmentation ------------------------------------------------------------

_concat_ref_counter = itertools.count(1)
_concat_lock = threading.Lock()


def _next_concat_ref() -> int:
    with _concat_lock:
        return next(_concat_ref_counter) % 256


def choose_alphabet(text: str) -> Alphabet:
    try:
        text_to_septets(text)
        return Alphabet.GSM7
    except UnmappableCharacter:
        return Alphabet.UCS2


def _split_gsm7(text: str, limit: int) -> "list[str]":
    parts = []
    current: "list[str]" = []
    count = 0
    for ch in text:
        cost = 1 if ch in _ENC_BASIC else 2
        if count + cost > limit:
            parts.append("".join(current))
            current = [ch]
            count = cost
        else:
            current.append(ch)
            count += cost
    parts.append("".join(current))
    return parts


def _split_ucs2(text: str, limit: int) -> "list[str]":
    parts = []
    current: "list[str]" = []
    count = 0
    for ch in text:
        cost = len(ch.encode("utf-16-be")) // 2
        if count + cost > limit:
            parts.append("".join(current))
            current = [ch]
            count = cost
        else:
            current.append(ch)
            count += cost
    parts.append("".join(current))
    return parts


def _split_octets(text: str, limit: int) -> "list[str]":
    return [text[i:i + limit] for i in range(0, len(text), limit)] or [""]


def segment(
    text: str, alphabet: Optional[Alphabet] = None, ref: Optional[int] = None
) -> "list[tuple[str, Optional[ConcatHeader]]]":
    """Split text into sendable parts.

    A message that fits yields a single part with no header.  Otherwise each
    part fits the reduced per-segment capacity and all headers share one ref
    with seq 1..total.
    """
    if alphabet is None:
        alphabet = choose_alphabet(text)
    if alphabet is Alphabet.GSM7:
        total_units = septet_length(text)
        whole, per_segment = SEPTETS_PER_MESSAGE, SEPTETS_PER_SEGMENT
        splitter = _split_gsm7
    elif alphabet is Alphabet.UCS2:
        total_units = len(text.encode("utf-16-be")) // 2
        whole, per_segment = UCS2_UNITS_PER_MESSAGE, UCS2_UNITS_PER_SEGMENT
        splitter = _split_ucs2
    else:
        total_units = len(text)
        whole, per_segment = OCTETS_PER_MESSAGE, OCTETS_PER_MESSAGE - 6
        splitter = _split_octets
    if total_units <= whole:
        return [(text, None)]
    parts = splitter(text, per_segment)
    if ref is None:
        ref = _next_concat_ref()
    total = len(parts)
    return [
        (part, ConcatHeader(ref=ref, total=total, seq=i + 1))
        for i, part in enumerate(parts)
    ]
