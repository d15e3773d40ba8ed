"""The simulator's own SMS codec: DELIVER encoder and SUBMIT decoder.

Written independently of :mod:`cellgate.sms` on purpose - the two sides
cross-check each other in tests.  This one works on explicit bit strings
('0'/'1' characters, LSB first) rather than a streaming carry accumulator.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

_SEPTET_CHARS = {
    0x00: "@", 0x01: "£", 0x02: "$", 0x03: "¥", 0x04: "è", 0x05: "é",
    0x06: "ù", 0x07: "ì", 0x08: "ò", 0x09: "Ç", 0x0A: "\n", 0x0B: "Ø",
    0x0C: "ø", 0x0D: "\r", 0x0E: "Å", 0x0F: "å", 0x10: "Δ", 0x11: "_",
    0x12: "Φ", 0x13: "Γ", 0x14: "Λ", 0x15: "Ω", 0x16: "Π", 0x17: "Ψ",
    0x18: "Σ", 0x19: "Θ", 0x1A: "Ξ", 0x1C: "Æ", 0x1D: "æ", 0x1E: "ß",
    0x1F: "É", 0x20: " ", 0x21: "!", 0x22: '"', 0x23: "#", 0x24: "¤",
    0x25: "%", 0x26: "&", 0x27: "'", 0x28: "(", 0x29: ")", 0x2A: "*",
    0x2B: "+", 0x2C: ",", 0x2D: "-", 0x2E: ".", 0x2F: "/", 0x3A: ":",
    0x3B: ";", 0x3C: "<", 0x3D: "=", 0x3E: ">", 0x3F: "?", 0x40: "¡",
    0x5B: "Ä", 0x5C: "Ö", 0x5D: "Ñ", 0x5E: "Ü", 0x5F: "§", 0x60: "¿",
    0x7B: "ä", 0x7C: "ö", 0x7D: "ñ", 0x7E: "ü", 0x7F: "à",
}
for _i in range(10):
    _SEPTET_CHARS[0x30 + _i] = chr(ord("0") + _i)
for _i in range(26):
    _SEPTET_CHARS[0x41 + _i] = chr(ord("A") + _i)
    _SEPTET_CHARS[0x61 + _i] = chr(ord("a") + _i)

_EXT_CHARS = {0x0A: "\x0c", 0x14: "^", 0x28: "{", 0x29: "}", 0x2F: "\\",
              0x3C: "[", 0x3D: "~", 0x3E: "]", 0x40: "|", 0x65: "€"}

_CHAR_SEPTETS = {ch: code for code, ch in _SEPTET_CHARS.items()}
_CHAR_EXT = {ch: code for code, ch in _EXT_CHARS.items()}


class SimSmsError(ValueError):
    pass


@dataclass
class DecodedSubmit:
    destination: str  # dial string, '+' prefixed when international
    text: str
    message_ref: int
    alphabet: str  # "gsm7" | "ucs2" | "octet"
    concat: "Optional[tuple[int, int, int]]" = None  # (ref, total, seq)


def _to_bits(value: int, width: int) -> str:
    return "".join("1" if value & (1 << i) else "0" for i in range(width))


def _from_bits(bits: str) -> int:
    return sum(1 << i for i, b in enumerate(bits) if b == "1")


def _chars_to_codes(text: str) -> "list[int]":
    codes = []
    for ch in text:
        if ch in _CHAR_SEPTETS:
            codes.append(_CHAR_SEPTETS[ch])
        elif ch in _CHAR_EXT:
            codes.append(0x1B)
            codes.append(_CHAR_EXT[ch])
        else:
            raise SimSmsError(f"character {ch!r} outside GSM alphabet")
    return codes


def _codes_to_chars(codes: "list[int]") -> str:
    chars = []
    escape = False
    for code in codes:
        if escape:
            chars.append(_EXT_CHARS.get(code, _SEPTET_CHARS.get(code, "?")))
            escape = False
        elif code == 0x1B:
            escape = True
        else:
            chars.append(_SEPTET_CHARS.get(code, "?"))
    return "".join(chars)


def pack7(text: str, padding_bits: int = 0) -> "tuple[bytes, int]":
    codes = _chars_to_codes(text)
    bits = "0" * padding_bits + "".join(_to_bits(c, 7) for c in codes)
    while len(bits) % 8:
        bits += "0"
    data = bytes(_from_bits(bits[i:i + 8]) for i in range(0, len(bits), 8))
    return data, len(codes)


def unpack7(data: bytes, septets: int, padding_bits: int = 0) -> str:
    bits = "".join(_to_bits(b, 8) for b in data)
    bits = bits[padding_bits:]
    codes = [_from_bits(bits[i * 7:(i + 1) * 7]) for i in range(septets)]
    return _codes_to_chars(codes)


def swap_digits(digits: str) -> str:
    if len(digits) % 2:
        digits += "F"
    return "".join(digits[i + 1] + digits[i] for i in range(0, len(digits), 2))


def unswap_digits(hexstr: str, count: int) -> str:
    out = []
    for i in range(0, len(hexstr), 2):
        out.append(hexstr[i + 1])
        out.append(hexstr[i])
    return "".join(out)[:count]


def _timestamp_octets(ts: "tuple[int, int, int, int, int, int, int]") -> str:
    year, month, day, hour, minute, second, tz_quarters = ts
    fields = [year % 100, month, day, hour, minute, second]
    out = "".join(f"{v % 10}{v // 10}" for v in fields)
    q = abs(tz_quarters)
    tz_high = q % 10
    tz_low = q // 10
    if tz_quarters < 0:
        tz_low |= 0x08
    return out + f"{tz_high}{tz_low:X}"


def encode_deliver(
    originator: str,
    text: str,
    timestamp: "tuple[int, int, int, int, int, int, int]" = (2024, 1, 1, 0, 0, 0, 0),
    concat: "Optional[tuple[int, int, int]]" = None,
) -> str:
    """Build an SMS-DELIVER PDU (hex, leading SCA=00) around `text`.

    Falls back to UCS-2 automatically when the text leaves the GSM alphabet.
    """
    international = originator.startswith("+")
    digits = originator[1:] if international else originator
    toa = 0x91 if international else 0x81
    header = "00"  # SCA from SIM
    fo = 0x04
    if concat:
        fo |= 0x40
    header += f"{fo:02X}"
    header += f"{len(digits):02X}{toa:02X}" + swap_digits(digits)
    header += "00"  # PID

    udh = b""
    if concat:
        ref, total, seq = concat
        udh = bytes([0x05, 0x00, 0x03, ref, total, seq])

    try:
        if concat:
            pad = (7 - len(udh) * 8 % 7) % 7
            packed, nseptets = pack7(text, padding_bits=pad)
            udl = nseptets + (len(udh) * 8 + pad) // 7
        else:
            packed, nseptets = pack7(text)
            udl = nseptets
        dcs = 0x00
        ud = udh + packed
    except SimSmsError:
        encoded = text.encode("utf-16-be")
        dcs = 0x08
        ud = udh + encoded
        udl = len(ud)
    header += f"{dcs:02X}"
    header += _timestamp_octets(timestamp)
    header += f"{udl:02X}"
    return (header + (ud.hex().upper() if ud else "")).upper()


def decode_submit(pdu_hex: str) -> DecodedSubmit:
    """Pull destination/text/concat out of an SMS-SUBMIT PDU."""
    try:
        raw = bytes.fromhex(pdu_hex)
    except ValueError as exc:
        raise SimSmsError(f"bad hex: {exc}") from None
    if not raw:
        raise SimSmsError("empty PDU")
    pos = 1 + raw[0]  # skip SCA
    if pos + 2 > len(raw):
        raise SimSmsError("truncated before first octet")
    fo = raw[pos]
    if fo & 0x03 != 0x01:
        raise SimSmsError("not a SUBMIT")
    has_udh = bool(fo & 0x40)
    vpf = (fo >> 3) & 0x03
    mref = raw[pos + 1]
    pos += 2
    if pos + 2 > len(raw):
        raise SimSmsError("truncated address")
    addr_digits = raw[pos]
    toa = raw[pos + 1]
    pos += 2
    addr_bytes = (addr_digits + 1) // 2
    if pos + addr_bytes > len(raw):
        raise SimSmsError("truncated address value")
    if (toa >> 4) & 0x07 == 0x05:
        septets = (addr_digits * 4) // 7
        destination = unpack7(raw[pos:pos + addr_bytes], septets)
    else:
        digits_hex = raw[pos:pos + addr_bytes].hex().upper()
        number = unswap_digits(digits_hex, addr_digits)
        number = "".join({"A": "*", "B": "#"}.get(d, d) for d in number)
        destination = ("+" + number) if toa & 0x70 == 0x10 else number
    pos += addr_bytes
    if pos + 2 > len(raw):
        raise SimSmsError("truncated pid/dcs")
    dcs = raw[pos + 1]
    pos += 2
    if vpf == 0x02:
        pos += 1
    elif vpf in (0x01, 0x03):
        pos += 7
    if pos >= len(raw):
        raise SimSmsError("truncated UDL")
    udl = raw[pos]
    pos += 1
    ud = raw[pos:]

    concat = None
    if dcs & 0x0C == 0x08:
        alphabet = "ucs2"
        if has_udh and ud:
            udh_len = 1 + ud[0]
            concat = _find_concat(ud[:udh_len])
            ud = ud[udh_len:udl]
        else:
            ud = ud[:udl]
        text = ud.decode("utf-16-be", errors="replace")
    elif dcs & 0x0C == 0x04:
        alphabet = "octet"
        if has_udh and ud:
            udh_len = 1 + ud[0]
            concat = _find_concat(ud[:udh_len])
            ud = ud[udh_len:udl]
        else:
            ud = ud[:udl]
        text = ud.decode("latin-1")
    else:
        alphabet = "gsm7"
        if has_udh and ud:
            udh_len = 1 + ud[0]
            concat = _find_concat(ud[:udh_len])
            pad = (7 - udh_len * 8 % 7) % 7
            body_septets = udl - (udh_len * 8 + pad) // 7
            text = unpack7(ud[udh_len:], body_septets, padding_bits=pad)
        else:
            text = unpack7(ud, udl)
    return DecodedSubmit(
        destination=destination,
        text=text,
        message_ref=mref,
        alphabet=alphabet,
        concat=concat,
    )


def _find_concat(udh: bytes) -> "Optional[tuple[int, int, int]]":
    pos = 1
    while pos + 2 <= len(udh):
        iei, ielen = udh[pos], udh[pos + 1]
        body = udh[pos + 2:pos + 2 + ielen]
        if iei == 0x00 and ielen == 3:
            return (body[0], body[1], body[2])
        if iei == 0x08 and ielen == 4:
            return ((body[0] << 8) | body[1], body[2], body[3])
        pos += 2 + ielen
    return None
