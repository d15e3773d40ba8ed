import pytest
from hypothesis import given, settings, strategies as st

from cellgate import sms
from cellgate.errors import (
    InvalidDigit,
    LengthMismatch,
    MessageTooLong,
    SmsCodecError,
    TruncatedPdu,
    UnmappableCharacter,
)
from cellgate.sms import (
    Address,
    Alphabet,
    ConcatHeader,
    Npi,
    ScTimestamp,
    SmsSubmit,
    Ton,
)

from gsm7_oracle import (
    GSM7_ALPHABET,
    oracle_pack,
    oracle_semi_octets,
    oracle_septets,
    oracle_unpack,
)

# --- GSM 7-bit packing --------------------------------------------------------

def test_pack_single_char():
    assert sms.pack_gsm7("A") == (b"\x41", 1)


def test_pack_empty():
    assert sms.pack_gsm7("") == (b"", 0)


def test_pack_hellohello_frozen_vector():
    packed, septets = sms.pack_gsm7("hellohello")
    assert septets == 10
    assert packed == bytes.fromhex("E8329BFD4697D9EC37")
    # and the independent oracle agrees
    assert oracle_pack(oracle_septets("hellohello")) == packed


gsm7_text = st.text(
    alphabet=st.sampled_from(GSM7_ALPHABET.replace("\x1b", "") + "€[]{}|~^\\\x0c"),
    max_size=160,
)


@given(gsm7_text)
def test_pack_matches_oracle(text):
    codes = oracle_septets(text)
    if len(codes) > 160:
        return
    packed, septets = sms.pack_gsm7(text)
    assert septets == len(codes)
    assert packed == oracle_pack(codes)
    assert len(packed) == (7 * septets + 7) // 8


@given(gsm7_text)
def test_pack_unpack_roundtrip(text):
    packed, septets = sms.pack_gsm7(text)
    assert sms.unpack_gsm7(packed, septets) == text


def test_unpack_single():
    assert sms.unpack_gsm7(b"\x41", 1) == "A"


def test_unpack_length_mismatch():
    with pytest.raises(LengthMismatch):
        sms.unpack_gsm7(b"\x41\x00", 1)


def test_trailing_filler_not_decoded_as_at_sign():
    # 7 septets pack into 7 octets with 7 zero filler bits; a byte-oriented
    # decode would see an 8th septet of value 0 ('@').
    text = "seven77"
    packed, septets = sms.pack_gsm7(text)
    assert septets == 7 and len(packed) == 7
    assert oracle_unpack(packed, 7) == oracle_septets(text)
    assert sms.unpack_gsm7(packed, 7) == text
    assert not sms.unpack_gsm7(packed, 7).endswith("@")


def test_unmappable_character():
    with pytest.raises(UnmappableCharacter):
        sms.pack_gsm7("π")


# --- semi-octets ---------------------------------------------------------------

def test_semi_octets_even():
    assert sms.encode_semi_octets("13374242") == bytes.fromhex("31732424")
    assert oracle_semi_octets("13374242") == bytes.fromhex("31732424")


def test_semi_octets_odd_padded():
    assert sms.encode_semi_octets("123") == bytes.fromhex("21F3")
    assert oracle_semi_octets("123") == bytes.fromhex("21F3")


def test_semi_octets_empty():
    assert sms.encode_semi_octets("") == b""


def test_semi_octets_invalid_digit():
    with pytest.raises(InvalidDigit):
        sms.encode_semi_octets("12a")


@given(st.text(alphabet="0123456789*#", max_size=20))
def test_semi_octets_match_oracle_and_roundtrip(digits):
    encoded = sms.encode_semi_octets(digits)
    assert encoded == oracle_semi_octets(digits)
    assert sms.decode_semi_octets(encoded, len(digits)) == digits


# --- SUBMIT / DELIVER ------------------------------------------------------------

def test_encode_submit_frozen_vector():
    """Field-by-field assembly, frozen: SCA 00, FO 01, MR 00,
    DA len 12 TOA 91 + swapped digits, PID 00, DCS 00, UDL 05, UD."""
    msg = SmsSubmit(
        destination=Address.parse("+491701234567"),
        user_data="hello",
        message_ref=0,
    )
    pdu, tpdu_len = sms.encode_submit(msg)
    assert pdu == "0001000C91947110325476000005E8329BFD06"
    assert tpdu_len == 18
    assert sms.decode_submit(pdu) == msg


def test_submit_161_septets_too_long():
    msg = SmsSubmit(destination=Address.parse("+33612345678"), user_data="a" * 161)
    with pytest.raises(MessageTooLong):
        sms.encode_submit(msg)


def test_submit_160_septets_fits():
    msg = SmsSubmit(destination=Address.parse("+33612345678"), user_data="a" * 160)
    pdu, _ = sms.encode_submit(msg)
    assert sms.decode_submit(pdu).user_data == "a" * 160


addresses = st.one_of(
    st.builds(
        Address,
        digits=st.text(alphabet="0123456789", min_size=1, max_size=20),
        ton=st.sampled_from([Ton.INTERNATIONAL, Ton.NATIONAL, Ton.UNKNOWN]),
        npi=st.sampled_from([Npi.ISDN, Npi.UNKNOWN]),
    ),
    st.builds(
        Address,
        digits=st.text(
            alphabet=st.sampled_from("ABCXYZabcz019 ._"), min_size=1, max_size=11
        ),
        ton=st.just(Ton.ALPHANUMERIC),
    ),
)

concat_headers = st.builds(
    lambda ref, total, seq_frac: ConcatHeader(
        ref=ref, total=total, seq=1 + seq_frac % total
    ),
    st.integers(0, 255),
    st.integers(1, 255),
    st.integers(0, 254),
)


@st.composite
def submits(draw):
    alphabet = draw(st.sampled_from([Alphabet.GSM7, Alphabet.UCS2]))
    udh = draw(st.none() | concat_headers)
    limit = (153 if udh else 160) if alphabet is Alphabet.GSM7 else (67 if udh else 70)
    if alphabet is Alphabet.GSM7:
        text = draw(st.text(alphabet=st.sampled_from("abcXYZ019 @€"), max_size=limit))
        while sms.septet_length(text) > limit:
            text = text[:-1]
    else:
        text = draw(st.text(max_size=limit))
        while len(text.encode("utf-16-be")) // 2 > limit:
            text = text[:-1]
    return SmsSubmit(
        destination=draw(addresses),
        user_data=text,
        message_ref=draw(st.integers(0, 255)),
        pid=draw(st.integers(0, 255)),
        alphabet=alphabet,
        validity_relative=draw(st.none() | st.integers(0, 255)),
        udh=udh,
    )


@settings(max_examples=300, deadline=None)
@given(submits())
def test_submit_roundtrip(msg):
    pdu, tpdu_len = sms.encode_submit(msg)
    assert tpdu_len == len(pdu) // 2 - 1
    assert sms.decode_submit(pdu) == msg


def test_deliver_roundtrip_with_timestamp():
    msg = sms.SmsDeliver(
        originator=Address.parse("+33612345678"),
        user_data="bonjour",
        timestamp=ScTimestamp(2024, 7, 15, 12, 30, 45, tz_quarters=4),
    )
    decoded = sms.decode_deliver(sms.encode_deliver(msg))
    assert decoded == msg
    assert decoded.timestamp.tz_hours == 1.0


def test_deliver_negative_timezone():
    msg = sms.SmsDeliver(
        originator=Address.parse("0612"),
        user_data="x",
        timestamp=ScTimestamp(2024, 1, 2, 3, 4, 5, tz_quarters=-20),
    )
    decoded = sms.decode_deliver(sms.encode_deliver(msg))
    assert decoded.timestamp.tz_quarters == -20
    assert decoded.timestamp.tz_hours == -5.0


def test_deliver_ucs2_euro():
    msg = sms.SmsDeliver(
        originator=Address.parse("+4917012345"),
        user_data="€",
        alphabet=Alphabet.UCS2,
    )
    pdu = sms.encode_deliver(msg)
    assert "20AC" in pdu
    assert sms.decode_deliver(pdu).user_data == "€"


def test_decode_truncated():
    with pytest.raises(TruncatedPdu):
        sms.decode_deliver("00")


def test_decode_bad_hex():
    with pytest.raises(SmsCodecError):
        sms.decode_deliver("zz")


@settings(max_examples=300, deadline=None)
@given(st.binary(max_size=60))
def test_decode_never_panics(data):
    for decode in (sms.decode_deliver, sms.decode_submit):
        try:
            decode(data.hex().upper())
        except SmsCodecError:
            pass


# --- segmentation ----------------------------------------------------------------

def test_segment_fits_single():
    parts = sms.segment("a" * 160, Alphabet.GSM7)
    assert parts == [("a" * 160, None)]


def test_segment_161_septets():
    parts = sms.segment("a" * 161, Alphabet.GSM7)
    assert len(parts) == 2
    assert len(parts[0][0]) == 153 and len(parts[1][0]) == 8
    refs = {h.ref for _, h in parts}
    assert len(refs) == 1
    assert [h.seq for _, h in parts] == [1, 2]
    assert all(h.total == 2 for _, h in parts)


def test_segment_empty():
    assert sms.segment("", Alphabet.GSM7) == [("", None)]


@given(st.text(alphabet=st.sampled_from("abc XYZ019€"), max_size=500))
def test_segment_preserves_content(text):
    parts = sms.segment(text, Alphabet.GSM7)
    assert "".join(p for p, _ in parts) == text
    if len(parts) > 1:
        seqs = [h.seq for _, h in parts]
        assert seqs == list(range(1, len(parts) + 1))
        for part, _ in parts:
            assert sms.septet_length(part) <= 153


@given(st.text(max_size=300))
def test_segment_ucs2_capacity(text):
    text = "".join(ch for ch in text if not 0xD800 <= ord(ch) <= 0xDFFF)
    parts = sms.segment(text, Alphabet.UCS2)
    assert "".join(p for p, _ in parts) == text
    for part, header in parts:
        units = len(part.encode("utf-16-be")) // 2
        assert units <= (70 if header is None else 67)
