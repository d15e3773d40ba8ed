import pytest
from hypothesis import given, settings, strategies as st

from cellgate.errors import MmsDecodeError, MmsMissingHeader, MmsTruncated, MmsUnknownType
from cellgate.mms.codec import (
    MessageClass,
    MmsBody,
    MmsHeaders,
    MmsMessageType,
    MmsPart,
    MmsStatus,
    decode_pdu,
    encode_pdu,
)

from mock_mmsc import walk_headers


def minimal_headers(mtype):
    if mtype is MmsMessageType.SEND_REQ:
        return MmsHeaders(transaction_id="t1", to=("+3361234567/TYPE=PLMN",))
    if mtype is MmsMessageType.SEND_CONF:
        return MmsHeaders(transaction_id="t1", status=MmsStatus.OK, message_id="m1")
    if mtype is MmsMessageType.NOTIFICATION_IND:
        return MmsHeaders(
            transaction_id="t1",
            message_class=MessageClass.PERSONAL,
            message_size=512,
            expiry=3600,
            content_location="http://mmsc/x1",
        )
    if mtype is MmsMessageType.NOTIFYRESP_IND:
        return MmsHeaders(transaction_id="t1", status=MmsStatus.DEFERRED)
    if mtype is MmsMessageType.RETRIEVE_CONF:
        return MmsHeaders(message_id="m1", date=1700000000)
    if mtype is MmsMessageType.ACKNOWLEDGE_IND:
        return MmsHeaders(transaction_id="t1")
    return MmsHeaders(message_id="m1", to=("+336111/TYPE=PLMN",), date=1700000000, status=MmsStatus.RETRIEVED)


def needs_body(mtype):
    return mtype in (MmsMessageType.SEND_REQ, MmsMessageType.RETRIEVE_CONF)


def test_send_req_message_type_octets():
    pdu = encode_pdu(
        MmsMessageType.SEND_REQ,
        minimal_headers(MmsMessageType.SEND_REQ),
        MmsBody(parts=(MmsPart("text/plain", b"hi"),)),
    )
    # Field id 0x0C with the short-form bit, value token for m-send-req.
    assert pdu[0] == 0x8C
    assert pdu[1] == 0x80
    # cross-check with the tests' independent walker
    fields = walk_headers(pdu)
    assert fields[0] == ("message-type", b"\x80")
    names = [name for name, _ in fields]
    assert "transaction-id" in names and "version" in names and "to" in names


def test_notification_roundtrip():
    headers = minimal_headers(MmsMessageType.NOTIFICATION_IND)
    pdu = encode_pdu(MmsMessageType.NOTIFICATION_IND, headers)
    mtype, decoded, body = decode_pdu(pdu)
    assert mtype is MmsMessageType.NOTIFICATION_IND
    assert body is None
    assert decoded.transaction_id == "t1"
    assert decoded.content_location == "http://mmsc/x1"
    assert decoded.expiry == 3600
    assert decoded.message_size == 512
    assert decoded.message_class is MessageClass.PERSONAL


def test_missing_mandatory_header():
    with pytest.raises(MmsMissingHeader) as err:
        encode_pdu(MmsMessageType.NOTIFICATION_IND, MmsHeaders(transaction_id="x"))
    assert err.value.name in ("message_class", "message_size", "expiry", "content_location")


def test_send_req_requires_body():
    with pytest.raises(MmsMissingHeader):
        encode_pdu(MmsMessageType.SEND_REQ, minimal_headers(MmsMessageType.SEND_REQ), None)


def test_decode_empty_is_truncated():
    with pytest.raises(MmsTruncated):
        decode_pdu(b"")


def test_decode_unknown_message_type():
    with pytest.raises(MmsUnknownType):
        decode_pdu(b"\xff")
    with pytest.raises(MmsUnknownType):
        decode_pdu(b"\x8c\x7f")


def test_multipart_body_roundtrip():
    body = MmsBody(
        parts=(
            MmsPart("text/plain", b"hello", content_id="<p1>"),
            MmsPart("image/jpeg", bytes(range(100)), content_id="<p2>"),
        )
    )
    pdu = encode_pdu(MmsMessageType.SEND_REQ, minimal_headers(MmsMessageType.SEND_REQ), body)
    _, _, decoded = decode_pdu(pdu)
    assert decoded == body


def test_insert_address_token_roundtrip():
    headers = minimal_headers(MmsMessageType.SEND_REQ)  # from_ is None
    pdu = encode_pdu(MmsMessageType.SEND_REQ, headers, MmsBody(parts=(MmsPart("text/plain", b"x"),)))
    _, decoded, _ = decode_pdu(pdu)
    assert decoded.from_ is None


def test_unknown_header_preserved_as_opaque():
    headers = MmsHeaders(transaction_id="t1", status=MmsStatus.DEFERRED, extra=((0x20, b"\x83"),))
    pdu = encode_pdu(MmsMessageType.NOTIFYRESP_IND, headers)
    _, decoded, _ = decode_pdu(pdu)
    assert decoded.extra == ((0x20, b"\x83"),)


_statuses_by_type = {
    MmsMessageType.SEND_CONF: [MmsStatus.OK, MmsStatus.ERROR_UNSUPPORTED_MESSAGE, MmsStatus.ERROR_NETWORK_PROBLEM],
    MmsMessageType.NOTIFYRESP_IND: [MmsStatus.DEFERRED, MmsStatus.RETRIEVED, MmsStatus.REJECTED],
    MmsMessageType.RETRIEVE_CONF: [None, MmsStatus.OK],
    MmsMessageType.DELIVERY_IND: [MmsStatus.RETRIEVED, MmsStatus.EXPIRED, MmsStatus.REJECTED],
}

_text = st.text(alphabet=st.sampled_from("abcXYZ019 .:/+€"), min_size=1, max_size=24)


@st.composite
def pdus(draw):
    mtype = draw(st.sampled_from(list(MmsMessageType)))
    base = minimal_headers(mtype)
    from dataclasses import replace

    headers = replace(
        base,
        subject=draw(st.none() | _text),
        date=base.date or draw(st.none() | st.integers(1, 2**31)),
        message_id=base.message_id or draw(st.none() | _text),
    )
    if mtype in _statuses_by_type:
        status = draw(st.sampled_from(_statuses_by_type[mtype]))
        headers = replace(headers, status=status or base.status)
    if mtype is MmsMessageType.SEND_REQ:
        headers = replace(
            headers,
            to=tuple(draw(st.lists(_text, min_size=1, max_size=3))),
            from_=draw(st.none() | _text),
            delivery_report=draw(st.none() | st.booleans()),
        )
    if mtype is MmsMessageType.RETRIEVE_CONF:
        headers = replace(headers, report_allowed=draw(st.none() | st.booleans()))
    body = None
    if needs_body(mtype):
        parts = draw(
            st.lists(
                st.builds(
                    MmsPart,
                    content_type=st.sampled_from(
                        ["text/plain", "image/jpeg", "audio/amr", "application/octet-stream"]
                    ),
                    payload=st.binary(max_size=64),
                    content_id=st.none() | st.just("<cid>"),
                ),
                max_size=3,
            )
        )
        body = MmsBody(parts=tuple(parts))
    return mtype, headers, body


@settings(max_examples=250, deadline=None)
@given(pdus())
def test_roundtrip_all_seven_types(case):
    mtype, headers, body = case
    pdu = encode_pdu(mtype, headers, body)
    decoded_type, decoded_headers, decoded_body = decode_pdu(pdu)
    assert decoded_type is mtype
    assert decoded_headers == headers
    assert decoded_body == body


@settings(max_examples=300, deadline=None)
@given(st.binary(max_size=80))
def test_fuzz_decode_never_crashes(data):
    try:
        decode_pdu(data)
    except MmsDecodeError:
        pass
