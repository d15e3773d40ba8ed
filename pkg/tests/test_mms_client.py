import pytest

from cellgate.errors import MmsTransactionError
from cellgate.mms.client import MmsClient, MmsTransactionState
from cellgate.mms.codec import (
    MessageClass,
    MmsBody,
    MmsHeaders,
    MmsMessageType,
    MmsPart,
    MmsStatus,
    encode_pdu,
)

from mock_mmsc import MockMmsc


@pytest.fixture
def mmsc():
    server = MockMmsc()
    yield server
    server.close()


def make_client(mmsc, **kwargs):
    events = []
    client = MmsClient(
        mmsc.url,
        sender="+33600000001/TYPE=PLMN",
        on_event=lambda kind, payload: events.append((kind, payload)),
        **kwargs,
    )
    client.test_events = events
    return client


def send_headers():
    return MmsHeaders(to=("+33612345678/TYPE=PLMN",), subject="greetings")


def body_of(text=b"hello mms"):
    return MmsBody(parts=(MmsPart("text/plain", text),))


def test_send_confirmed(mmsc):
    client = make_client(mmsc)
    txn = client.send(send_headers(), body_of())
    assert txn.state is MmsTransactionState.CONFIRMED
    assert txn.message_id and txn.message_id.startswith("mid-")
    assert len(mmsc.send_reqs) == 1
    assert mmsc.validation_errors == []
    states = [s for s, _ in txn.history]
    assert states == ["send_req_sent", "confirmed"]


def test_send_error_status(mmsc):
    mmsc.send_status = MmsStatus.ERROR_UNSUPPORTED_MESSAGE
    client = make_client(mmsc)
    with pytest.raises(MmsTransactionError) as err:
        client.send(send_headers(), body_of())
    assert err.value.status is MmsStatus.ERROR_UNSUPPORTED_MESSAGE
    txn = list(client.transactions.values())[0]
    assert txn.state is MmsTransactionState.FAILED


def test_send_network_failure_retries_then_fails(mmsc):
    mmsc.respond = False
    client = make_client(mmsc)
    with pytest.raises(MmsTransactionError):
        client.send(send_headers(), body_of())
    txn = list(client.transactions.values())[0]
    assert txn.state is MmsTransactionState.FAILED
    assert "http-failure" in txn.error


def notification_pdu(mmsc, txid="ntx1", expiry=3600, path="/content/1"):
    location = mmsc.stage_content(path)
    return encode_pdu(
        MmsMessageType.NOTIFICATION_IND,
        MmsHeaders(
            transaction_id=txid,
            from_="+33699999999/TYPE=PLMN",
            message_class=MessageClass.PERSONAL,
            message_size=128,
            expiry=expiry,
            content_location=location,
        ),
    )


def test_full_receive_path_with_ack(mmsc):
    client = make_client(mmsc)
    txn = client.handle_notification(notification_pdu(mmsc))
    assert txn.state is MmsTransactionState.ACKNOWLEDGED
    states = [s for s, _ in txn.history]
    assert states == ["notified", "notify_resp_sent", "retrieving", "retrieved", "acknowledged"]
    assert len(mmsc.notify_resps) == 1
    assert len(mmsc.acknowledges) == 1
    assert txn.body.parts[0].payload == b"hello mms"
    kinds = [k for k, _ in client.test_events]
    assert "mms_notification" in kinds and "mms_retrieved" in kinds


def test_receive_without_ack_requested(mmsc):
    mmsc.report_allowed = False
    client = make_client(mmsc)
    txn = client.handle_notification(notification_pdu(mmsc))
    assert txn.state is MmsTransactionState.RETRIEVED
    assert mmsc.acknowledges == []


def test_duplicate_notification_idempotent(mmsc):
    client = make_client(mmsc)
    pdu = notification_pdu(mmsc)
    first = client.handle_notification(pdu)
    second = client.handle_notification(pdu)
    assert first is second
    assert len(client.transactions) == 1
    assert len(mmsc.notify_resps) == 1


def test_expired_notification_not_retrieved(mmsc):
    client = make_client(mmsc)
    txn = client.handle_notification(notification_pdu(mmsc, txid="exp1", expiry=0))
    assert txn.state is MmsTransactionState.FAILED
    assert txn.error == "expired"
    assert mmsc.notify_resps == []


def test_retrieve_404(mmsc):
    client = make_client(mmsc, auto_retrieve=False)
    pdu = notification_pdu(mmsc, txid="g1", path="/content/gone")
    del mmsc.content["/content/gone"]
    txn = client.handle_notification(pdu)
    assert txn.state is MmsTransactionState.NOTIFY_RESP_SENT
    with pytest.raises(MmsTransactionError):
        client.retrieve(txn)
    assert txn.state is MmsTransactionState.FAILED
    assert txn.error == "content-location-gone"


def test_malformed_push_ignored(mmsc):
    client = make_client(mmsc)
    assert client.handle_notification(b"\x00garbage") is None
    assert client.transactions == {}


def test_delivery_ind_correlation(mmsc):
    client = make_client(mmsc)
    txn = client.send(send_headers(), body_of())
    report = encode_pdu(
        MmsMessageType.DELIVERY_IND,
        MmsHeaders(
            message_id=txn.message_id,
            to=("+33612345678/TYPE=PLMN",),
            date=1700000000,
            status=MmsStatus.RETRIEVED,
        ),
    )
    payload = client.handle_delivery_ind(report)
    assert payload["correlated"] is True
    assert payload["status"] == "retrieved"
    unknown = encode_pdu(
        MmsMessageType.DELIVERY_IND,
        MmsHeaders(
            message_id="mid-unknown",
            to=("+336/TYPE=PLMN",),
            date=1700000000,
            status=MmsStatus.EXPIRED,
        ),
    )
    payload = client.handle_delivery_ind(unknown)
    assert payload["correlated"] is False
    assert client.handle_delivery_ind(b"junk") is None
