"""MMS send/receive transaction machines over HTTP to an MMSC.

States follow the client-transaction exchange: a send is req → conf; a
receive is notification → notify-resp → retrieve → (acknowledge).  Every
transition is timestamped and validated against the allowed edges.
"""

from __future__ import annotations

import enum
import logging
import threading
import time
import uuid
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import httpx

from ..errors import MmsDecodeError, MmsTransactionError
from .codec import (
    MmsBody,
    MmsHeaders,
    MmsMessageType,
    MmsStatus,
    decode_pdu,
    encode_pdu,
)

logger = logging.getLogger(__name__)

CONTENT_TYPE = "application/vnd.wap.mms-message"
HTTP_TIMEOUT = 5.0


class MmsTransactionState(enum.Enum):
    IDLE = "idle"
    SEND_REQ_SENT = "send_req_sent"
    CONFIRMED = "confirmed"
    FAILED = "failed"
    NOTIFIED = "notified"
    NOTIFY_RESP_SENT = "notify_resp_sent"
    RETRIEVING = "retrieving"
    RETRIEVED = "retrieved"
    ACKNOWLEDGED = "acknowledged"


_EDGES = {
    MmsTransactionState.IDLE: {MmsTransactionState.SEND_REQ_SENT, MmsTransactionState.NOTIFIED},
    MmsTransactionState.SEND_REQ_SENT: {MmsTransactionState.CONFIRMED, MmsTransactionState.FAILED},
    MmsTransactionState.NOTIFIED: {MmsTransactionState.NOTIFY_RESP_SENT, MmsTransactionState.FAILED},
    MmsTransactionState.NOTIFY_RESP_SENT: {MmsTransactionState.RETRIEVING, MmsTransactionState.FAILED},
    MmsTransactionState.RETRIEVING: {MmsTransactionState.RETRIEVED, MmsTransactionState.FAILED},
    MmsTransactionState.RETRIEVED: {MmsTransactionState.ACKNOWLEDGED},
    MmsTransactionState.CONFIRMED: set(),
    MmsTransactionState.FAILED: set(),
    MmsTransactionState.ACKNOWLEDGED: set(),
}


@dataclass
class MmsTransaction:
    id: str
    direction: str  # "send" | "receive"
    state: MmsTransactionState = MmsTransactionState.IDLE
    message_id: Optional[str] = None
    headers: Optional[MmsHeaders] = None
    body: Optional[MmsBody] = None
    error: Optional[str] = None
    history: "list[tuple[str, float]]" = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "transaction_id": self.id,
            "direction": self.direction,
            "state": self.state.value,
            "message_id": self.message_id,
            "error": self.error,
            "history": [{"state": s, "at": t} for s, t in self.history],
        }


class MmsClient:
    """Owns the transaction store; transitions are serialized internally."""

    def __init__(
        self,
        mmsc_url: str,
        *,
        sender: Optional[str] = None,
        version: "tuple[int, int]" = (1, 2),
        deferred_retrieval: bool = True,
        auto_retrieve: bool = True,
        on_event: Optional[Callable[[str, dict], None]] = None,
        http: Optional[httpx.Client] = None,
        clock: Callable[[], float] = time.time,
    ):
        self.mmsc_url = mmsc_url
        self.sender = sender
        self.version = version
        self.deferred_retrieval = deferred_retrieval
        self.auto_retrieve = auto_retrieve
        self._on_event = on_event
        self._http = http or httpx.Client(timeout=HTTP_TIMEOUT)
        self._clock = clock
        self._lock = threading.RLock()
        self.transactions: "dict[str, MmsTransaction]" = {}
        self._sent_message_ids: "set[str]" = set()

    # -- helpers -----------------------------------------------------------

    def _transition(self, txn: MmsTransaction, new: MmsTransactionState) -> None:
        with self._lock:
            if new not in _EDGES[txn.state]:
                raise MmsTransactionError(f"illegal transition {txn.state.value} -> {new.value}")
            txn.state = new
            txn.history.append((new.value, self._clock()))

    def _fail(self, txn: MmsTransaction, reason: str) -> None:
        with self._lock:
            if txn.state is not MmsTransactionState.FAILED:
                txn.state = MmsTransactionState.FAILED
                txn.history.append((MmsTransactionState.FAILED.value, self._clock()))
            txn.error = reason

    def _emit(self, kind: str, payload: dict) -> None:
        if self._on_event:
            try:
                self._on_event(kind, payload)
            except Exception:
                logger.exception("event callback failed")

    def _post(self, url: str, pdu: bytes) -> httpx.Response:
        last_exc = None
        for attempt in (1, 2):  # one retry per HTTP leg
            try:
                return self._http.post(
                    url, content=pdu, headers={"Content-Type": CONTENT_TYPE}, timeout=HTTP_TIMEOUT
                )
            except httpx.HTTPError as exc:
                last_exc = exc
                logger.warning("MMSC POST attempt %d failed: %s", attempt, exc)
        raise MmsTransactionError(f"http-failure: {last_exc}")

    def _get(self, url: str) -> httpx.Response:
        last_exc = None
        for attempt in (1, 2):
            try:
                return self._http.get(url, timeout=HTTP_TIMEOUT)
            except httpx.HTTPError as exc:
                last_exc = exc
                logger.warning("MMSC GET attempt %d failed: %s", attempt, exc)
        raise MmsTransactionError(f"http-failure: {last_exc}")

    # -- send side -----------------------------------------------------------

    def send(self, headers: MmsHeaders, body: MmsBody) -> MmsTransaction:
        """Run the full send exchange; returns the confirmed transaction.

        On failure the transaction is left in state failed and the error is
        re-raised for the caller to surface.
        """
        txid = headers.transaction_id or uuid.uuid4().hex[:12]
        if headers.transaction_id is None:
            headers = self._with(headers, transaction_id=txid)
        if headers.from_ is None and self.sender:
            headers = self._with(headers, from_=self.sender)
        headers = self._with(headers, version=self.version)
        txn = MmsTransaction(id=txid, direction="send", headers=headers, body=body)
        with self._lock:
            self.transactions[txid] = txn
        pdu = encode_pdu(MmsMessageType.SEND_REQ, headers, body)
        self._transition(txn, MmsTransactionState.SEND_REQ_SENT)
        try:
            response = self._post(self.mmsc_url, pdu)
        except MmsTransactionError as exc:
            self._fail(txn, str(exc))
            raise
        if response.status_code >= 400:
            self._fail(txn, f"http-failure: status {response.status_code}")
            raise MmsTransactionError(f"http-failure: status {response.status_code}")
        try:
            mtype, conf, _ = decode_pdu(response.content)
        except MmsDecodeError as exc:
            self._fail(txn, f"decode-failure: {exc}")
            raise MmsTransactionError(f"decode-failure: {exc}") from exc
        if mtype is not MmsMessageType.SEND_CONF:
            self._fail(txn, f"unexpected reply type {mtype.name}")
            raise MmsTransactionError(f"unexpected reply type {mtype.name}")
        if conf.status is not MmsStatus.OK:
            status = conf.status.value if conf.status else "unknown"
            self._fail(txn, f"mmsc-status-error: {status}")
            raise MmsTransactionError(f"mmsc-status-error: {status}", status=conf.status)
        txn.message_id = conf.message_id
        if conf.message_id:
            with self._lock:
                self._sent_message_ids.add(conf.message_id)
        self._transition(txn, MmsTransactionState.CONFIRMED)
        return txn

    # -- receive side ----------------------------------------------------------

    def handle_notification(self, pdu: bytes) -> Optional[MmsTransaction]:
        """Ingest an m-notification-ind pushed to the gateway.

        Sends the notify-resp and, when auto_retrieve is on, runs the
        retrieval in-line.  Duplicate transaction ids are idempotent.
        """
        try:
            mtype, headers, _ = decode_pdu(pdu)
        except MmsDecodeError as exc:
            logger.warning("undecodable MMS push ignored: %s", exc)
            return None
        if mtype is MmsMessageType.DELIVERY_IND:
            self.handle_delivery_ind_headers(headers)
            return None
        if mtype is not MmsMessageType.NOTIFICATION_IND:
            logger.warning("unexpected MMS push type %s ignored", mtype.name)
            return None
        txid = headers.transaction_id or uuid.uuid4().hex[:12]
        with self._lock:
            existing = self.transactions.get(txid)
            if existing is not None:
                return existing
            txn = MmsTransaction(id=txid, direction="receive", headers=headers)
            self.transactions[txid] = txn
        self._transition(txn, MmsTransactionState.NOTIFIED)
        self._emit(
            "mms_notification",
            {
                "transaction_id": txid,
                "from": headers.from_,
                "size": headers.message_size,
                "content_location": headers.content_location,
            },
        )
        if headers.expiry is not None and headers.expiry <= 0:
            self._fail(txn, "expired")
            return txn
        status = MmsStatus.DEFERRED if self.deferred_retrieval else MmsStatus.RETRIEVED
        resp = MmsHeaders(transaction_id=txid, version=self.version, status=status)
        try:
            self._post(self.mmsc_url, encode_pdu(MmsMessageType.NOTIFYRESP_IND, resp))
        except MmsTransactionError as exc:
            self._fail(txn, str(exc))
            return txn
        self._transition(txn, MmsTransactionState.NOTIFY_RESP_SENT)
        if self.auto_retrieve:
            try:
                self.retrieve(txn)
            except MmsTransactionError:
                pass  # state already failed with the reason recorded
        return txn

    def retrieve(self, txn: MmsTransaction) -> "tuple[MmsHeaders, Optional[MmsBody]]":
        if txn.state not in (MmsTransactionState.NOTIFY_RESP_SENT, MmsTransactionState.NOTIFIED):
            raise MmsTransactionError(f"cannot retrieve in state {txn.state.value}")
        location = txn.headers.content_location if txn.headers else None
        if not location:
            self._fail(txn, "no content location")
            raise MmsTransactionError("no content location")
        if txn.state is MmsTransactionState.NOTIFIED:
            self._transition(txn, MmsTransactionState.NOTIFY_RESP_SENT)
        self._transition(txn, MmsTransactionState.RETRIEVING)
        try:
            response = self._get(location)
        except MmsTransactionError as exc:
            self._fail(txn, str(exc))
            raise
        if response.status_code == 404:
            self._fail(txn, "content-location-gone")
            raise MmsTransactionError("content-location-gone")
        if response.status_code >= 400:
            self._fail(txn, f"http-failure: status {response.status_code}")
            raise MmsTransactionError(f"http-failure: status {response.status_code}")
        try:
            mtype, headers, body = decode_pdu(response.content)
        except MmsDecodeError as exc:
            self._fail(txn, f"decode-failure: {exc}")
            raise MmsTransactionError(f"decode-failure: {exc}") from exc
        if mtype is not MmsMessageType.RETRIEVE_CONF:
            self._fail(txn, f"unexpected retrieve reply {mtype.name}")
            raise MmsTransactionError(f"unexpected retrieve reply {mtype.name}")
        with self._lock:
            txn.message_id = headers.message_id or txn.message_id
            txn.body = body
            txn.headers = self._merge_retrieved(txn.headers, headers)
        self._transition(txn, MmsTransactionState.RETRIEVED)
        self._emit(
            "mms_retrieved",
            {"transaction_id": txn.id, "message_id": txn.message_id, "from": headers.from_},
        )
        # Acknowledge unless the conf carries an explicit no-report indication
        # (absent means requested; only "report not allowed" suppresses it).
        if headers.report_allowed is None or headers.report_allowed:
            ack = MmsHeaders(transaction_id=txn.id, version=self.version)
            try:
                self._post(self.mmsc_url, encode_pdu(MmsMessageType.ACKNOWLEDGE_IND, ack))
                self._transition(txn, MmsTransactionState.ACKNOWLEDGED)
            except MmsTransactionError as exc:
                logger.warning("acknowledge failed: %s", exc)
        return txn.headers, body

    def handle_delivery_ind(self, pdu: bytes) -> Optional[dict]:
        try:
            mtype, headers, _ = decode_pdu(pdu)
        except MmsDecodeError as exc:
            logger.warning("undecodable delivery report ignored: %s", exc)
            return None
        if mtype is not MmsMessageType.DELIVERY_IND:
            return None
        return self.handle_delivery_ind_headers(headers)

    def handle_delivery_ind_headers(self, headers: MmsHeaders) -> dict:
        with self._lock:
            correlated = headers.message_id in self._sent_message_ids
        payload = {
            "message_id": headers.message_id,
            "status": headers.status.value if headers.status else None,
            "to": list(headers.to),
            "correlated": correlated,
        }
        self._emit("mms_delivery", payload)
        return payload

    def get(self, txid: str) -> Optional[MmsTransaction]:
        with self._lock:
            return self.transactions.get(txid)

    @staticmethod
    def _with(headers: MmsHeaders, **kwargs) -> MmsHeaders:
        return replace(headers, **kwargs)

    @staticmethod
    def _merge_retrieved(original: Optional[MmsHeaders], retrieved: MmsHeaders) -> MmsHeaders:
        """Adopt the retrieve-conf headers, keeping the notification's
        transaction id and content location for traceability."""
        if original is None:
            return retrieved
        return replace(
            retrieved,
            transaction_id=retrieved.transaction_id or original.transaction_id,
            content_location=retrieved.content_location or original.content_location,
            expiry=original.expiry,
            message_size=original.message_size,
        )
