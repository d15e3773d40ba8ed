"""In-process MMSC double for transaction tests.

Validates incoming m-send-req PDUs with its own minimal header walk (kept
independent of the production codec), answers m-send-conf, serves retrieve
content, and records every notify-resp / acknowledge it receives.
"""

import threading
import uuid
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from cellgate.mms.codec import (
    MmsBody,
    MmsHeaders,
    MmsMessageType,
    MmsPart,
    MmsStatus,
    encode_pdu,
)

# --- independent octet-level header walk (tests' own table) -------------------

FIELD_NAMES = {
    0x81: "bcc",
    0x82: "cc",
    0x83: "content-location",
    0x84: "content-type",
    0x85: "date",
    0x86: "delivery-report",
    0x88: "expiry",
    0x89: "from",
    0x8A: "message-class",
    0x8B: "message-id",
    0x8C: "message-type",
    0x8D: "version",
    0x8E: "message-size",
    0x91: "report-allowed",
    0x92: "response-status",
    0x95: "status",
    0x96: "subject",
    0x97: "to",
    0x98: "transaction-id",
    0x99: "retrieve-status",
}

MESSAGE_TYPE_NAMES = {
    0x80: "m-send-req",
    0x81: "m-send-conf",
    0x82: "m-notification-ind",
    0x83: "m-notifyresp-ind",
    0x84: "m-retrieve-conf",
    0x85: "m-acknowledge-ind",
    0x86: "m-delivery-ind",
}


def walk_headers(pdu: bytes):
    """Yield (field-name, value_bytes) pairs until content-type or end."""
    pos = 0
    out = []
    while pos < len(pdu):
        tag = pdu[pos]
        pos += 1
        name = FIELD_NAMES.get(tag, f"0x{tag:02X}")
        first = pdu[pos] if pos < len(pdu) else None
        if first is None:
            break
        if first <= 30:  # value-length-prefixed
            end = pos + 1 + first
            value = pdu[pos:end]
            pos = end
        elif first == 31:
            length = 0
            pos += 1
            while pdu[pos] & 0x80:
                length = (length << 7) | (pdu[pos] & 0x7F)
                pos += 1
            length = (length << 7) | (pdu[pos] & 0x7F)
            pos += 1
            value = pdu[pos:pos + length]
            pos += length
        elif first <= 127:  # null-terminated text
            end = pdu.index(b"\x00", pos)
            value = pdu[pos:end]
            pos = end + 1
        else:  # single short value
            value = pdu[pos:pos + 1]
            pos += 1
        out.append((name, value))
        if name == "content-type":
            break
    return out


MANDATORY_SEND_REQ = {"message-type", "transaction-id", "version", "from", "to", "content-type"}


class MockMmsc:
    def __init__(self, *, report_allowed=None, send_status=MmsStatus.OK, respond=True):
        self.report_allowed = report_allowed
        self.send_status = send_status
        self.respond = respond
        self.send_reqs = []
        self.notify_resps = []
        self.acknowledges = []
        self.validation_errors = []
        self.content = {}  # path -> (headers, body)
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, fmt, *args):
                pass

            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                pdu = self.rfile.read(length)
                if not outer.respond:
                    self.close_connection = True
                    return
                mtype = pdu[1] if len(pdu) >= 2 else None
                fields = walk_headers(pdu)
                names = {name for name, _ in fields}
                if mtype == 0x80:  # m-send-req
                    outer.send_reqs.append(pdu)
                    missing = MANDATORY_SEND_REQ - names
                    if missing:
                        outer.validation_errors.append(sorted(missing))
                    txid = dict(fields).get("transaction-id", b"").decode()
                    message_id = f"mid-{uuid.uuid4().hex[:8]}"
                    conf = encode_pdu(
                        MmsMessageType.SEND_CONF,
                        MmsHeaders(
                            transaction_id=txid,
                            status=outer.send_status,
                            message_id=message_id if outer.send_status is MmsStatus.OK else None,
                        ),
                    )
                    self._reply(conf)
                elif mtype == 0x83:
                    outer.notify_resps.append(pdu)
                    self.send_response(204)
                    self.end_headers()
                elif mtype == 0x85:
                    outer.acknowledges.append(pdu)
                    self.send_response(204)
                    self.end_headers()
                else:
                    self.send_response(400)
                    self.end_headers()

            def do_GET(self):
                entry = outer.content.get(self.path)
                if entry is None:
                    self.send_response(404)
                    self.end_headers()
                    return
                self._reply(entry)

            def _reply(self, pdu):
                self.send_response(200)
                self.send_header("Content-Type", "application/vnd.wap.mms-message")
                self.send_header("Content-Length", str(len(pdu)))
                self.end_headers()
                self.wfile.write(pdu)

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()

    @property
    def url(self):
        host, port = self._server.server_address
        return f"http://{host}:{port}/mms"

    def stage_content(self, path, message_id="mid-staged", text=b"hello mms"):
        conf = encode_pdu(
            MmsMessageType.RETRIEVE_CONF,
            MmsHeaders(
                message_id=message_id,
                from_="+33699999999/TYPE=PLMN",
                date=1700000000,
                report_allowed=self.report_allowed,
            ),
            MmsBody(parts=(MmsPart(content_type="text/plain", payload=text),)),
        )
        self.content[path] = conf
        host, port = self._server.server_address
        return f"http://{host}:{port}{path}"

    def close(self):
        self._server.shutdown()
        self._server.server_close()
