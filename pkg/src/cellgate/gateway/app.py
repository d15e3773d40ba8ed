"""HTTP face of the gateway: REST + server-sent events + audio WebSocket.

Everything under /v1 requires the bearer token; /healthz and the static
console do not.  Modem effects all run through the services facade, so they
serialize on the engine queue regardless of request concurrency.
"""

from __future__ import annotations

import asyncio
import base64
import hmac
import logging
import threading
import uuid
from contextlib import asynccontextmanager
from datetime import datetime, timezone
from typing import Optional

from fastapi import Depends, FastAPI, HTTPException, Request, WebSocket, WebSocketDisconnect
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response, StreamingResponse
from pydantic import BaseModel, Field
from starlette.concurrency import run_in_threadpool

from .. import sms as smslib
from ..calls import CallManager, CallState
from ..config import GatewayConfig, SurveillanceConfig
from ..engine import AtEngine, load_quirk_profiles
from ..errors import (
    AtError,
    CellgateError,
    CmeError,
    CmsError,
    InvalidCallState,
    MmsDecodeError,
    MmsTransactionError,
    ModemBusy,
    ModemNotReady,
    ServiceUnavailable,
    SmsSendError,
)
from ..events import EventBus
from ..mms.client import MmsClient
from ..mms.codec import MmsBody, MmsHeaders, MmsPart
from ..services import ModemServices
from ..transport import open_transport
from .share import ShareForbidden, SharePathError, ShareStore

logger = logging.getLogger(__name__)


class GatewayRuntime:
    """Owns the engine/services/call/MMS subsystems behind the HTTP app."""

    def __init__(self, config: GatewayConfig):
        self.config = config
        self.events = EventBus()
        self.share = ShareStore(config.share_root, own_owner=config.share_owner)
        self.surveillance = SurveillanceConfig(**config.surveillance.as_dict())
        self.engine: Optional[AtEngine] = None
        self.services: Optional[ModemServices] = None
        self.calls: Optional[CallManager] = None
        self.mms: Optional[MmsClient] = None
        self.init_error: Optional[str] = None
        self.ready = False
        self._audio_relays: "set[str]" = set()
        self._lock = threading.Lock()

    # -- lifecycle ----------------------------------------------------------

    def start(self) -> None:
        try:
            quirks = (
                load_quirk_profiles(self.config.quirk_profiles_path)
                if self.config.quirk_profiles_path
                else []
            )
            transport = open_transport(self.config.transport)
            self.engine = AtEngine(transport, quirk_profiles=quirks)
            self.services = ModemServices(
                self.engine,
                sim_pin=self.config.sim_pin,
                text_mode=self.config.sms_text_mode,
            )
            self.services.add_listener(self._on_service_event)
            self.services.init_modem()
            audio_addr = self._audio_addr_from_transport()
            self.calls = CallManager(
                self.engine,
                emit=lambda kind, payload: self.events.emit(kind, payload),
                rtp_bind=self.config.rtp_bind_tuple,
                audio_addr=audio_addr,
            )
            self.calls.start_urc_listener()
            if self.config.mmsc_url:
                self.mms = MmsClient(
                    self.config.mmsc_url,
                    sender=None,
                    deferred_retrieval=self.config.mms_deferred_retrieval,
                    on_event=self._on_mms_event,
                )
            self.ready = True
            self.init_error = None
            self.events.emit("modem_status", self.services.status().as_dict())
        except CellgateError as exc:
            self.init_error = str(exc)
            logger.error("modem initialization failed: %s", exc)
        except Exception as exc:  # transport refused etc.
            self.init_error = str(exc)
            logger.exception("gateway start failed")

    def _audio_addr_from_transport(self) -> "Optional[tuple[str, int]]":
        # The simulator contract puts the PCM side-channel two ports above
        # the AT port.  Real serial modems route audio out of band.
        kind, _, rest = self.config.transport.partition(":")
        if kind != "tcp":
            return None
        host, _, port = rest.rpartition(":")
        if not port.isdigit():
            return None
        return (host, int(port) + 2)

    def stop(self) -> None:
        if self.calls:
            self.calls.shutdown()
        if self.engine:
            self.engine.close()
        self.ready = False

    # -- event plumbing --------------------------------------------------------

    def _on_service_event(self, kind: str, payload: dict) -> None:
        self.events.emit(kind, payload)

    def _on_mms_event(self, kind: str, payload: dict) -> None:
        if kind in ("mms_notification", "mms_delivery"):
            self.events.emit(kind, payload)

    # -- guards ------------------------------------------------------------------

    def require_ready(self) -> ModemServices:
        if not self.ready or self.services is None:
            raise ModemNotReady(self.init_error or "modem not initialized")
        return self.services

    def require_calls(self) -> CallManager:
        self.require_ready()
        assert self.calls is not None
        return self.calls

    def require_mms(self) -> MmsClient:
        self.require_ready()
        if self.mms is None:
            raise ServiceUnavailable("no MMSC configured")
        return self.mms

    # -- service catalog -----------------------------------------------------------

    def published_services(self) -> "list[str]":
        services = self.require_ready()
        catalog = services.discover_capabilities()
        published = set(catalog.derived_services)
        if self.mms is None:
            published.discard("mms")
        if "sms" in published:
            published.add("surveillance")
        return sorted(published)

    # -- surveillance ----------------------------------------------------------------

    def dispatch_motion_alert(self) -> dict:
        config = self.surveillance
        if not config.enabled or not config.alert_number:
            return {"dispatched": False, "reason": "surveillance disabled"}
        services = self.require_ready()
        now = datetime.now(timezone.utc).isoformat(timespec="seconds")
        text = config.message_template.format(time=now)
        refs = services.send_sms(config.alert_number, text)
        self.events.emit(
            "service_alert",
            {"service": "surveillance", "to": config.alert_number, "text": text, "refs": refs},
        )
        return {"dispatched": True, "to": config.alert_number, "refs": refs}

    # -- audio relay bookkeeping --------------------------------------------------------

    def claim_audio_relay(self, call_id: str) -> bool:
        with self._lock:
            if call_id in self._audio_relays:
                return False
            self._audio_relays.add(call_id)
            return True

    def release_audio_relay(self, call_id: str) -> None:
        with self._lock:
            self._audio_relays.discard(call_id)


# --- request bodies -------------------------------------------------------------


class SmsSendRequest(BaseModel):
    to: str
    text: str


class MmsPartRequest(BaseModel):
    content_type: str
    text: Optional[str] = None
    data_base64: Optional[str] = None
    content_id: Optional[str] = None


class MmsSendRequest(BaseModel):
    to: "list[str]" = Field(min_length=1)
    subject: Optional[str] = None
    parts: "list[MmsPartRequest]" = Field(default_factory=list)


class RtpTarget(BaseModel):
    addr: str
    port: int


class DialRequest(BaseModel):
    to: str
    rtp: Optional[RtpTarget] = None


class AnswerRequest(BaseModel):
    rtp: Optional[RtpTarget] = None


class PhonebookWriteRequest(BaseModel):
    number: str
    text: str = ""


class SyncRequest(BaseModel):
    base: dict = Field(default_factory=dict)
    edits: dict = Field(default_factory=dict)


class SurveillanceRequest(BaseModel):
    alert_number: str
    enabled: bool = True
    message_template: str = "Motion detected at {time}"


def create_app(config: GatewayConfig, runtime: Optional[GatewayRuntime] = None) -> FastAPI:
    runtime = runtime or GatewayRuntime(config)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        await run_in_threadpool(runtime.start)
        yield
        runtime.stop()

    app = FastAPI(title="cellgate", lifespan=lifespan)
    app.state.runtime = runtime

    # -- auth ---------------------------------------------------------------

    def _token_ok(candidate: Optional[str]) -> bool:
        return bool(candidate) and hmac.compare_digest(candidate, config.auth_token)

    def auth(request: Request) -> None:
        header = request.headers.get("Authorization", "")
        if header.startswith("Bearer ") and _token_ok(header[7:]):
            return
        query_token = request.query_params.get("access_token") or request.query_params.get("token")
        if _token_ok(query_token):
            return
        raise HTTPException(status_code=401, detail="missing or invalid token")

    protected = [Depends(auth)]

    # -- error mapping ----------------------------------------------------------

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request, exc):
        return JSONResponse(status_code=400, content={"detail": exc.errors()})

    @app.exception_handler(CellgateError)
    async def cellgate_handler(request, exc: CellgateError):
        status = 500
        if isinstance(exc, (ModemNotReady, ServiceUnavailable)):
            status = 503
        elif isinstance(exc, (InvalidCallState, ModemBusy)):
            status = 409
        elif isinstance(exc, (SharePathError,)):
            status = 400
        elif isinstance(exc, ShareForbidden):
            status = 403
        elif isinstance(exc, (CmsError, CmeError, SmsSendError, MmsTransactionError)):
            status = 502
        elif isinstance(exc, smslib.SmsCodecError):
            status = 400
        return JSONResponse(status_code=status, content={"detail": str(exc)})

    # -- health ------------------------------------------------------------------

    @app.get("/healthz")
    async def healthz():
        return {"status": "ok", "modem_ready": runtime.ready, "init_error": runtime.init_error}

    # -- SMS ------------------------------------------------------------------------

    @app.post("/v1/sms", status_code=202, dependencies=protected)
    async def send_sms(body: SmsSendRequest):
        services = runtime.require_ready()
        refs = await run_in_threadpool(services.send_sms, body.to, body.text)
        return {"id": refs[0] if refs else None, "segments": len(refs), "refs": refs}

    @app.get("/v1/sms", dependencies=protected)
    async def list_sms(box: str = "inbox", storage: str = "SM"):
        services = runtime.require_ready()
        which = {"inbox": "all", "unread": "unread", "read": "read"}.get(box, "all")
        stored = await run_in_threadpool(services.list_messages, storage, which)
        return {"messages": [s.as_dict() for s in stored]}

    @app.delete("/v1/sms/{index}", dependencies=protected)
    async def delete_sms(index: int, storage: str = "SM"):
        services = runtime.require_ready()
        await run_in_threadpool(services.delete_message, storage, index)
        return {"deleted": index}

    # -- MMS ------------------------------------------------------------------------

    @app.post("/v1/mms", status_code=202, dependencies=protected)
    async def send_mms(body: MmsSendRequest):
        client = runtime.require_mms()
        parts = []
        for part in body.parts:
            if part.data_base64 is not None:
                payload = base64.b64decode(part.data_base64)
            elif part.text is not None:
                payload = part.text.encode("utf-8")
            else:
                raise HTTPException(status_code=400, detail="part needs text or data_base64")
            parts.append(
                MmsPart(content_type=part.content_type, payload=payload, content_id=part.content_id)
            )
        mms_body = MmsBody(parts=tuple(parts))
        txid = uuid.uuid4().hex[:12]
        headers = MmsHeaders(transaction_id=txid, to=tuple(body.to), subject=body.subject)

        def run_send():
            try:
                client.send(headers, mms_body)
            except MmsTransactionError as exc:
                logger.warning("MMS send failed: %s", exc)

        threading.Thread(target=run_send, daemon=True).start()
        return {"transaction_id": txid}

    @app.get("/v1/mms/{transaction_id}", dependencies=protected)
    async def get_mms(transaction_id: str):
        client = runtime.require_mms()
        txn = client.get(transaction_id)
        if txn is None:
            raise HTTPException(status_code=404, detail="unknown transaction")
        record = txn.as_dict()
        if txn.headers is not None:
            record["headers"] = {
                "from": txn.headers.from_,
                "to": list(txn.headers.to),
                "subject": txn.headers.subject,
                "content_location": txn.headers.content_location,
            }
        if txn.body is not None:
            record["parts"] = [
                {
                    "content_type": part.content_type,
                    "content_id": part.content_id,
                    "data_base64": base64.b64encode(part.payload).decode(),
                }
                for part in txn.body.parts
            ]
        return record

    @app.post("/v1/mms/notification", status_code=204, dependencies=protected)
    async def mms_notification(request: Request):
        client = runtime.require_mms()
        pdu = await request.body()

        def run_handle():
            try:
                client.handle_notification(pdu)
            except MmsDecodeError:
                logger.warning("undecodable MMS push")

        threading.Thread(target=run_handle, daemon=True).start()
        return Response(status_code=204)

    # -- calls -------------------------------------------------------------------------

    @app.post("/v1/calls", status_code=201, dependencies=protected)
    async def dial(body: DialRequest):
        manager = runtime.require_calls()
        rtp_remote = (body.rtp.addr, body.rtp.port) if body.rtp else None
        session = await run_in_threadpool(manager.dial, body.to, rtp_remote)
        return session.as_dict()

    @app.get("/v1/calls/{call_id}", dependencies=protected)
    async def call_status(call_id: str):
        manager = runtime.require_calls()
        session = manager.get(call_id)
        if session is None:
            raise HTTPException(status_code=404, detail="unknown call")
        return session.as_dict()

    @app.post("/v1/calls/{call_id}/answer", dependencies=protected)
    async def answer(call_id: str, body: Optional[AnswerRequest] = None):
        manager = runtime.require_calls()
        rtp_remote = None
        if body and body.rtp:
            rtp_remote = (body.rtp.addr, body.rtp.port)
        session = await run_in_threadpool(manager.answer, call_id, rtp_remote)
        return session.as_dict()

    @app.post("/v1/calls/{call_id}/hangup", dependencies=protected)
    async def hangup(call_id: str):
        manager = runtime.require_calls()
        session = await run_in_threadpool(manager.hangup, call_id)
        return session.as_dict()

    # -- events (SSE) ---------------------------------------------------------------------

    @app.get("/v1/events", dependencies=protected)
    async def events(request: Request):
        last_seq: Optional[int] = None
        header = request.headers.get("Last-Event-ID") or request.query_params.get("last_event_id")
        if header:
            try:
                last_seq = int(header)
            except ValueError:
                last_seq = None
        sub = runtime.events.subscribe(last_seq)

        def stream():
            try:
                yield ": connected\n\n"
                while True:
                    event = sub.get(timeout=0.5)
                    if event is None:
                        yield ": keep-alive\n\n"
                        continue
                    yield event.sse()
            finally:
                sub.close()

        return StreamingResponse(stream(), media_type="text/event-stream")

    # -- modem / services --------------------------------------------------------------------

    @app.get("/v1/modem/status", dependencies=protected)
    async def modem_status():
        services = runtime.require_ready()
        status = await run_in_threadpool(services.status)
        return status.as_dict()

    @app.get("/v1/services", dependencies=protected)
    async def services_catalog():
        published = await run_in_threadpool(runtime.published_services)
        return {"services": published}

    @app.put("/v1/services/surveillance", dependencies=protected)
    async def put_surveillance(body: SurveillanceRequest):
        try:
            body.message_template.format(time="probe")
        except (KeyError, IndexError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=f"bad template: {exc}")
        runtime.surveillance = SurveillanceConfig(
            alert_number=body.alert_number,
            enabled=body.enabled,
            message_template=body.message_template,
        )
        return runtime.surveillance.as_dict()

    @app.get("/v1/services/surveillance", dependencies=protected)
    async def get_surveillance():
        return runtime.surveillance.as_dict()

    @app.post("/v1/services/surveillance/motion", status_code=202, dependencies=protected)
    async def motion():
        return await run_in_threadpool(runtime.dispatch_motion_alert)

    # -- phonebook ------------------------------------------------------------------------------

    @app.get("/v1/phonebook", dependencies=protected)
    async def phonebook_list(prefix: Optional[str] = None):
        services = runtime.require_ready()

        def read():
            services.phonebook_select("SM")
            if prefix is not None:
                return services.phonebook_find(prefix)
            limits = services.phonebook_limits()
            return services.phonebook_read(limits.first, limits.last)

        entries = await run_in_threadpool(read)
        return {"entries": [e.as_dict() for e in entries]}

    @app.get("/v1/phonebook/{index}", dependencies=protected)
    async def phonebook_get(index: int):
        services = runtime.require_ready()
        entries = await run_in_threadpool(services.phonebook_read, index)
        if not entries:
            raise HTTPException(status_code=404, detail="no entry at index")
        return entries[0].as_dict()

    @app.put("/v1/phonebook", status_code=201, dependencies=protected)
    async def phonebook_add(body: PhonebookWriteRequest):
        services = runtime.require_ready()
        await run_in_threadpool(services.phonebook_write, body.number, body.text)
        return {"written": True}

    @app.put("/v1/phonebook/{index}", dependencies=protected)
    async def phonebook_put(index: int, body: PhonebookWriteRequest):
        services = runtime.require_ready()
        await run_in_threadpool(services.phonebook_write, body.number, body.text, index)
        return {"written": True, "index": index}

    @app.delete("/v1/phonebook/{index}", dependencies=protected)
    async def phonebook_delete(index: int):
        services = runtime.require_ready()
        await run_in_threadpool(services.phonebook_delete, index)
        return {"deleted": index}

    # -- snapshot / sync ---------------------------------------------------------------------------

    @app.get("/v1/snapshot", dependencies=protected)
    async def snapshot():
        services = runtime.require_ready()
        return await run_in_threadpool(services.snapshot)

    @app.post("/v1/sync", dependencies=protected)
    async def sync(body: SyncRequest):
        services = runtime.require_ready()
        return await run_in_threadpool(services.sync, body.base, body.edits)

    # -- share ---------------------------------------------------------------------------------------

    @app.get("/v1/share/{owner}", dependencies=protected)
    async def share_list(owner: str):
        entries = await run_in_threadpool(runtime.share.list, owner)
        return {"entries": [e.as_dict() for e in entries]}

    @app.get("/v1/share/{owner}/{path:path}", dependencies=protected)
    async def share_get(owner: str, path: str):
        try:
            data, content_type = await run_in_threadpool(runtime.share.get, owner, path)
        except KeyError:
            raise HTTPException(status_code=404, detail="no such file")
        return Response(content=data, media_type=content_type)

    @app.put("/v1/share/{owner}/{path:path}", status_code=201, dependencies=protected)
    async def share_put(owner: str, path: str, request: Request):
        data = await request.body()
        content_type = request.headers.get("Content-Type")
        entry = await run_in_threadpool(runtime.share.put, owner, path, data, content_type)
        return entry.as_dict()

    # -- audio relay (console) ----------------------------------------------------------------------

    @app.websocket("/v1/calls/{call_id}/audio")
    async def call_audio(ws: WebSocket, call_id: str):
        token = ws.query_params.get("token") or ws.query_params.get("access_token")
        header = ws.headers.get("Authorization", "")
        if header.startswith("Bearer "):
            token = token or header[7:]
        if not (token and hmac.compare_digest(token, config.auth_token)):
            await ws.close(code=4401)
            return
        manager = runtime.calls
        session = manager.get(call_id) if manager else None
        if session is None:
            await ws.close(code=4404)
            return
        if session.state is not CallState.ACTIVE:
            await ws.close(code=4409)
            return
        if not runtime.claim_audio_relay(call_id):
            await ws.close(code=4409)
            return
        await ws.accept()
        loop = asyncio.get_running_loop()
        frames: "asyncio.Queue[bytes]" = asyncio.Queue(maxsize=64)

        def tap(pcm: bytes) -> None:
            def push():
                if not frames.full():
                    frames.put_nowait(pcm)

            loop.call_soon_threadsafe(push)

        manager.set_tap(call_id, tap)

        async def pump_out():
            while session.state is CallState.ACTIVE:
                try:
                    frame = await asyncio.wait_for(frames.get(), timeout=0.5)
                except asyncio.TimeoutError:
                    continue
                await ws.send_bytes(frame)

        async def pump_in():
            while True:
                data = await ws.receive_bytes()
                await run_in_threadpool(manager.write_audio, call_id, data)

        try:
            done, pending = await asyncio.wait(
                [asyncio.create_task(pump_out()), asyncio.create_task(pump_in())],
                return_when=asyncio.FIRST_COMPLETED,
            )
            for task in pending:
                task.cancel()
            for task in done:
                exc = task.exception()
                if exc is not None and not isinstance(exc, WebSocketDisconnect):
                    logger.debug("audio relay ended: %s", exc)
        except WebSocketDisconnect:
            pass
        finally:
            manager.set_tap(call_id, None)
            runtime.release_audio_relay(call_id)
            try:
                await ws.close()
            except Exception:
                pass

    # -- console static files --------------------------------------------------------------------------

    _mount_console(app)

    return app


def _mount_console(app: FastAPI) -> None:
    import os

    from fastapi.staticfiles import StaticFiles

    candidates = [
        os.environ.get("CELLGATE_CONSOLE_DIR", ""),
        os.path.join(os.getcwd(), "frontend", "dist"),
    ]
    for candidate in candidates:
        if candidate and os.path.isdir(candidate):
            @app.get("/console/config.json")
            async def console_config():
                return {"apiBase": ""}

            app.mount("/console", StaticFiles(directory=candidate, html=True), name="console")
            return
