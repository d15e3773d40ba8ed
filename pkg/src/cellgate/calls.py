"""Voice call lifecycle and the PCM-to-RTP audio bridge.

One simultaneous call.  Incoming calls are announced by ring URCs; dialing
uses the V.250 D command with a trailing ';' to select voice.  While a call
is active, two pump threads move audio: modem PCM frames out as µ-law RTP
packets, inbound RTP through a small jitter buffer back to the modem.  An
optional per-call tap mirrors the PCM both ways for the console relay.
"""

from __future__ import annotations

import enum
import logging
import socket
import threading
import uuid
from dataclasses import dataclass, field
from typing import Callable, Optional

from .atproto import AtCommand, CommandKind, FinalCode, LONG_TIMEOUT
from .audio import FRAME_BYTES, pcm_to_ulaw, ulaw_to_pcm
from .engine import AtEngine
from .errors import AtError, InvalidCallState, ModemBusy
from .rtp import JitterBuffer, RtpSession
from .sms import Address

logger = logging.getLogger(__name__)


class CallState(enum.Enum):
    IDLE = "idle"
    DIALING = "dialing"
    RINGING = "ringing"
    ACTIVE = "active"
    TERMINATED = "terminated"


_LIVE_STATES = (CallState.DIALING, CallState.RINGING, CallState.ACTIVE)

_ALLOWED = {
    CallState.IDLE: {CallState.DIALING, CallState.RINGING, CallState.TERMINATED},
    CallState.DIALING: {CallState.ACTIVE, CallState.TERMINATED},
    CallState.RINGING: {CallState.ACTIVE, CallState.TERMINATED},
    CallState.ACTIVE: {CallState.TERMINATED},
    CallState.TERMINATED: set(),
}


@dataclass
class CallSession:
    id: str
    direction: str  # "outgoing" | "incoming"
    peer: Optional[str] = None
    state: CallState = CallState.IDLE
    cause: Optional[str] = None
    incoming_info: Optional[dict] = None
    rtp_local: "Optional[tuple[str, int]]" = None
    rtp_remote: "Optional[tuple[str, int]]" = None
    rtp_sent: int = 0
    rtp_received: int = 0
    history: "list[str]" = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "call_id": self.id,
            "direction": self.direction,
            "peer": self.peer,
            "state": self.state.value,
            "cause": self.cause,
            "incoming_info": self.incoming_info,
            "rtp": (
                {"addr": self.rtp_local[0], "port": self.rtp_local[1], "payload_type": 0}
                if self.rtp_local
                else None
            ),
            "stats": {"rtp_sent": self.rtp_sent, "rtp_received": self.rtp_received},
        }


class AudioBridge:
    """Pumps one call's audio between the modem byte stream and RTP."""

    def __init__(
        self,
        session: CallSession,
        modem_sock: socket.socket,
        rtp: RtpSession,
        on_audio_lost: Callable[[], None],
        tap: Callable[[bytes], None] = None,
    ):
        self.session = session
        self.modem_sock = modem_sock
        self.rtp = rtp
        self.jitter = JitterBuffer(depth=3)
        self.tap = tap
        self._on_audio_lost = on_audio_lost
        self._stop = threading.Event()
        self._threads = [
            threading.Thread(target=self._pump_out, name="bridge-out", daemon=True),
            threading.Thread(target=self._pump_in, name="bridge-in", daemon=True),
        ]

    def start(self) -> None:
        for t in self._threads:
            t.start()

    def stop(self) -> None:
        self._stop.set()
        try:
            self.modem_sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        try:
            self.modem_sock.close()
        except OSError:
            pass
        self.rtp.close()

    def write_to_modem(self, pcm: bytes) -> bool:
        """Console-relay input path (already 16-bit 8 kHz PCM)."""
        if self._stop.is_set():
            return False
        try:
            self.modem_sock.sendall(pcm)
            return True
        except OSError:
            return False

    def _read_frame(self) -> Optional[bytes]:
        buf = b""
        while len(buf) < FRAME_BYTES:
            if self._stop.is_set():
                return None
            try:
                chunk = self.modem_sock.recv(FRAME_BYTES - len(buf))
            except socket.timeout:
                continue
            except OSError:
                return None
            if not chunk:
                return None
            buf += chunk
        return buf

    def _pump_out(self) -> None:
        self.modem_sock.settimeout(0.5)
        while not self._stop.is_set():
            frame = self._read_frame()
            if frame is None:
                if not self._stop.is_set():
                    self._on_audio_lost()
                return
            if self.tap:
                try:
                    self.tap(frame)
                except Exception:
                    logger.debug("audio tap failed", exc_info=True)
            if self.rtp.send_payload(pcm_to_ulaw(frame)):
                self.session.rtp_sent += 1

    def _pump_in(self) -> None:
        while not self._stop.is_set():
            pkt = self.rtp.recv_packet()
            if pkt is None:
                continue
            if pkt.payload_type != self.rtp.payload_type:
                continue
            self.session.rtp_received += 1
            for ordered in self.jitter.push(pkt):
                pcm = ulaw_to_pcm(ordered.payload)
                try:
                    self.modem_sock.sendall(pcm)
                except OSError:
                    return


class CallManager:
    def __init__(
        self,
        engine: AtEngine,
        *,
        emit: Callable[[str, dict], None] = lambda kind, payload: None,
        rtp_bind: "tuple[str, int]" = ("127.0.0.1", 0),
        audio_addr: "Optional[tuple[str, int]]" = None,
    ):
        self.engine = engine
        self.emit = emit
        self.rtp_bind = rtp_bind
        self.audio_addr = audio_addr
        self.sessions: "dict[str, CallSession]" = {}
        self._bridges: "dict[str, AudioBridge]" = {}
        self._taps: "dict[str, Callable[[bytes], None]]" = {}
        self._lock = threading.RLock()
        self._urc_thread: Optional[threading.Thread] = None

    # -- lifecycle -------------------------------------------------------------

    def start_urc_listener(self) -> None:
        if self._urc_thread is not None:
            return
        sub = self.engine.subscribe_urcs()

        def pump():
            for urc in sub:
                try:
                    self.on_urc(urc)
                except Exception:
                    logger.exception("call URC handling failed: %s", urc)

        self._urc_thread = threading.Thread(target=pump, name="call-urc", daemon=True)
        self._urc_thread.start()

    def shutdown(self) -> None:
        with self._lock:
            live = [s for s in self.sessions.values() if s.state in _LIVE_STATES]
        for session in live:
            try:
                self.hangup(session.id)
            except AtError:
                pass

    # -- state machine helpers ----------------------------------------------------

    def _transition(self, session: CallSession, new: CallState, cause: Optional[str] = None) -> None:
        with self._lock:
            if session.state is new:
                return
            if new not in _ALLOWED[session.state]:
                raise InvalidCallState(f"{session.state.value} -> {new.value}")
            session.state = new
            session.history.append(new.value)
            if cause and new is CallState.TERMINATED:
                session.cause = cause
        if new is CallState.TERMINATED:
            self._stop_bridge(session.id)
        self.emit("call_state", session.as_dict())

    def _live_session(self) -> Optional[CallSession]:
        for session in self.sessions.values():
            if session.state in _LIVE_STATES:
                return session
        return None

    def get(self, call_id: str) -> Optional[CallSession]:
        return self.sessions.get(call_id)

    # -- outgoing ---------------------------------------------------------------------

    def dial(self, to: str, rtp_remote: "Optional[tuple[str, int]]" = None) -> CallSession:
        with self._lock:
            if self._live_session() is not None:
                raise ModemBusy("another call is in progress")
            session = CallSession(id=uuid.uuid4().hex[:12], direction="outgoing")
            self.sessions[session.id] = session
        if to.startswith(">"):
            dial_target = to  # memory/phonebook entry reference
            session.peer = None
        else:
            address = Address.parse(to)
            dial_target = address.dial_string()
            session.peer = dial_target
        self._transition(session, CallState.DIALING)
        result = self.engine.execute(AtCommand(f"D{dial_target};", timeout=LONG_TIMEOUT))
        final = result.final
        if final is None:
            self._transition(session, CallState.TERMINATED, cause="no-response")
            return session
        if final.ok:
            self._transition(session, CallState.ACTIVE)
            self._start_bridge(session, rtp_remote)
        elif final.code is FinalCode.BUSY:
            self._transition(session, CallState.TERMINATED, cause="busy")
        elif final.code is FinalCode.NO_ANSWER:
            self._transition(session, CallState.TERMINATED, cause="no-answer")
        elif final.code is FinalCode.NO_CARRIER:
            self._transition(session, CallState.TERMINATED, cause="no-carrier")
        else:
            self._transition(session, CallState.TERMINATED, cause=f"rejected ({final})")
        return session

    # -- incoming ---------------------------------------------------------------------

    def on_urc(self, urc) -> None:
        if urc.prefix in ("+CRING", "RING"):
            self._on_ring(urc.payload)
        elif urc.prefix == "+CLIP":
            self._on_clip(urc.payload)
        elif urc.prefix == "?" and urc.payload.strip() == "NO CARRIER":
            self._on_remote_hangup()

    def _on_ring(self, payload: str) -> None:
        fields = [f.strip() for f in payload.split(",")] if payload else []
        call_type = fields[0] if fields else "VOICE"
        with self._lock:
            live = self._live_session()
            if live is not None and live.state is CallState.RINGING:
                return  # cadence repeat of the same call
            if live is not None:
                return  # ring while busy: ignore
            session = CallSession(id=uuid.uuid4().hex[:12], direction="incoming")
            self.sessions[session.id] = session
        if call_type != "VOICE":
            # only plain voice is processed; anything else is rejected
            session.incoming_info = {"type": call_type}
            self._transition(session, CallState.RINGING)
            try:
                self.engine.execute(AtCommand("+CHUP"))
            except AtError:
                pass
            self._transition(session, CallState.TERMINATED, cause="unsupported-bearer")
            return
        info = {"type": call_type}
        if len(fields) > 1 and fields[1]:
            info["priority"] = fields[1]
        if len(fields) > 3:
            info["subaddr"] = fields[2]
            info["satype"] = fields[3]
        session.incoming_info = info
        self._transition(session, CallState.RINGING)
        self.emit("incoming_call", session.as_dict())

    def _on_clip(self, payload: str) -> None:
        number = payload.split(",")[0].strip().strip('"')
        with self._lock:
            live = self._live_session()
            if live is not None and live.direction == "incoming" and live.peer is None:
                live.peer = number
                self.emit("call_state", live.as_dict())

    def _on_remote_hangup(self) -> None:
        with self._lock:
            live = self._live_session()
        if live is not None:
            self._transition(live, CallState.TERMINATED, cause="remote-hangup")

    def answer(self, call_id: str, rtp_remote: "Optional[tuple[str, int]]" = None) -> CallSession:
        session = self.sessions.get(call_id)
        if session is None or session.state is not CallState.RINGING:
            raise InvalidCallState("no ringing call with that id")
        result = self.engine.execute(AtCommand("A", timeout=LONG_TIMEOUT))
        final = result.final
        if final is not None and final.ok:
            self._transition(session, CallState.ACTIVE)
            self._start_bridge(session, rtp_remote)
        else:
            self._transition(session, CallState.TERMINATED, cause="remote-hangup")
        return session

    def hangup(self, call_id: str) -> CallSession:
        session = self.sessions.get(call_id)
        if session is None:
            raise InvalidCallState("unknown call id")
        if session.state is CallState.TERMINATED:
            return session  # idempotent
        was_ringing = session.state is CallState.RINGING
        self._transition(
            session,
            CallState.TERMINATED,
            cause="rejected" if was_ringing else "local-hangup",
        )
        try:
            self.engine.execute(AtCommand("+CHUP"))
        except AtError as exc:
            logger.warning("hangup command failed: %s", exc)
        logger.info(
            "call %s ended: %d RTP packets sent, %d received",
            session.id, session.rtp_sent, session.rtp_received,
        )
        return session

    # -- audio bridge -------------------------------------------------------------------

    def set_tap(self, call_id: str, tap: "Optional[Callable[[bytes], None]]") -> None:
        with self._lock:
            if tap is None:
                self._taps.pop(call_id, None)
            else:
                self._taps[call_id] = tap
            bridge = self._bridges.get(call_id)
            if bridge is not None:
                bridge.tap = tap

    def write_audio(self, call_id: str, pcm: bytes) -> bool:
        bridge = self._bridges.get(call_id)
        if bridge is None:
            return False
        return bridge.write_to_modem(pcm)

    def _start_bridge(self, session: CallSession, rtp_remote) -> None:
        if self.audio_addr is None:
            logger.info("no modem audio channel configured; call %s has no bridge", session.id)
            return
        try:
            modem_sock = socket.create_connection(self.audio_addr, timeout=2.0)
        except OSError as exc:
            logger.warning("audio channel connect failed: %s", exc)
            self._transition(session, CallState.TERMINATED, cause="audio-lost")
            return
        rtp = RtpSession(
            bind_host=self.rtp_bind[0],
            bind_port=self.rtp_bind[1],
            remote=tuple(rtp_remote) if rtp_remote else None,
        )
        session.rtp_local = rtp.local_addr
        session.rtp_remote = tuple(rtp_remote) if rtp_remote else None
        bridge = AudioBridge(
            session,
            modem_sock,
            rtp,
            on_audio_lost=lambda: self._audio_lost(session),
            tap=self._taps.get(session.id),
        )
        with self._lock:
            self._bridges[session.id] = bridge
        bridge.start()

    def _audio_lost(self, session: CallSession) -> None:
        if session.state is CallState.ACTIVE:
            try:
                self._transition(session, CallState.TERMINATED, cause="audio-lost")
            except InvalidCallState:
                pass

    def _stop_bridge(self, call_id: str) -> None:
        with self._lock:
            bridge = self._bridges.pop(call_id, None)
        if bridge is not None:
            bridge.stop()
