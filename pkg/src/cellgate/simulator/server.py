"""TCP front end of the virtual modem.

Three listeners per instance: the AT channel on the base port, an HTTP
control plane for test injection on base+1, and a raw PCM audio side-channel
on base+2 (16-bit little-endian, 8 kHz, one 320-byte frame per 20 ms while a
call is active).
"""

from __future__ import annotations

import json
import logging
import socket
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Optional

from ..audio import FRAME_SECONDS, tone_frames
from .machine import PROMPT, SimMachine
from .state import Clock, SimState

logger = logging.getLogger(__name__)


def _alloc_port_triple(host: str) -> int:
    """Find a base port with base, base+1, base+2 all free."""
    for _ in range(64):
        probe = socket.socket()
        probe.bind((host, 0))
        base = probe.getsockname()[1]
        probe.close()
        if base + 2 > 65535:
            continue
        ok = True
        for offset in (1, 2):
            check = socket.socket()
            try:
                check.bind((host, base + offset))
            except OSError:
                ok = False
            finally:
                check.close()
        if ok:
            return base
    raise OSError("could not allocate three consecutive ports")


class ModemSimulator:
    def __init__(
        self,
        host: str = "127.0.0.1",
        base_port: int = 0,
        *,
        state: Optional[SimState] = None,
        clock: Optional[Clock] = None,
    ):
        self.host = host
        self.state = state or SimState()
        self.machine = SimMachine(self.state, clock=clock)
        self.machine.on_call_active = self._on_call_active
        self.machine.on_call_ended = self._on_call_ended
        self.clock = self.machine.clock
        self.base_port = base_port or _alloc_port_triple(host)
        self._at_server = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._at_server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._at_server.bind((host, self.base_port))
        self._at_server.listen(2)
        self._audio_server = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._audio_server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._audio_server.bind((host, self.base_port + 2))
        self._audio_server.listen(2)
        self._ctl_server = self._build_control_server()
        self._running = False
        self._at_conn: Optional[socket.socket] = None
        self._at_conn_lock = threading.Lock()
        self._write_lock = threading.Lock()
        self._audio_conn: Optional[socket.socket] = None
        self._audio_lock = threading.Lock()
        self._tone_active = threading.Event()
        self.audio_bytes_discarded = 0

    # -- lifecycle -----------------------------------------------------------

    @property
    def at_port(self) -> int:
        return self.base_port

    @property
    def ctl_port(self) -> int:
        return self.base_port + 1

    @property
    def audio_port(self) -> int:
        return self.base_port + 2

    @property
    def transport_config(self) -> str:
        return f"tcp:{self.host}:{self.at_port}"

    @property
    def ctl_url(self) -> str:
        return f"http://{self.host}:{self.ctl_port}"

    def start(self) -> "ModemSimulator":
        self._running = True
        threading.Thread(target=self._at_accept_loop, name="sim-at", daemon=True).start()
        threading.Thread(target=self._audio_accept_loop, name="sim-audio", daemon=True).start()
        threading.Thread(target=self._ctl_server.serve_forever, name="sim-ctl", daemon=True).start()
        threading.Thread(target=self._urc_pump, name="sim-urc", daemon=True).start()
        return self

    def stop(self) -> None:
        self._running = False
        for sock in (self._at_server, self._audio_server):
            try:
                sock.close()
            except OSError:
                pass
        with self._at_conn_lock:
            if self._at_conn:
                try:
                    self._at_conn.close()
                except OSError:
                    pass
        self._close_audio_conn()
        self._ctl_server.shutdown()
        self._ctl_server.server_close()

    # -- AT channel ------------------------------------------------------------

    def _at_accept_loop(self) -> None:
        while self._running:
            try:
                conn, _ = self._at_server.accept()
            except OSError:
                return
            conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            with self._at_conn_lock:
                self._at_conn = conn
            try:
                self._serve_at(conn)
            except OSError:
                pass
            finally:
                with self._at_conn_lock:
                    if self._at_conn is conn:
                        self._at_conn = None
                try:
                    conn.close()
                except OSError:
                    pass

    def _serve_at(self, conn: socket.socket) -> None:
        buf = b""
        payload_buf = b""
        while self._running:
            data = conn.recv(4096)
            if not data:
                return
            if self.state.echo and not self.machine.in_payload_mode:
                self._write_raw(data)
            if self.machine.in_payload_mode:
                payload_buf += data
                zi = payload_buf.find(b"\x1a")
                ei = payload_buf.find(b"\x1b")
                if zi < 0 and ei < 0:
                    continue
                if ei >= 0 and (zi < 0 or ei < zi):
                    body, payload_buf = payload_buf[:ei], payload_buf[ei + 1:]
                    lines = self.machine.handle_payload(body, aborted=True)
                else:
                    body, payload_buf = payload_buf[:zi], payload_buf[zi + 1:]
                    lines = self.machine.handle_payload(body, aborted=False)
                buf += payload_buf
                payload_buf = b""
                self._write_lines(lines)
                continue
            buf += data
            while not self.machine.in_payload_mode:
                idx = buf.find(b"\r")
                if idx < 0:
                    break
                line, buf = buf[:idx], buf[idx + 1:]
                if buf.startswith(b"\n"):
                    buf = buf[1:]
                text = line.decode("latin-1")
                if not text.strip():
                    continue
                lines = self.machine.handle_line(text)
                self._write_lines(lines)
            if self.machine.in_payload_mode and buf:
                payload_buf, buf = buf, b""

    def _write_raw(self, data: bytes) -> None:
        with self._write_lock:
            conn = self._at_conn
            if conn is None:
                return
            try:
                conn.sendall(data)
            except OSError:
                pass

    def _write_lines(self, lines: "list[str]") -> None:
        for i, line in enumerate(lines):
            if i:
                self._drain_urcs()
            if line == PROMPT:
                self._write_raw(b"\r\n> ")
            else:
                self._write_raw(b"\r\n" + line.encode("latin-1") + b"\r\n")

    def _drain_urcs(self) -> None:
        while True:
            try:
                urc = self.machine.urcs.get_nowait()
            except Exception:
                return
            self._write_raw(b"\r\n" + urc.encode("latin-1") + b"\r\n")

    def _urc_pump(self) -> None:
        while self._running:
            try:
                urc = self.machine.urcs.get(timeout=0.1)
            except Exception:
                continue
            self._write_raw(b"\r\n" + urc.encode("latin-1") + b"\r\n")

    # -- audio side-channel ------------------------------------------------------

    def _audio_accept_loop(self) -> None:
        while self._running:
            try:
                conn, _ = self._audio_server.accept()
            except OSError:
                return
            with self._audio_lock:
                old = self._audio_conn
                self._audio_conn = conn
            if old is not None:
                try:
                    old.close()
                except OSError:
                    pass
            threading.Thread(target=self._audio_rx, args=(conn,), daemon=True).start()
            threading.Thread(target=self._audio_tx, args=(conn,), daemon=True).start()

    def _audio_rx(self, conn: socket.socket) -> None:
        while self._running:
            try:
                data = conn.recv(4096)
            except OSError:
                return
            if not data:
                return
            self.audio_bytes_discarded += len(data)

    def _audio_tx(self, conn: socket.socket) -> None:
        """Stream the configured tone while a call is active."""
        while self._running:
            if not self._tone_active.wait(timeout=0.1):
                with self._audio_lock:
                    if self._audio_conn is not conn:
                        return
                continue
            state = self.state
            duration = state.tone_duration if state.tone_duration is not None else 3600.0
            frames = tone_frames(state.tone_frequency, duration)
            for frame in frames:
                if not self._tone_active.is_set() or not self._running:
                    break
                with self._audio_lock:
                    if self._audio_conn is not conn:
                        return
                try:
                    conn.sendall(frame)
                except OSError:
                    return
                self.clock.sleep(FRAME_SECONDS)
            # tone finished: stay connected, wait for call end / next call
            while self._tone_active.is_set() and self._running:
                with self._audio_lock:
                    if self._audio_conn is not conn:
                        return
                self.clock.sleep(FRAME_SECONDS)

    def _on_call_active(self, call) -> None:
        self._tone_active.set()

    def _on_call_ended(self, call) -> None:
        self._tone_active.clear()
        self._close_audio_conn()

    def _close_audio_conn(self) -> None:
        with self._audio_lock:
            conn, self._audio_conn = self._audio_conn, None
        if conn is not None:
            try:
                conn.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            try:
                conn.close()
            except OSError:
                pass

    # -- control plane --------------------------------------------------------------

    def _build_control_server(self) -> ThreadingHTTPServer:
        sim = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, fmt, *args):
                pass

            def _json(self, code: int, payload: dict) -> None:
                body = json.dumps(payload).encode()
                self.send_response(code)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def _read_body(self) -> dict:
                length = int(self.headers.get("Content-Length", 0))
                if not length:
                    return {}
                try:
                    return json.loads(self.rfile.read(length))
                except json.JSONDecodeError:
                    return {}

            def do_GET(self):
                if self.path == "/ctl/state":
                    self._json(200, sim.describe_state())
                elif self.path == "/ctl/outbox":
                    with sim.machine.lock:
                        self._json(200, {"messages": list(sim.state.outbox)})
                else:
                    self._json(404, {"error": "unknown endpoint"})

            def do_POST(self):
                body = self._read_body()
                try:
                    self._json(*sim.control(self.path, body))
                except Exception as exc:  # control plane must not crash the sim
                    logger.exception("control error")
                    self._json(500, {"error": str(exc)})

        return ThreadingHTTPServer((self.host, self.base_port + 1), Handler)

    def describe_state(self) -> dict:
        with self.machine.lock:
            state = self.state
            call = state.call
            return {
                "registration": state.registration,
                "signal_n": state.signal_n,
                "pin_locked": state.pin_locked,
                "capabilities": sorted(state.capabilities),
                "call": (
                    {"peer": call.peer, "direction": call.direction, "state": call.state}
                    if call
                    else None
                ),
                "sms_stores": {
                    name: {"used": store.used, "capacity": store.capacity}
                    for name, store in state.sms_stores.items()
                },
                "outbox_count": len(state.outbox),
                "audio_bytes_discarded": self.audio_bytes_discarded,
            }

    def control(self, path: str, body: dict) -> "tuple[int, dict]":
        machine = self.machine
        if path == "/ctl/sms":
            index, error = machine.inject_sms(
                body.get("from", ""), body.get("text", ""),
                concat=tuple(body["concat"]) if body.get("concat") else None,
            )
            if error:
                return 409, {"error": error}
            return 200, {"index": index}
        if path == "/ctl/call":
            error = machine.inject_call(body.get("from", ""))
            if error:
                return 409, {"error": error}
            return 200, {}
        if path == "/ctl/hangup":
            error = machine.remote_hangup()
            if error:
                return 409, {"error": error}
            return 200, {}
        if path == "/ctl/signal":
            machine.set_signal(int(body.get("n", 99)), int(body.get("ber", 99)))
            return 200, {}
        if path == "/ctl/registration":
            machine.set_registration(int(body.get("stat", 0)))
            return 200, {}
        if path == "/ctl/capabilities":
            machine.set_capabilities(body.get("commands", []))
            return 200, {}
        if path == "/ctl/apdu":
            with machine.lock:
                self.state.apdu_table.update(
                    {str(k).upper(): str(v).upper() for k, v in body.get("table", {}).items()}
                )
            return 200, {}
        if path == "/ctl/tone":
            with machine.lock:
                if "frequency" in body:
                    self.state.tone_frequency = float(body["frequency"])
                self.state.tone_duration = (
                    float(body["duration"]) if body.get("duration") is not None else None
                )
            return 200, {}
        if path == "/ctl/dial-outcome":
            with machine.lock:
                self.state.next_dial_outcome = str(body.get("outcome", "ok"))
            return 200, {}
        if path == "/ctl/urc":
            machine.push_urc(str(body.get("line", "")))
            return 200, {}
        return 404, {"error": "unknown endpoint"}
