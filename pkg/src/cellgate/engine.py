"""AT command engine: owns the transport, pairs commands with responses,
routes unsolicited result codes to subscribers, applies quirk overrides.

One reader thread turns the byte stream into classified lines; one dispatcher
thread serializes command execution (single-flight by construction).  URCs are
fanned out to every subscriber and never appear in a command's response set.
"""

from __future__ import annotations

import json
import logging
import queue
import threading
import time
from collections import deque
from concurrent.futures import Future
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .atproto import (
    AtCommand,
    CommandKind,
    FinalResult,
    LineKind,
    ResponseLine,
    Urc,
    parse_line,
    serialize,
)
from .errors import (
    AtTimeout,
    CommandUnsupported,
    InvalidCommand,
    PromptNeverArrived,
    TransportClosed,
)
from .transport import Transport

logger = logging.getLogger(__name__)

# Prefixes registered by default: event-only codes that are never the
# information response of a command this gateway issues.  +CREG is absent on
# purpose (it is the solicited reply to AT+CREG?); its unsolicited form is
# surfaced through the idle-line rule below.
DEFAULT_URC_PREFIXES = ("RING", "+CRING", "+CLIP", "+CMTI", "+CMT", "+CDS", "+CDSI")

URC_BUFFER_LIMIT = 1024
DRAIN_QUIET = 0.2


@dataclass
class ExecResult:
    """Outcome of one command (or of the payload phase that completes it)."""

    info: "list[ResponseLine]"
    final: Optional[FinalResult]
    prompt: bool = False
    aborted: bool = False

    @property
    def ok(self) -> bool:
        return self.final is not None and self.final.ok

    def values(self) -> "list[str]":
        return [line.value for line in self.info]


@dataclass
class QuirkProfile:
    """Per-model overrides for modems that mishandle standard commands."""

    model_match: str
    command_overrides: "dict[str, str]" = field(default_factory=dict)
    extra_init: "list[AtCommand]" = field(default_factory=list)


def load_quirk_profiles(path: str) -> "list[QuirkProfile]":
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    profiles = []
    for entry in raw:
        extra = []
        for item in entry.get("extra_init", []):
            extra.append(
                AtCommand(
                    name=item["name"],
                    kind=CommandKind(item.get("kind", "execute")),
                    args=tuple(item.get("args", ())),
                )
            )
        profiles.append(
            QuirkProfile(
                model_match=entry["model_match"],
                command_overrides=dict(entry.get("command_overrides", {})),
                extra_init=extra,
            )
        )
    return profiles


class UrcSubscription:
    """Iterator over URCs; bounded queue, oldest dropped when full."""

    def __init__(self, engine: "AtEngine"):
        self._engine = engine
        self._queue: "deque[Urc]" = deque()
        self._cond = threading.Condition()
        self._closed = False
        self.dropped = 0

    def _push(self, urc: Urc) -> None:
        with self._cond:
            if len(self._queue) >= URC_BUFFER_LIMIT:
                self._queue.popleft()
                self.dropped += 1
            self._queue.append(urc)
            self._cond.notify()

    def get(self, timeout: Optional[float] = None) -> Optional[Urc]:
        with self._cond:
            if not self._queue:
                self._cond.wait(timeout)
            if self._queue:
                return self._queue.popleft()
            return None

    def __iter__(self):
        while not self._closed:
            urc = self.get(timeout=0.5)
            if urc is not None:
                yield urc

    def close(self) -> None:
        self._closed = True
        self._engine._unsubscribe(self)
        with self._cond:
            self._cond.notify_all()


class _Pending:
    __slots__ = ("cmd", "info", "final", "prompt_seen", "done", "last_line_at")

    def __init__(self, cmd: AtCommand):
        self.cmd = cmd
        self.info: "list[ResponseLine]" = []
        self.final: Optional[FinalResult] = None
        self.prompt_seen = False
        self.done = threading.Event()
        self.last_line_at = time.monotonic()


@dataclass
class EngineStats:
    lines_total: int = 0
    urcs_total: int = 0
    urcs_dropped: int = 0
    stale_finals: int = 0
    max_in_flight: int = 0
    timeouts: int = 0


class AtEngine:
    """Serializes AT commands over one transport; see module docstring."""

    def __init__(
        self,
        transport: Transport,
        urc_prefixes: Iterable[str] = DEFAULT_URC_PREFIXES,
        quirk_profiles: "list[QuirkProfile]" = (),
    ):
        self._transport = transport
        self._urc_prefixes = tuple(urc_prefixes)
        self._quirk_profiles = list(quirk_profiles)
        self._active_quirk: Optional[QuirkProfile] = None

        self._state = threading.Condition()
        self._pending: Optional[_Pending] = None
        self._in_flight = 0
        self._closed = False
        self._echo_line: Optional[bytes] = None

        self._requests: "queue.Queue[tuple]" = queue.Queue()
        self._payload_box: "queue.Queue[tuple]" = queue.Queue(maxsize=1)

        self._subs: "list[UrcSubscription]" = []
        self._subs_lock = threading.Lock()
        self._urc_backlog: "deque[Urc]" = deque()

        self.stats = EngineStats()

        self._reader = threading.Thread(target=self._read_loop, name="at-reader", daemon=True)
        self._dispatcher = threading.Thread(target=self._dispatch_loop, name="at-dispatch", daemon=True)
        self._reader.start()
        self._dispatcher.start()

    # -- public API ------------------------------------------------------

    def execute(self, cmd: AtCommand) -> ExecResult:
        """Send one command and wait for its final result (or prompt).

        Callable from any thread; requests are queued FIFO.  For commands
        with ``expects_prompt`` the call returns once the '> ' prompt is
        observed (``result.prompt`` true) and :meth:`send_payload` completes
        the exchange.
        """
        if self._closed:
            raise TransportClosed("engine closed")
        name = cmd.name
        if self._active_quirk:
            override = self._active_quirk.command_overrides.get(name)
            if override == "unsupported":
                raise CommandUnsupported(name)
            if override:
                cmd = AtCommand(
                    name=override,
                    kind=cmd.kind,
                    args=cmd.args,
                    timeout=cmd.timeout,
                    expects_prompt=cmd.expects_prompt,
                )
        fut: Future = Future()
        self._requests.put(("cmd", cmd, fut))
        return fut.result()

    def send_payload(self, body: bytes, timeout: float = 30.0) -> ExecResult:
        """Send the payload after a prompt; terminated with Ctrl-Z.

        A body of a single ESC (0x1B) aborts the submission: the modem
        discards the pending message and still answers OK.
        """
        if not body:
            raise InvalidCommand("empty payload body")
        with self._state:
            if self._pending is None or not self._pending.prompt_seen:
                raise PromptNeverArrived("no prompt is being held")
        fut: Future = Future()
        self._payload_box.put((body, timeout, fut))
        return fut.result()

    def subscribe_urcs(self) -> UrcSubscription:
        sub = UrcSubscription(self)
        with self._subs_lock:
            backlog, self._urc_backlog = self._urc_backlog, deque()
            for urc in backlog:
                sub._push(urc)
            self._subs.append(sub)
        return sub

    def set_quirk_profiles(self, profiles: "list[QuirkProfile]") -> None:
        self._quirk_profiles = list(profiles)

    def select_quirk(self, model_string: str) -> Optional[QuirkProfile]:
        """Activate the first profile whose model_match is a substring."""
        for profile in self._quirk_profiles:
            if profile.model_match and profile.model_match in model_string:
                self._active_quirk = profile
                logger.info("quirk profile active: %s", profile.model_match)
                return profile
        self._active_quirk = None
        return None

    @property
    def active_quirk(self) -> Optional[QuirkProfile]:
        return self._active_quirk

    def register_urc_prefix(self, prefix: str) -> None:
        if prefix not in self._urc_prefixes:
            self._urc_prefixes = self._urc_prefixes + (prefix,)

    def close(self) -> None:
        self._closed = True
        self._requests.put(("stop", None, None))
        self._transport.close()

    @property
    def closed(self) -> bool:
        return self._closed

    # -- reader side ------------------------------------------------------

    def _read_loop(self) -> None:
        buf = b""
        while True:
            data = self._transport.read()
            if not data:
                self._on_transport_closed()
                return
            buf += data
            buf = self._consume(buf)

    def _consume(self, buf: bytes) -> bytes:
        while True:
            # Prompt arrives without a line terminator; detect it against the
            # pending buffer when the in-flight command expects one.
            with self._state:
                expecting_prompt = (
                    self._pending is not None
                    and self._pending.cmd.expects_prompt
                    and not self._pending.prompt_seen
                )
            if expecting_prompt:
                stripped = buf.lstrip(b"\r\n")
                if stripped.startswith(b"> "):
                    self._handle_line(b"> ")
                    buf = stripped[2:]
                    continue
            idx_r = buf.find(b"\r")
            idx_n = buf.find(b"\n")
            candidates = [i for i in (idx_r, idx_n) if i >= 0]
            if not candidates:
                return buf
            idx = min(candidates)
            line, buf = buf[:idx], buf[idx + 1:]
            if line:
                self._handle_line(line)

    def _handle_line(self, line: bytes) -> None:
        self.stats.lines_total += 1
        with self._state:
            if self._echo_line is not None and line == self._echo_line:
                self._echo_line = None
                return
        parsed = parse_line(line, self._urc_prefixes)
        if isinstance(parsed, Urc):
            self._deliver_urc(parsed)
            return
        with self._state:
            pending = self._pending
            if pending is not None:
                pending.last_line_at = time.monotonic()
                if parsed.kind is LineKind.PROMPT:
                    pending.prompt_seen = True
                elif parsed.kind is LineKind.FINAL:
                    pending.final = parsed.final
                elif parsed.kind is LineKind.INFO:
                    pending.info.append(parsed)
                self._state.notify_all()
                return
        # Idle: solicited-looking lines are surfaced as anonymous URCs so
        # events like an unsolicited +CREG or NO CARRIER are not lost.
        if parsed.kind in (LineKind.INFO, LineKind.FINAL):
            if parsed.kind is LineKind.FINAL:
                self.stats.stale_finals += 1
            self._deliver_urc(Urc(prefix="?", payload=parsed.raw))

    def _deliver_urc(self, urc: Urc) -> None:
        self.stats.urcs_total += 1
        with self._subs_lock:
            subs = list(self._subs)
            if not subs:
                if len(self._urc_backlog) >= URC_BUFFER_LIMIT:
                    self._urc_backlog.popleft()
                    self.stats.urcs_dropped += 1
                self._urc_backlog.append(urc)
                return
        for sub in subs:
            sub._push(urc)

    def _unsubscribe(self, sub: UrcSubscription) -> None:
        with self._subs_lock:
            if sub in self._subs:
                self._subs.remove(sub)

    def _on_transport_closed(self) -> None:
        self._closed = True
        with self._state:
            self._state.notify_all()

    # -- dispatcher side ---------------------------------------------------

    def _dispatch_loop(self) -> None:
        while True:
            kind, cmd, fut = self._requests.get()
            if kind == "stop":
                self._fail_queued()
                return
            if self._closed:
                fut.set_exception(TransportClosed("transport closed"))
                continue
            try:
                self._run_command(cmd, fut)
            except Exception as exc:  # defensive: dispatcher must survive
                logger.exception("dispatcher error")
                if not fut.done():
                    fut.set_exception(exc)

    def _run_command(self, cmd: AtCommand, fut: Future) -> None:
        line = serialize(cmd)
        pending = _Pending(cmd)
        with self._state:
            self._pending = pending
            self._in_flight += 1
            self.stats.max_in_flight = max(self.stats.max_in_flight, self._in_flight)
            self._echo_line = line[:-1]
        try:
            self._transport.write(line)
        except TransportClosed as exc:
            self._clear_pending()
            fut.set_exception(exc)
            return

        deadline = time.monotonic() + cmd.timeout
        with self._state:
            while pending.final is None and not pending.prompt_seen:
                remaining = deadline - time.monotonic()
                if remaining <= 0 or self._closed:
                    break
                self._state.wait(remaining)
            if self._closed and pending.final is None:
                self._clear_pending_locked()
                fut.set_exception(TransportClosed("transport closed"))
                return
            if pending.final is not None:
                result = ExecResult(info=pending.info, final=pending.final)
                self._clear_pending_locked()
                fut.set_result(result)
                return
            if pending.prompt_seen:
                # Keep the command in flight; the payload phase finishes it.
                fut.set_result(ExecResult(info=list(pending.info), final=None, prompt=True))
            else:
                self.stats.timeouts += 1
                self._drain_locked(pending)
                self._clear_pending_locked()
                if cmd.expects_prompt:
                    fut.set_exception(PromptNeverArrived(f"{cmd.name}: no prompt within {cmd.timeout}s"))
                else:
                    fut.set_exception(AtTimeout(f"{cmd.name}: no final result within {cmd.timeout}s"))
                return

        # Payload phase (prompt held).
        try:
            body, timeout, pfut = self._payload_box.get(timeout=cmd.timeout)
        except queue.Empty:
            # Caller never supplied a payload: abort so the modem recovers.
            self._abort_payload(pending)
            return
        aborted = body == b"\x1b"
        try:
            self._transport.write(body if aborted else body + b"\x1a")
        except TransportClosed as exc:
            self._clear_pending()
            pfut.set_exception(exc)
            return
        deadline = time.monotonic() + timeout
        with self._state:
            while pending.final is None:
                remaining = deadline - time.monotonic()
                if remaining <= 0 or self._closed:
                    break
                self._state.wait(remaining)
            if pending.final is not None:
                result = ExecResult(info=pending.info, final=pending.final, aborted=aborted)
                self._clear_pending_locked()
                pfut.set_result(result)
            elif self._closed:
                self._clear_pending_locked()
                pfut.set_exception(TransportClosed("transport closed"))
            else:
                self.stats.timeouts += 1
                self._drain_locked(pending)
                self._clear_pending_locked()
                pfut.set_exception(AtTimeout("payload: no final result"))

    def _abort_payload(self, pending: _Pending) -> None:
        try:
            self._transport.write(b"\x1b")
        except TransportClosed:
            pass
        with self._state:
            deadline = time.monotonic() + 2.0
            while pending.final is None and time.monotonic() < deadline and not self._closed:
                self._state.wait(0.1)
            self._clear_pending_locked()

    def _drain_locked(self, pending: _Pending) -> None:
        """After a timeout, wait until the line has been quiet for a while so
        a late final result does not leak into the next command."""
        while True:
            quiet_for = time.monotonic() - pending.last_line_at
            if quiet_for >= DRAIN_QUIET:
                return
            self._state.wait(DRAIN_QUIET - quiet_for)
            if pending.final is not None:
                return

    def _clear_pending_locked(self) -> None:
        self._pending = None
        self._in_flight -= 1
        self._echo_line = None

    def _clear_pending(self) -> None:
        with self._state:
            self._clear_pending_locked()

    def _fail_queued(self) -> None:
        while True:
            try:
                kind, _, fut = self._requests.get_nowait()
            except queue.Empty:
                return
            if fut is not None:
                fut.set_exception(TransportClosed("engine closed"))
