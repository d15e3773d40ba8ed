"""Byte transports to the modem: TCP, POSIX serial, and in-memory pairs.

A transport is a full-duplex byte stream with no framing of its own.  Exactly
one engine owns a transport at a time.  Config strings:

    serial:<path>?baud=115200
    tcp:<host>:<port>
    mem:<id>
"""

from __future__ import annotations

import os
import queue
import socket
import threading
from urllib.parse import parse_qs

from .errors import TransportClosed, TransportError

_SENTINEL = b""


class Transport:
    """Blocking byte-stream interface."""

    def read(self) -> bytes:
        """Block until some bytes arrive; return b'' once closed."""
        raise NotImplementedError

    def write(self, data: bytes) -> None:
        raise NotImplementedError

    def close(self) -> None:
        raise NotImplementedError

    @property
    def closed(self) -> bool:
        raise NotImplementedError


class TcpTransport(Transport):
    def __init__(self, host: str, port: int, connect_timeout: float = 5.0):
        try:
            self._sock = socket.create_connection((host, port), timeout=connect_timeout)
        except OSError as exc:
            raise TransportError(f"cannot connect to {host}:{port}: {exc}") from exc
        self._sock.settimeout(None)
        self._sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._wlock = threading.Lock()
        self._closed = False

    def read(self) -> bytes:
        try:
            return self._sock.recv(4096)
        except OSError:
            return _SENTINEL

    def write(self, data: bytes) -> None:
        if self._closed:
            raise TransportClosed("transport closed")
        with self._wlock:
            try:
                self._sock.sendall(data)
            except OSError as exc:
                raise TransportClosed(str(exc)) from exc

    def close(self) -> None:
        if not self._closed:
            self._closed = True
            try:
                self._sock.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            self._sock.close()

    @property
    def closed(self) -> bool:
        return self._closed


class SerialTransport(Transport):
    """Raw-mode POSIX serial port via termios (no external dependency)."""

    def __init__(self, path: str, baud: int = 115200):
        import termios

        try:
            self._fd = os.open(path, os.O_RDWR | os.O_NOCTTY)
        except OSError as exc:
            raise TransportError(f"cannot open {path}: {exc}") from exc
        rate = getattr(termios, f"B{baud}", None)
        if rate is None:
            os.close(self._fd)
            raise TransportError(f"unsupported baud rate: {baud}")
        attrs = termios.tcgetattr(self._fd)
        iflag, oflag, cflag, lflag, _, _, cc = attrs
        iflag &= ~(termios.IXON | termios.IXOFF | termios.ICRNL | termios.INLCR | termios.IGNCR)
        oflag &= ~termios.OPOST
        lflag &= ~(termios.ECHO | termios.ICANON | termios.ISIG | termios.IEXTEN)
        cflag &= ~(termios.PARENB | termios.CSTOPB | termios.CSIZE)
        cflag |= termios.CS8 | termios.CREAD | termios.CLOCAL
        cc[termios.VMIN] = 1
        cc[termios.VTIME] = 0
        termios.tcsetattr(self._fd, termios.TCSANOW, [iflag, oflag, cflag, lflag, rate, rate, cc])
        self._wlock = threading.Lock()
        self._closed = False

    def read(self) -> bytes:
        try:
            return os.read(self._fd, 4096)
        except OSError:
            return _SENTINEL

    def write(self, data: bytes) -> None:
        if self._closed:
            raise TransportClosed("transport closed")
        with self._wlock:
            try:
                os.write(self._fd, data)
            except OSError as exc:
                raise TransportClosed(str(exc)) from exc

    def close(self) -> None:
        if not self._closed:
            self._closed = True
            try:
                os.close(self._fd)
            except OSError:
                pass

    @property
    def closed(self) -> bool:
        return self._closed


class MemTransport(Transport):
    """One end of an in-memory byte pipe; see :func:`mem_pair`."""

    def __init__(self, rx: "queue.SimpleQueue[bytes]", tx: "queue.SimpleQueue[bytes]"):
        self._rx = rx
        self._tx = tx
        self._closed = threading.Event()

    def read(self) -> bytes:
        while not self._closed.is_set():
            try:
                data = self._rx.get(timeout=0.1)
            except queue.Empty:
                continue
            return data
        return _SENTINEL

    def write(self, data: bytes) -> None:
        if self._closed.is_set():
            raise TransportClosed("transport closed")
        self._tx.put(bytes(data))

    def close(self) -> None:
        if not self._closed.is_set():
            self._closed.set()
            self._tx.put(_SENTINEL)
            self._rx.put(_SENTINEL)

    @property
    def closed(self) -> bool:
        return self._closed.is_set()


def mem_pair() -> "tuple[MemTransport, MemTransport]":
    a_to_b: "queue.SimpleQueue[bytes]" = queue.SimpleQueue()
    b_to_a: "queue.SimpleQueue[bytes]" = queue.SimpleQueue()
    return MemTransport(b_to_a, a_to_b), MemTransport(a_to_b, b_to_a)


_mem_registry: "dict[str, MemTransport]" = {}
_mem_lock = threading.Lock()


def _open_mem(channel_id: str) -> MemTransport:
    # First opener creates the pair and parks the peer end; the second
    # opener (same id) claims it, wiring the two together.
    with _mem_lock:
        peer = _mem_registry.pop(channel_id, None)
        if peer is not None:
            return peer
        mine, theirs = mem_pair()
        _mem_registry[channel_id] = theirs
        return mine


def open_transport(config: str) -> Transport:
    """Open a transport from its config string form."""
    kind, _, rest = config.partition(":")
    if kind == "tcp":
        host, _, port = rest.rpartition(":")
        if not host or not port.isdigit():
            raise TransportError(f"bad tcp transport config: {config!r}")
        return TcpTransport(host, int(port))
    if kind == "serial":
        path, _, query = rest.partition("?")
        baud = 115200
        if query:
            params = parse_qs(query)
            if "baud" in params:
                baud = int(params["baud"][0])
        if not path:
            raise TransportError(f"bad serial transport config: {config!r}")
        return SerialTransport(path, baud)
    if kind == "mem":
        if not rest:
            raise TransportError(f"bad mem transport config: {config!r}")
        return _open_mem(rest)
    raise TransportError(f"unknown transport kind: {config!r}")
