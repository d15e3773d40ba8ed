"""Minimal RTP over UDP for the PCMU voice bridge (RFC 3550 framing).

Each outbound packet carries one 20 ms µ-law frame: sequence +1, timestamp
+160, constant SSRC.  Inbound packets pass through a small reordering jitter
buffer before decoding.
"""

from __future__ import annotations

import random
import socket
import struct
import threading
from dataclasses import dataclass
from typing import Optional

from .audio import FRAME_SAMPLES

PAYLOAD_TYPE_PCMU = 0
_HEADER = struct.Struct("!BBHII")
HEADER_BYTES = _HEADER.size


@dataclass(frozen=True)
class RtpPacket:
    payload_type: int
    seq: int
    timestamp: int
    ssrc: int
    payload: bytes
    marker: bool = False


def encode_packet(pkt: RtpPacket) -> bytes:
    b0 = 0x80  # V=2, no padding, no extension, no CSRC
    b1 = (0x80 if pkt.marker else 0) | (pkt.payload_type & 0x7F)
    return _HEADER.pack(b0, b1, pkt.seq & 0xFFFF, pkt.timestamp & 0xFFFFFFFF, pkt.ssrc) + pkt.payload


def decode_packet(data: bytes) -> Optional[RtpPacket]:
    if len(data) < HEADER_BYTES:
        return None
    b0, b1, seq, timestamp, ssrc = _HEADER.unpack_from(data)
    if b0 >> 6 != 2:
        return None
    csrc_count = b0 & 0x0F
    offset = HEADER_BYTES + 4 * csrc_count
    if b0 & 0x10:  # extension header
        if len(data) < offset + 4:
            return None
        ext_len = struct.unpack_from("!HH", data, offset)[1]
        offset += 4 + 4 * ext_len
    if len(data) < offset:
        return None
    payload = data[offset:]
    if b0 & 0x20 and payload:  # padding
        pad = payload[-1]
        payload = payload[:-pad] if pad <= len(payload) else b""
    return RtpPacket(
        payload_type=b1 & 0x7F,
        seq=seq,
        timestamp=timestamp,
        ssrc=ssrc,
        payload=payload,
        marker=bool(b1 & 0x80),
    )


class JitterBuffer:
    """Reorders inbound frames; holds at most `depth` packets."""

    def __init__(self, depth: int = 3):
        self.depth = depth
        self._pending: "dict[int, RtpPacket]" = {}
        self._next_seq: Optional[int] = None
        self.late_drops = 0

    def push(self, pkt: RtpPacket) -> "list[RtpPacket]":
        if self._next_seq is None:
            self._next_seq = pkt.seq
        delta = (pkt.seq - self._next_seq) & 0xFFFF
        if delta > 0x7FFF:  # older than the next expected frame
            self.late_drops += 1
            return []
        self._pending[pkt.seq] = pkt
        out = []
        while self._next_seq in self._pending:
            out.append(self._pending.pop(self._next_seq))
            self._next_seq = (self._next_seq + 1) & 0xFFFF
        while len(self._pending) > self.depth:
            # gap is not going to fill: skip forward to the oldest queued seq
            oldest = min(self._pending, key=lambda s: (s - self._next_seq) & 0xFFFF)
            self._next_seq = oldest
            while self._next_seq in self._pending:
                out.append(self._pending.pop(self._next_seq))
                self._next_seq = (self._next_seq + 1) & 0xFFFF
        return out


class RtpSession:
    """One bound UDP socket with outbound sequencing state.

    The remote endpoint may be fixed up front or learned from the first
    inbound packet (symmetric RTP).
    """

    def __init__(
        self,
        bind_host: str = "127.0.0.1",
        bind_port: int = 0,
        remote: "Optional[tuple[str, int]]" = None,
        payload_type: int = PAYLOAD_TYPE_PCMU,
    ):
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self.sock.bind((bind_host, bind_port))
        self.sock.settimeout(0.2)
        self.remote = remote
        self.payload_type = payload_type
        self.ssrc = random.getrandbits(32)
        self.seq = random.getrandbits(16)
        self.timestamp = random.getrandbits(32)
        self.sent = 0
        self.received = 0
        self._lock = threading.Lock()
        self._closed = False

    @property
    def local_addr(self) -> "tuple[str, int]":
        return self.sock.getsockname()

    def send_payload(self, payload: bytes, marker: bool = False) -> bool:
        with self._lock:
            remote = self.remote
            if remote is None or self._closed:
                return False
            pkt = RtpPacket(
                payload_type=self.payload_type,
                seq=self.seq,
                timestamp=self.timestamp,
                ssrc=self.ssrc,
                payload=payload,
                marker=marker,
            )
            self.seq = (self.seq + 1) & 0xFFFF
            self.timestamp = (self.timestamp + FRAME_SAMPLES) & 0xFFFFFFFF
            self.sent += 1
        try:
            self.sock.sendto(encode_packet(pkt), remote)
            return True
        except OSError:
            return False

    def recv_packet(self) -> Optional[RtpPacket]:
        try:
            data, addr = self.sock.recvfrom(2048)
        except socket.timeout:
            return None
        except OSError:
            return None
        pkt = decode_packet(data)
        if pkt is None:
            return None
        with self._lock:
            if self.remote is None:
                self.remote = addr
            self.received += 1
        return pkt

    def close(self) -> None:
        with self._lock:
            self._closed = True
        self.sock.close()
