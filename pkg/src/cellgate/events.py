"""Gateway event fan-out with bounded replay.

Events get a strictly increasing sequence number and are retained in a ring
of the most recent 1024 so a reconnecting stream client can resume from its
last seen seq without loss or duplication inside the window.
"""

from __future__ import annotations

import json
import queue
import threading
import time
from collections import deque
from dataclasses import dataclass
from typing import Optional

RETENTION = 1024


@dataclass(frozen=True)
class GatewayEvent:
    seq: int
    kind: str
    payload: dict
    at: float

    def sse(self) -> str:
        data = json.dumps({"kind": self.kind, "seq": self.seq, "at": self.at, "payload": self.payload})
        return f"id: {self.seq}\nevent: {self.kind}\ndata: {data}\n\n"


class EventSubscription:
    def __init__(self, bus: "EventBus", backlog: "list[GatewayEvent]"):
        self._bus = bus
        self._queue: "queue.SimpleQueue[GatewayEvent]" = queue.SimpleQueue()
        for event in backlog:
            self._queue.put(event)
        self.closed = False

    def get(self, timeout: Optional[float] = None) -> Optional[GatewayEvent]:
        try:
            return self._queue.get(timeout=timeout)
        except queue.Empty:
            return None

    def close(self) -> None:
        self.closed = True
        self._bus._drop(self)


class EventBus:
    def __init__(self, retention: int = RETENTION):
        self._lock = threading.Lock()
        self._ring: "deque[GatewayEvent]" = deque(maxlen=retention)
        self._subs: "list[EventSubscription]" = []
        self._next_seq = 1

    def emit(self, kind: str, payload: dict) -> GatewayEvent:
        with self._lock:
            event = GatewayEvent(seq=self._next_seq, kind=kind, payload=payload, at=time.time())
            self._next_seq += 1
            self._ring.append(event)
            subs = list(self._subs)
        for sub in subs:
            sub._queue.put(event)
        return event

    def subscribe(self, last_seq: Optional[int] = None) -> EventSubscription:
        """Backlog replay and live registration happen under one lock, so no
        event is lost or duplicated around the subscription instant."""
        with self._lock:
            backlog = [e for e in self._ring if last_seq is None or e.seq > last_seq]
            sub = EventSubscription(self, backlog)
            self._subs.append(sub)
            return sub

    def _drop(self, sub: EventSubscription) -> None:
        with self._lock:
            if sub in self._subs:
                self._subs.remove(sub)

    @property
    def last_seq(self) -> int:
        with self._lock:
            return self._next_seq - 1
