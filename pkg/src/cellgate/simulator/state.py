"""Mutable state of the virtual modem: SIM lock, registration, signal,
message/phonebook stores, capability set and the single call slot."""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from typing import Optional


class Clock:
    """Injectable time source so ring cadence and delays are test-controllable."""

    def now(self) -> float:
        return time.monotonic()

    def sleep(self, seconds: float) -> None:
        time.sleep(seconds)


class VirtualClock(Clock):
    """Manually advanced clock; sleep() returns once time has been advanced."""

    def __init__(self):
        self._now = 0.0
        self._cond = threading.Condition()

    def now(self) -> float:
        with self._cond:
            return self._now

    def sleep(self, seconds: float) -> None:
        with self._cond:
            deadline = self._now + seconds
            while self._now < deadline:
                self._cond.wait(0.5)

    def advance(self, seconds: float) -> None:
        with self._cond:
            self._now += seconds
            self._cond.notify_all()


@dataclass
class StoredMessage:
    pdu: str
    read: bool = False

    @property
    def octets(self) -> int:
        return len(self.pdu) // 2 - 1  # TPDU length without the SCA octet


class MessageStore:
    def __init__(self, capacity: int = 30):
        self.capacity = capacity
        self.slots: "dict[int, StoredMessage]" = {}

    @property
    def used(self) -> int:
        return len(self.slots)

    def add(self, pdu: str) -> Optional[int]:
        if self.used >= self.capacity:
            return None
        index = 1
        while index in self.slots:
            index += 1
        self.slots[index] = StoredMessage(pdu=pdu)
        return index


@dataclass
class PhonebookEntry:
    number: str
    ntype: int
    text: str


class PhonebookStore:
    def __init__(self, capacity: int = 50, number_len: int = 20, text_len: int = 14):
        self.capacity = capacity
        self.number_len = number_len
        self.text_len = text_len
        self.slots: "dict[int, PhonebookEntry]" = {}

    @property
    def used(self) -> int:
        return len(self.slots)

    def first_free(self) -> Optional[int]:
        for index in range(1, self.capacity + 1):
            if index not in self.slots:
                return index
        return None


@dataclass
class SimCall:
    peer: str
    direction: str  # "incoming" | "outgoing"
    state: str  # "ringing" | "active"
    started_at: float = 0.0


DEFAULT_CAPABILITIES = (
    "A", "D", "E", "H",
    "+CHUP", "+CPIN", "+CMEE", "+CGMI", "+CGMM", "+CSQ", "+CREG", "+CRC",
    "+CLIP", "+CNMI", "+CMGF", "+CMGS", "+CMGR", "+CMGL", "+CMGD", "+CPMS",
    "+CPBS", "+CPBR", "+CPBW", "+CPBF", "+CSIM", "+CRSM", "+CLAC", "+CSTA",
)


@dataclass
class SimState:
    pin_code: str = "0000"
    pin_locked: bool = False
    pin_attempts_left: int = 3
    puk_locked: bool = False
    registration: int = 1  # +CREG <stat>
    signal_n: int = 18
    signal_ber: int = 99
    manufacturer: str = "SIMCOM_LTD"
    model: str = "SIM800C"
    capabilities: "set[str]" = field(default_factory=lambda: set(DEFAULT_CAPABILITIES))
    echo: bool = True
    cmee: int = 0
    crc: int = 0
    clip: int = 0
    cnmi: "tuple[int, ...]" = ()
    pdu_mode: bool = True
    csta: int = 145
    sms_stores: "dict[str, MessageStore]" = field(
        default_factory=lambda: {"SM": MessageStore(30), "ME": MessageStore(50)}
    )
    current_store: str = "SM"
    receive_store: str = "SM"
    phonebooks: "dict[str, PhonebookStore]" = field(
        default_factory=lambda: {"SM": PhonebookStore(50), "ME": PhonebookStore(100)}
    )
    current_phonebook: str = "SM"
    apdu_table: "dict[str, str]" = field(default_factory=dict)
    call: Optional[SimCall] = None
    outbox: "list[dict]" = field(default_factory=list)
    next_mr: int = 0
    next_dial_outcome: str = "ok"  # ok | busy | no-answer | no-carrier
    dial_delay: float = 0.05
    ring_interval: float = 2.0
    tone_frequency: float = 440.0
    tone_duration: Optional[float] = None  # None: while the call is active

    @property
    def registered(self) -> bool:
        return self.registration in (1, 5)

    def take_mr(self) -> int:
        mr = self.next_mr
        self.next_mr = (self.next_mr + 1) % 256
        return mr
