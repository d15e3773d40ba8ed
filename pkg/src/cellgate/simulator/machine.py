"""The virtual modem's command interpreter.

`handle_line` maps one received command line to the response lines to write;
`PROMPT` in the returned list switches the connection into payload mode and
`handle_payload` finishes the exchange.  Unsolicited lines (ring cadence,
message arrival, registration changes) go through the `urcs` queue; the
server drains it between response lines and while idle, so a URC can land in
the middle of a multi-line response exactly like on real hardware.
"""

from __future__ import annotations

import logging
import queue
import threading
from typing import Optional

from . import smscodec
from .state import Clock, PhonebookEntry, SimCall, SimState

logger = logging.getLogger(__name__)

PROMPT = "<PROMPT>"

# Commands usable before the PIN has been entered.
PIN_EXEMPT = {"", "E", "+CPIN", "+CMEE", "+CGMI", "+CGMM", "+CLAC", "+CSQ", "+CREG", "H", "+CHUP"}

CME_SIM_PIN_REQUIRED = 11
CME_INCORRECT_PASSWORD = 16
CME_SIM_PUK_REQUIRED = 12
CME_MEMORY_FULL = 20
CME_INVALID_INDEX = 21
CME_TEXT_TOO_LONG = 24
CME_NOT_FOUND = 22
CMS_NO_NETWORK = 331
CMS_INVALID_PDU = 304
CMS_INVALID_INDEX = 321
CMS_MEMORY_FULL = 322


class SimMachine:
    def __init__(self, state: SimState, clock: Optional[Clock] = None):
        self.state = state
        self.clock = clock or Clock()
        self.urcs: "queue.Queue[str]" = queue.Queue()
        self.lock = threading.RLock()
        self._payload_pending: Optional[int] = None  # declared TPDU length
        self._ring_generation = 0
        self.on_call_active = None  # callback for the audio side-channel
        self.on_call_ended = None

    # -- URC helpers --------------------------------------------------------

    def push_urc(self, line: str) -> None:
        self.urcs.put(line)

    # -- command entry ------------------------------------------------------

    @property
    def in_payload_mode(self) -> bool:
        return self._payload_pending is not None

    def handle_line(self, raw: str) -> "list[str]":
        line = raw.strip()
        if not line:
            return []
        if len(line) < 2 or line[:2].upper() != "AT":
            return ["ERROR"]
        body = line[2:]
        try:
            return self._dispatch(body)
        except Exception:
            logger.exception("simulator error on %r", raw)
            return ["ERROR"]

    def _cme(self, code: int) -> "list[str]":
        if self.state.cmee:
            return [f"+CME ERROR: {code}"]
        return ["ERROR"]

    def _dispatch(self, body: str) -> "list[str]":
        if body == "":
            return ["OK"]
        name, suffix = self._split(body)
        if name is None:
            return ["ERROR"]
        with self.lock:
            if name not in self.state.capabilities and name != "":
                return ["ERROR"]
            if self.state.pin_locked and name not in PIN_EXEMPT:
                return self._cme(CME_SIM_PIN_REQUIRED)
            handler = getattr(self, f"_cmd_{self._slug(name)}", None)
            if handler is None:
                return ["ERROR"]
            return handler(suffix)

    @staticmethod
    def _slug(name: str) -> str:
        return name.replace("+", "plus_").lower()

    @staticmethod
    def _split(body: str) -> "tuple[Optional[str], str]":
        """Split 'AT' command body into (name, remainder)."""
        if body.startswith("+") or body.startswith("*"):
            for i, ch in enumerate(body):
                if ch in "=?":
                    return body[:i], body[i:]
            return body, ""
        head = body[0].upper()
        if head in ("A", "H", "E"):
            return head, body[1:]
        if head == "D":
            return "D", body[1:]
        return None, body

    @staticmethod
    def _parse_args(suffix: str) -> "list[str]":
        """Split '=a,"b c",1' into raw argument strings (quotes kept)."""
        if not suffix.startswith("="):
            return []
        text = suffix[1:]
        args = []
        current = []
        in_quote = False
        for ch in text:
            if ch == '"':
                in_quote = not in_quote
                current.append(ch)
            elif ch == "," and not in_quote:
                args.append("".join(current))
                current = []
            else:
                current.append(ch)
        args.append("".join(current))
        return args

    @staticmethod
    def _unquote(arg: str) -> str:
        arg = arg.strip()
        if len(arg) >= 2 and arg[0] == '"' and arg[-1] == '"':
            return arg[1:-1]
        return arg

    # -- basic commands -------------------------------------------------------

    def _cmd_e(self, suffix: str) -> "list[str]":
        if suffix in ("0", "1"):
            self.state.echo = suffix == "1"
            return ["OK"]
        return ["ERROR"]

    def _cmd_a(self, suffix: str) -> "list[str]":
        if suffix:
            return ["ERROR"]
        call = self.state.call
        if call is None or call.state != "ringing" or call.direction != "incoming":
            return ["NO CARRIER"]
        self._answer_call(call)
        return ["OK"]

    def _cmd_d(self, suffix: str) -> "list[str]":
        if self.state.call is not None:
            return ["BUSY"]
        dial = suffix.strip()
        if not dial.endswith(";"):
            return ["NO CARRIER"]  # data calls are not provided
        target = dial[:-1]
        if target.startswith(">"):
            try:
                index = int(target[1:])
            except ValueError:
                return ["ERROR"]
            book = self.state.phonebooks[self.state.current_phonebook]
            entry = book.slots.get(index)
            if entry is None:
                return self._cme(CME_INVALID_INDEX)
            target = entry.number
        if not target or any(ch not in "+0123456789*#" for ch in target):
            return ["ERROR"]
        if not self.state.registered:
            return ["NO CARRIER"]
        self.clock.sleep(self.state.dial_delay)
        outcome = self.state.next_dial_outcome
        self.state.next_dial_outcome = "ok"
        if outcome == "busy":
            return ["BUSY"]
        if outcome == "no-answer":
            return ["NO ANSWER"]
        if outcome == "no-carrier":
            return ["NO CARRIER"]
        call = SimCall(peer=target, direction="outgoing", state="active", started_at=self.clock.now())
        self.state.call = call
        if self.on_call_active:
            self.on_call_active(call)
        return ["OK"]

    def _cmd_h(self, suffix: str) -> "list[str]":
        if suffix not in ("", "0"):
            return ["ERROR"]
        self._clear_call()
        return ["OK"]

    def _cmd_plus_chup(self, suffix: str) -> "list[str]":
        if suffix == "=?":
            return ["OK"]
        if suffix:
            return ["ERROR"]
        self._clear_call()
        return ["OK"]

    # -- identity / status ------------------------------------------------------

    def _cmd_plus_cgmi(self, suffix: str) -> "list[str]":
        if suffix == "=?":
            return ["OK"]
        return [self.state.manufacturer, "OK"]

    def _cmd_plus_cgmm(self, suffix: str) -> "list[str]":
        if suffix == "=?":
            return ["OK"]
        return [self.state.model, "OK"]

    def _cmd_plus_csq(self, suffix: str) -> "list[str]":
        if suffix == "=?":
            return ["+CSQ: (0-31,99),(0-7,99)", "OK"]
        if suffix:
            return ["ERROR"]
        return [f"+CSQ: {self.state.signal_n},{self.state.signal_ber}", "OK"]

    def _cmd_plus_creg(self, suffix: str) -> "list[str]":
        if suffix == "?":
            return [f"+CREG: 0,{self.state.registration}", "OK"]
        if suffix == "=?":
            return ["+CREG: (0-2)", "OK"]
        if suffix.startswith("="):
            return ["OK"]
        return ["ERROR"]

    def _cmd_plus_clac(self, suffix: str) -> "list[str]":
        if suffix:
            return ["ERROR"]
        return sorted(self.state.capabilities) + ["OK"]

    # -- SIM / config -------------------------------------------------------------

    def _cmd_plus_cpin(self, suffix: str) -> "list[str]":
        state = self.state
        if suffix == "?":
            if state.puk_locked:
                return ["+CPIN: SIM PUK", "OK"]
            if state.pin_locked:
                return ["+CPIN: SIM PIN", "OK"]
            return ["+CPIN: READY", "OK"]
        if suffix == "=?":
            return ["OK"]
        if suffix.startswith("="):
            if state.puk_locked:
                return self._cme(CME_SIM_PUK_REQUIRED)
            if not state.pin_locked:
                return ["OK"]
            code = self._unquote(suffix[1:])
            if code == state.pin_code:
                state.pin_locked = False
                state.pin_attempts_left = 3
                return ["OK"]
            state.pin_attempts_left -= 1
            if state.pin_attempts_left <= 0:
                state.puk_locked = True
            return self._cme(CME_INCORRECT_PASSWORD)
        return ["ERROR"]

    def _set_flag(self, suffix: str, attr: str, allowed: "tuple[int, ...]") -> "list[str]":
        if suffix == "=?":
            return ["OK"]
        if suffix == "?":
            return [f"{attr.upper()}: {getattr(self.state, attr)}", "OK"]
        if suffix.startswith("="):
            try:
                value = int(suffix[1:])
            except ValueError:
                return ["ERROR"]
            if value not in allowed:
                return ["ERROR"]
            setattr(self.state, attr, value)
            return ["OK"]
        return ["ERROR"]

    def _cmd_plus_cmee(self, suffix: str) -> "list[str]":
        return self._set_flag(suffix, "cmee", (0, 1, 2))

    def _cmd_plus_crc(self, suffix: str) -> "list[str]":
        return self._set_flag(suffix, "crc", (0, 1))

    def _cmd_plus_clip(self, suffix: str) -> "list[str]":
        return self._set_flag(suffix, "clip", (0, 1))

    def _cmd_plus_csta(self, suffix: str) -> "list[str]":
        if suffix == "?":
            return [f"+CSTA: {self.state.csta}", "OK"]
        return self._set_flag(suffix, "csta", (129, 145))

    def _cmd_plus_cnmi(self, suffix: str) -> "list[str]":
        if suffix == "=?":
            return ["+CNMI: (0-2),(0-1)", "OK"]
        if suffix == "?":
            values = ",".join(str(v) for v in self.state.cnmi) or "0,0"
            return [f"+CNMI: {values}", "OK"]
        if suffix.startswith("="):
            try:
                self.state.cnmi = tuple(int(v) for v in suffix[1:].split(","))
            except ValueError:
                return ["ERROR"]
            return ["OK"]
        return ["ERROR"]

    def _cmd_plus_cmgf(self, suffix: str) -> "list[str]":
        # Strict PDU-mode device: text mode is not offered.
        if suffix == "=?":
            return ["+CMGF: (0)", "OK"]
        if suffix == "?":
            return ["+CMGF: 0", "OK"]
        if suffix == "=0":
            return ["OK"]
        return ["ERROR"]

    # -- messaging ------------------------------------------------------------------

    def _cmd_plus_cpms(self, suffix: str) -> "list[str]":
        stores = self.state.sms_stores
        if suffix == "=?":
            names = ",".join(f'"{n}"' for n in stores)
            return [f"+CPMS: ({names}),({names}),({names})", "OK"]
        if suffix == "?":
            s = stores[self.state.current_store]
            r = stores[self.state.receive_store]
            part = f'"{self.state.current_store}",{s.used},{s.capacity}'
            rpart = f'"{self.state.receive_store}",{r.used},{r.capacity}'
            return [f"+CPMS: {part},{part},{rpart}", "OK"]
        if suffix.startswith("="):
            names = [self._unquote(a) for a in self._parse_args(suffix)]
            if not names or any(n not in stores for n in names):
                return self._cme(CME_NOT_FOUND)
            self.state.current_store = names[0]
            if len(names) >= 3:
                self.state.receive_store = names[2]
            reply = []
            for name in (names + [self.state.current_store] * 2)[:3]:
                store = stores[name]
                reply.append(f"{store.used},{store.capacity}")
            return ["+CPMS: " + ",".join(reply), "OK"]
        return ["ERROR"]

    def _cmd_plus_cmgs(self, suffix: str) -> "list[str]":
        if suffix == "=?":
            return ["OK"]
        if not suffix.startswith("="):
            return ["ERROR"]
        if not self.state.registered:
            return [f"+CMS ERROR: {CMS_NO_NETWORK}"]
        try:
            declared = int(suffix[1:])
        except ValueError:
            return ["ERROR"]
        if declared <= 0:
            return ["ERROR"]
        self._payload_pending = declared
        return [PROMPT]

    def handle_payload(self, body: bytes, aborted: bool) -> "list[str]":
        declared = self._payload_pending
        self._payload_pending = None
        if aborted:
            return ["OK"]
        text = body.decode("ascii", errors="replace").strip()
        try:
            pdu_octets = bytes.fromhex(text)
        except ValueError:
            return [f"+CMS ERROR: {CMS_INVALID_PDU}"]
        if not pdu_octets:
            return [f"+CMS ERROR: {CMS_INVALID_PDU}"]
        sca_len = pdu_octets[0]
        if len(pdu_octets) - 1 - sca_len != declared:
            return [f"+CMS ERROR: {CMS_INVALID_PDU}"]
        try:
            decoded = smscodec.decode_submit(text)
        except smscodec.SimSmsError:
            return [f"+CMS ERROR: {CMS_INVALID_PDU}"]
        with self.lock:
            mr = self.state.take_mr()
            self.state.outbox.append(
                {
                    "destination": decoded.destination,
                    "text": decoded.text,
                    "mr": mr,
                    "tp_mr": decoded.message_ref,
                    "alphabet": decoded.alphabet,
                    "concat": decoded.concat,
                    "pdu": text.upper(),
                }
            )
        return [f"+CMGS: {mr}", "OK"]

    def _store(self):
        return self.state.sms_stores[self.state.current_store]

    def _cmd_plus_cmgr(self, suffix: str) -> "list[str]":
        if suffix == "=?":
            return ["OK"]
        if not suffix.startswith("="):
            return ["ERROR"]
        try:
            index = int(suffix[1:])
        except ValueError:
            return ["ERROR"]
        slot = self._store().slots.get(index)
        if slot is None:
            return [f"+CMS ERROR: {CMS_INVALID_INDEX}"]
        stat = 1 if slot.read else 0
        slot.read = True
        return [f"+CMGR: {stat},,{slot.octets}", slot.pdu, "OK"]

    def _cmd_plus_cmgl(self, suffix: str) -> "list[str]":
        if suffix == "=?":
            return ['+CMGL: (0-4)', "OK"]
        stat = 0
        if suffix.startswith("="):
            try:
                stat = int(suffix[1:])
            except ValueError:
                return ["ERROR"]
        lines = []
        store = self._store()
        for index in sorted(store.slots):
            slot = store.slots[index]
            current = 1 if slot.read else 0
            if stat == 4 or current == stat:
                lines.append(f"+CMGL: {index},{current},,{slot.octets}")
                lines.append(slot.pdu)
                if stat in (0, 4):
                    slot.read = True
        lines.append("OK")
        return lines

    def _cmd_plus_cmgd(self, suffix: str) -> "list[str]":
        if suffix == "=?":
            indexes = ",".join(str(i) for i in sorted(self._store().slots)) or ""
            return [f"+CMGD: ({indexes})", "OK"]
        if not suffix.startswith("="):
            return ["ERROR"]
        try:
            index = int(suffix[1:].split(",")[0])
        except ValueError:
            return ["ERROR"]
        if index not in self._store().slots:
            return [f"+CMS ERROR: {CMS_INVALID_INDEX}"]
        del self._store().slots[index]
        return ["OK"]

    # -- phonebook ----------------------------------------------------------------------

    def _book(self):
        return self.state.phonebooks[self.state.current_phonebook]

    def _cmd_plus_cpbs(self, suffix: str) -> "list[str]":
        if suffix == "=?":
            names = ",".join(f'"{n}"' for n in self.state.phonebooks)
            return [f"+CPBS: ({names})", "OK"]
        if suffix == "?":
            book = self._book()
            return [f'+CPBS: "{self.state.current_phonebook}",{book.used},{book.capacity}', "OK"]
        if suffix.startswith("="):
            name = self._unquote(suffix[1:])
            if name not in self.state.phonebooks:
                return self._cme(CME_NOT_FOUND)
            self.state.current_phonebook = name
            return ["OK"]
        return ["ERROR"]

    def _entry_lines(self, items) -> "list[str]":
        lines = []
        for index, entry in items:
            lines.append(f'+CPBR: {index},"{entry.number}",{entry.ntype},"{entry.text}"')
        return lines

    def _cmd_plus_cpbr(self, suffix: str) -> "list[str]":
        book = self._book()
        if suffix == "=?":
            return [f"+CPBR: (1-{book.capacity}),{book.number_len},{book.text_len}", "OK"]
        if not suffix.startswith("="):
            return ["ERROR"]
        parts = suffix[1:].split(",")
        try:
            first = int(parts[0])
            last = int(parts[1]) if len(parts) > 1 else first
        except ValueError:
            return ["ERROR"]
        if first < 1 or last > book.capacity or first > last:
            return self._cme(CME_INVALID_INDEX)
        items = [(i, book.slots[i]) for i in range(first, last + 1) if i in book.slots]
        return self._entry_lines(items) + ["OK"]

    def _cmd_plus_cpbw(self, suffix: str) -> "list[str]":
        if suffix == "=?":
            book = self._book()
            return [f'+CPBW: (1-{book.capacity}),{book.number_len},(129,145),{book.text_len}', "OK"]
        if not suffix.startswith("="):
            return ["ERROR"]
        args = self._parse_args(suffix)
        book = self._book()
        index: Optional[int] = None
        if args and args[0].strip():
            try:
                index = int(args[0])
            except ValueError:
                return ["ERROR"]
            if index < 1 or index > book.capacity:
                return self._cme(CME_INVALID_INDEX)
        if len(args) < 2 or not args[1].strip():
            # delete form: +CPBW=<index>
            if index is None:
                return ["ERROR"]
            book.slots.pop(index, None)
            return ["OK"]
        number = self._unquote(args[1])
        ntype = 145 if number.startswith("+") else 129
        if len(args) >= 3 and args[2].strip():
            try:
                ntype = int(args[2])
            except ValueError:
                return ["ERROR"]
        text = self._unquote(args[3]) if len(args) >= 4 else ""
        if len(number.lstrip("+")) > book.number_len:
            return self._cme(CME_TEXT_TOO_LONG)
        if len(text) > book.text_len:
            return self._cme(CME_TEXT_TOO_LONG)
        if index is None:
            index = book.first_free()
            if index is None:
                return self._cme(CME_MEMORY_FULL)
        book.slots[index] = PhonebookEntry(number=number, ntype=ntype, text=text)
        return ["OK"]

    def _cmd_plus_cpbf(self, suffix: str) -> "list[str]":
        if suffix == "=?":
            book = self._book()
            return [f"+CPBF: {book.number_len},{book.text_len}", "OK"]
        if not suffix.startswith("="):
            return ["ERROR"]
        prefix = self._unquote(suffix[1:])
        book = self._book()
        items = [
            (i, e) for i, e in sorted(book.slots.items()) if e.text.startswith(prefix)
        ]
        return self._entry_lines(items) + ["OK"]

    # -- (U)SIM access ---------------------------------------------------------------------

    def _cmd_plus_csim(self, suffix: str) -> "list[str]":
        if suffix == "=?":
            return ["OK"]
        if not suffix.startswith("="):
            return ["ERROR"]
        args = self._parse_args(suffix)
        if len(args) != 2:
            return ["ERROR"]
        try:
            declared = int(args[0])
        except ValueError:
            return ["ERROR"]
        apdu = self._unquote(args[1]).upper()
        if declared != len(apdu) or len(apdu) % 2:
            return self._cme(50)
        response = self.state.apdu_table.get(apdu)
        if response is None:
            response = "6D00"  # instruction not supported
        return [f'+CSIM: {len(response)},"{response}"', "OK"]

    def _cmd_plus_crsm(self, suffix: str) -> "list[str]":
        if suffix == "=?":
            return ["OK"]
        if not suffix.startswith("="):
            return ["ERROR"]
        key = suffix[1:].replace(" ", "")
        response = self.state.apdu_table.get(f"CRSM:{key}")
        if response is None:
            return ["+CRSM: 144,0", "OK"]
        return [f'+CRSM: 144,0,"{response}"', "OK"]

    # -- control-plane operations -------------------------------------------------------------

    def inject_sms(self, sender: str, text: str, concat=None) -> "tuple[Optional[int], Optional[str]]":
        """Store a DELIVER built with the simulator's own encoder; emits +CMTI."""
        if any(ch not in "+0123456789" for ch in sender):
            return None, "bad-sender"
        now = self.clock.now()
        ts = (2024, 1, 1, 0, 0, int(now) % 60, 0)
        pdu = smscodec.encode_deliver(sender, text, timestamp=ts, concat=concat)
        with self.lock:
            store_name = self.state.receive_store
            index = self.state.sms_stores[store_name].add(pdu)
            if index is None:
                return None, "store-full"
            cnmi = self.state.cnmi
        if len(cnmi) >= 2 and cnmi[1] >= 1:
            self.push_urc(f'+CMTI: "{store_name}",{index}')
        return index, None

    def inject_call(self, caller: str) -> Optional[str]:
        with self.lock:
            if self.state.call is not None:
                return "busy"
            if any(ch not in "+0123456789" for ch in caller):
                return "bad-caller"
            call = SimCall(peer=caller, direction="incoming", state="ringing", started_at=self.clock.now())
            self.state.call = call
            self._ring_generation += 1
            generation = self._ring_generation
        threading.Thread(
            target=self._ring_loop, args=(call, generation), daemon=True
        ).start()
        return None

    def _ring_loop(self, call: SimCall, generation: int) -> None:
        first = True
        while True:
            with self.lock:
                current = self.state.call
                if (
                    generation != self._ring_generation
                    or current is not call
                    or call.state != "ringing"
                ):
                    return
                if self.state.crc:
                    self.push_urc("+CRING: VOICE")
                else:
                    self.push_urc("RING")
                if first and self.state.clip:
                    ntype = 145 if call.peer.startswith("+") else 129
                    self.push_urc(f'+CLIP: "{call.peer}",{ntype}')
            first = False
            self.clock.sleep(self.state.ring_interval)

    def remote_hangup(self) -> Optional[str]:
        with self.lock:
            call = self.state.call
            if call is None:
                return "no-call"
            self._end_call(call)
            self.push_urc("NO CARRIER")
        return None

    def _answer_call(self, call: SimCall) -> None:
        call.state = "active"
        call.started_at = self.clock.now()
        self._ring_generation += 1
        if self.on_call_active:
            self.on_call_active(call)

    def _clear_call(self) -> None:
        with self.lock:
            call = self.state.call
            if call is None:
                return
            self._end_call(call)

    def _end_call(self, call: SimCall) -> None:
        self.state.call = None
        self._ring_generation += 1
        if self.on_call_ended:
            self.on_call_ended(call)

    def set_registration(self, stat: int) -> None:
        with self.lock:
            self.state.registration = stat
        self.push_urc(f"+CREG: {stat}")

    def set_signal(self, n: int, ber: int = 99) -> None:
        with self.lock:
            self.state.signal_n = n
            self.state.signal_ber = ber

    def set_capabilities(self, commands) -> None:
        with self.lock:
            self.state.capabilities = set(commands)
