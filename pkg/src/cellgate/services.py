"""High-level modem services over the AT engine: initialization, status,
messaging, phonebook, raw (U)SIM access and data snapshot/sync.

All modem effects funnel through the engine's single-flight queue; this layer
is stateless apart from the cached profile/capability catalog.  Incoming
message indications are auto-fetched and re-published to event listeners.
"""

from __future__ import annotations

import enum
import logging
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Callable, Optional

from . import sms
from .atproto import AtCommand, CommandKind, FinalCode, LONG_TIMEOUT
from .engine import AtEngine, ExecResult
from .errors import (
    AtError,
    CmeError,
    CmsError,
    CommandUnsupported,
    InitCommandFailed,
    ServiceUnavailable,
    SimPinRequired,
    SimPukRequired,
    SmsSendError,
)

logger = logging.getLogger(__name__)

# Service derivation is data, reviewed like config: a service is offered when
# every listed command is in the discovered catalog.  MMS transacts over HTTP
# (the data bearer is assumed attached), so it has no AT requirement here; the
# gateway additionally gates it on a configured MMSC URL.
SERVICE_REQUIREMENTS: "dict[str, frozenset[str]]" = {
    "sms": frozenset({"+CMGS"}),
    "mms": frozenset(),
    "voice": frozenset({"+CHUP"}),
    "phonebook": frozenset({"+CPBS", "+CPBR", "+CPBW"}),
    "sim_access": frozenset({"+CSIM"}),
}

# Extended commands probed one by one when the modem cannot list its own set.
PROBE_COMMANDS = (
    "+CHUP", "+CLIP", "+CRC", "+CNMI", "+CMGF", "+CMGS", "+CMGR", "+CMGL",
    "+CMGD", "+CPMS", "+CPBS", "+CPBR", "+CPBW", "+CPBF", "+CSIM", "+CRSM",
    "+CSTA", "+CSQ", "+CREG",
)
# Basic V.250 commands have no =? form; present on anything that dials.
BASIC_COMMANDS = ("A", "D", "H", "E")


class Registration(enum.Enum):
    NOT_REGISTERED = "not_registered"
    REGISTERED_HOME = "registered_home"
    SEARCHING = "searching"
    DENIED = "denied"
    UNKNOWN = "unknown"
    REGISTERED_ROAMING = "registered_roaming"


_CREG_STATS = {
    0: Registration.NOT_REGISTERED,
    1: Registration.REGISTERED_HOME,
    2: Registration.SEARCHING,
    3: Registration.DENIED,
    4: Registration.UNKNOWN,
    5: Registration.REGISTERED_ROAMING,
}


@dataclass
class ModemStatus:
    registration: Registration = Registration.UNKNOWN
    rssi_dbm: Optional[int] = None
    ber_class: Optional[int] = None

    def as_dict(self) -> dict:
        return {
            "registration": self.registration.value,
            "rssi_dbm": self.rssi_dbm,
            "ber_class": self.ber_class,
        }


def rssi_from_csq(n: int) -> Optional[int]:
    """Map the reported signal index to dBm: -113 + 2n for n in [0, 31]."""
    if 0 <= n <= 31:
        return -113 + 2 * n
    return None


def ber_from_csq(ber: int) -> Optional[int]:
    if 0 <= ber <= 7:
        return ber
    return None


@dataclass
class ModemProfile:
    manufacturer: str = ""
    model: str = ""


@dataclass
class CapabilityCatalog:
    supported_commands: "set[str]" = field(default_factory=set)
    derived_services: "set[str]" = field(default_factory=set)

    @classmethod
    def derive(cls, commands: "set[str]") -> "CapabilityCatalog":
        services = {
            name
            for name, required in SERVICE_REQUIREMENTS.items()
            if required <= commands
        }
        return cls(supported_commands=commands, derived_services=services)


@dataclass
class PhonebookEntry:
    index: int
    number: str
    text: str

    def as_dict(self) -> dict:
        return {"index": self.index, "number": self.number, "text": self.text}


@dataclass
class PhonebookLimits:
    first: int
    last: int
    number_len: int
    text_len: int


@dataclass
class StoredSms:
    index: int
    status: str  # "unread" | "read" | "unknown"
    storage: str
    message: "sms.SmsDeliver | sms.SmsSubmit"

    def as_dict(self) -> dict:
        msg = self.message
        record = {
            "index": self.index,
            "status": self.status,
            "storage": self.storage,
            "text": msg.user_data,
            "alphabet": msg.alphabet.value,
        }
        if isinstance(msg, sms.SmsDeliver):
            ts = msg.timestamp
            record["from"] = msg.originator.dial_string()
            record["at"] = (
                f"{ts.year:04d}-{ts.month:02d}-{ts.day:02d}"
                f"T{ts.hour:02d}:{ts.minute:02d}:{ts.second:02d}"
            )
            record["tz_hours"] = ts.tz_hours
        else:
            record["to"] = msg.destination.dial_string()
        if msg.udh:
            record["concat"] = {"ref": msg.udh.ref, "total": msg.udh.total, "seq": msg.udh.seq}
        return record


class ModemServices:
    def __init__(self, engine: AtEngine, *, sim_pin: Optional[str] = None, text_mode: bool = False):
        self.engine = engine
        self.sim_pin = sim_pin
        self.text_mode = text_mode
        self.profile = ModemProfile()
        self.catalog = CapabilityCatalog()
        self.initialized = False
        self._lock = threading.RLock()
        self._listeners: "list[Callable[[str, dict], None]]" = []
        self._urc_thread: Optional[threading.Thread] = None
        self._current_store: Optional[str] = None
        self._pb_limits: Optional[PhonebookLimits] = None
        self._next_tp_mr = 0

    # -- events ------------------------------------------------------------

    def add_listener(self, callback: Callable[[str, dict], None]) -> None:
        self._listeners.append(callback)

    def _emit(self, kind: str, payload: dict) -> None:
        for listener in list(self._listeners):
            try:
                listener(kind, payload)
            except Exception:
                logger.exception("service listener failed")

    # -- small exec helpers ---------------------------------------------------

    def _run(self, cmd: AtCommand) -> ExecResult:
        result = self.engine.execute(cmd)
        if result.final is None:
            return result
        code = result.final.code
        if code is FinalCode.CME_ERROR:
            raise CmeError(result.final.error_code or 0)
        if code is FinalCode.CMS_ERROR:
            raise CmsError(result.final.error_code or 0)
        return result

    def _set(self, name: str, *args, timeout: float = 5.0) -> ExecResult:
        return self._run(AtCommand(name, CommandKind.SET, tuple(args), timeout=timeout))

    def _read(self, name: str) -> ExecResult:
        return self._run(AtCommand(name, CommandKind.READ))

    # -- initialization ----------------------------------------------------------

    def init_modem(self) -> "tuple[ModemProfile, CapabilityCatalog]":
        with self._lock:
            for cmd in (AtCommand("E0"), AtCommand("+CMEE", CommandKind.SET, (1,))):
                result = self.engine.execute(cmd)
                if result.final is None or not result.final.ok:
                    raise InitCommandFailed(cmd.name, str(result.final))
            self._unlock_sim()
            self.profile = self._identify()
            quirk = self.engine.select_quirk(
                f"{self.profile.manufacturer} {self.profile.model}"
            )
            if quirk:
                for cmd in quirk.extra_init:
                    self.engine.execute(cmd)
            init_sequence = [
                AtCommand("+CRC", CommandKind.SET, (1,)),
                AtCommand("+CLIP", CommandKind.SET, (1,)),
                AtCommand("+CNMI", CommandKind.SET, (2, 1)),
                AtCommand("+CMGF", CommandKind.SET, (1 if self.text_mode else 0,)),
            ]
            for cmd in init_sequence:
                result = self.engine.execute(cmd)
                if result.final is None or not result.final.ok:
                    raise InitCommandFailed(cmd.name, str(result.final))
            self.catalog = self.discover_capabilities()
            self.initialized = True
            self._start_urc_listener()
            return self.profile, self.catalog

    def _unlock_sim(self) -> None:
        result = self._run(AtCommand("+CPIN", CommandKind.READ))
        values = result.values()
        state = values[0] if values else ""
        if state == "READY":
            return
        if state == "SIM PIN":
            if not self.sim_pin:
                raise SimPinRequired("SIM requires a PIN and none is configured")
            try:
                self._set("+CPIN", self.sim_pin)
            except CmeError as exc:
                raise SimPinRequired(f"configured PIN rejected ({exc})") from exc
            return
        if state == "SIM PUK":
            raise SimPukRequired("SIM is PUK-locked")
        raise InitCommandFailed("+CPIN?", f"unexpected state {state!r}")

    def _identify(self) -> ModemProfile:
        manufacturer = model = ""
        try:
            manufacturer = " ".join(self._run(AtCommand("+CGMI")).values())
        except AtError:
            pass
        try:
            model = " ".join(self._run(AtCommand("+CGMM")).values())
        except AtError:
            pass
        return ModemProfile(manufacturer=manufacturer, model=model)

    def discover_capabilities(self) -> CapabilityCatalog:
        """+CLAC when available, else probe each needed command with =?."""
        commands: "set[str]" = set(BASIC_COMMANDS)
        try:
            result = self.engine.execute(AtCommand("+CLAC"))
        except CommandUnsupported:
            result = None
        if result is not None and result.final is not None and result.final.ok:
            for line in result.values():
                for token in line.replace(",", "\n").splitlines():
                    token = token.strip()
                    if token:
                        commands.add(token if token.startswith(("+", "*")) else token.upper())
            commands |= set(BASIC_COMMANDS)
        else:
            for name in PROBE_COMMANDS:
                try:
                    probe = self.engine.execute(AtCommand(name, CommandKind.TEST))
                except (AtError, CommandUnsupported):
                    continue
                if probe.final is not None and probe.final.ok:
                    commands.add(name)
        catalog = CapabilityCatalog.derive(commands)
        with self._lock:
            self.catalog = catalog
        return catalog

    def _start_urc_listener(self) -> None:
        if self._urc_thread is not None:
            return
        sub = self.engine.subscribe_urcs()

        def pump():
            for urc in sub:
                try:
                    self._on_urc(urc)
                except Exception:
                    logger.exception("URC handling failed: %s", urc)

        self._urc_thread = threading.Thread(target=pump, name="svc-urc", daemon=True)
        self._urc_thread.start()

    def _on_urc(self, urc) -> None:
        if urc.prefix == "+CMTI":
            parts = [p.strip().strip('"') for p in urc.payload.split(",")]
            if len(parts) >= 2:
                storage, index = parts[0], parts[1]
                try:
                    stored = self.fetch_message(storage, int(index))
                except (AtError, ValueError, sms.SmsCodecError) as exc:
                    logger.warning("auto-fetch after +CMTI failed: %s", exc)
                    return
                self._emit("sms_received", stored.as_dict())
        elif urc.prefix == "?" and urc.payload.startswith("+CREG:"):
            value = urc.payload.split(":", 1)[1].strip()
            try:
                stat = int(value.split(",")[-1])
            except ValueError:
                return
            reg = _CREG_STATS.get(stat, Registration.UNKNOWN)
            self._emit("modem_status", {"registration": reg.value})

    # -- status --------------------------------------------------------------------

    def require(self, service: str) -> None:
        if service not in self.catalog.derived_services:
            raise ServiceUnavailable(f"service {service!r} not offered by this modem")

    def status(self) -> ModemStatus:
        status = ModemStatus()
        try:
            values = self._run(AtCommand("+CSQ")).values()
            if values:
                n_str, _, ber_str = values[0].partition(",")
                status.rssi_dbm = rssi_from_csq(int(n_str))
                status.ber_class = ber_from_csq(int(ber_str or "99"))
        except (AtError, ValueError):
            logger.debug("signal query failed", exc_info=True)
        try:
            values = self._run(
                AtCommand("+CREG", CommandKind.READ, timeout=LONG_TIMEOUT)
            ).values()
            if values:
                stat = int(values[0].split(",")[-1])
                status.registration = _CREG_STATS.get(stat, Registration.UNKNOWN)
        except (AtError, ValueError):
            logger.debug("registration query failed", exc_info=True)
        return status

    # -- SMS ------------------------------------------------------------------------

    def send_sms(self, to: str, text: str) -> "list[int]":
        """Segment, encode and submit; returns one message ref per part."""
        self.require("sms")
        destination = sms.Address.parse(to)
        if self.text_mode:
            return [self._send_text_mode(destination, text)]
        alphabet = sms.choose_alphabet(text)
        parts = sms.segment(text, alphabet)
        refs: "list[int]" = []
        segments: "list[dict]" = []
        for body, udh in parts:
            message = sms.SmsSubmit(
                destination=destination,
                user_data=body,
                message_ref=self._take_tp_mr(),
                alphabet=alphabet,
                udh=udh,
            )
            pdu_hex, tpdu_len = sms.encode_submit(message)
            try:
                ref = self._submit_pdu(pdu_hex, tpdu_len)
                refs.append(ref)
                segments.append({"ref": ref, "error": None})
            except (AtError, CmsError) as exc:
                if not refs:
                    raise  # nothing went out: surface the cause directly
                segments.append({"ref": None, "error": str(exc)})
                raise SmsSendError(
                    f"segment {len(segments)} of {len(parts)} failed: {exc}",
                    segments=segments,
                ) from exc
        return refs

    def _take_tp_mr(self) -> int:
        with self._lock:
            mr = self._next_tp_mr
            self._next_tp_mr = (self._next_tp_mr + 1) % 256
            return mr

    def _submit_pdu(self, pdu_hex: str, tpdu_len: int) -> int:
        result = self.engine.execute(
            AtCommand("+CMGS", CommandKind.SET, (tpdu_len,), timeout=LONG_TIMEOUT, expects_prompt=True)
        )
        if not result.prompt:
            final = result.final
            if final is not None and final.code is FinalCode.CMS_ERROR:
                raise CmsError(final.error_code or 0)
            raise SmsSendError(f"no prompt for message submission ({final})")
        final = self.engine.send_payload(pdu_hex.encode("ascii"))
        if final.final is None or not final.final.ok:
            if final.final is not None and final.final.code is FinalCode.CMS_ERROR:
                raise CmsError(final.final.error_code or 0)
            raise SmsSendError(f"submission rejected ({final.final})")
        for line in final.info:
            if line.prefix == "+CMGS":
                try:
                    return int(line.value.split(",")[0])
                except ValueError:
                    break
        raise SmsSendError("modem acknowledged without a message reference")

    def _send_text_mode(self, destination: sms.Address, text: str) -> int:
        result = self.engine.execute(
            AtCommand(
                "+CMGS",
                CommandKind.SET,
                (destination.dial_string(),),
                timeout=LONG_TIMEOUT,
                expects_prompt=True,
            )
        )
        if not result.prompt:
            raise SmsSendError(f"no prompt for text-mode submission ({result.final})")
        final = self.engine.send_payload(text.encode("latin-1", errors="replace"))
        if final.final is None or not final.final.ok:
            raise SmsSendError(f"text-mode submission rejected ({final.final})")
        for line in final.info:
            if line.prefix == "+CMGS":
                return int(line.value.split(",")[0])
        raise SmsSendError("modem acknowledged without a message reference")

    # -- stored messages ----------------------------------------------------------------

    def _select_store(self, storage: str) -> None:
        if storage != self._current_store:
            self._set("+CPMS", storage)
            self._current_store = storage

    @staticmethod
    def _decode_stored(pdu_hex: str) -> "sms.SmsDeliver | sms.SmsSubmit":
        try:
            return sms.decode_deliver(pdu_hex)
        except sms.SmsCodecError:
            return sms.decode_submit(pdu_hex)

    _STAT_NAMES = {0: "unread", 1: "read", 2: "stored-unsent", 3: "stored-sent"}

    def fetch_message(self, storage: str, index: int) -> StoredSms:
        with self._lock:
            self._select_store(storage)
            result = self._set("+CMGR", index)
        lines = result.info
        if len(lines) < 2 or lines[0].prefix != "+CMGR":
            raise CmsError(321)
        stat_str = lines[0].value.split(",")[0].strip()
        status = self._STAT_NAMES.get(int(stat_str) if stat_str.isdigit() else -1, "unknown")
        message = self._decode_stored(lines[1].value.strip())
        return StoredSms(index=index, status=status, storage=storage, message=message)

    def list_messages(self, storage: str = "SM", which: str = "all") -> "list[StoredSms]":
        stat = {"unread": 0, "read": 1, "all": 4}.get(which, 4)
        with self._lock:
            self._select_store(storage)
            result = self._set("+CMGL", stat)
        stored: "list[StoredSms]" = []
        lines = result.info
        i = 0
        while i + 1 < len(lines):
            header = lines[i]
            if header.prefix != "+CMGL":
                i += 1
                continue
            fields = header.value.split(",")
            try:
                index = int(fields[0])
                status = self._STAT_NAMES.get(int(fields[1]), "unknown")
            except (ValueError, IndexError):
                i += 1
                continue
            try:
                message = self._decode_stored(lines[i + 1].value.strip())
            except sms.SmsCodecError:
                i += 2
                continue
            stored.append(StoredSms(index=index, status=status, storage=storage, message=message))
            i += 2
        return stored

    def delete_message(self, storage: str, index: int) -> None:
        with self._lock:
            self._select_store(storage)
            self._set("+CMGD", index)

    # -- phonebook ------------------------------------------------------------------------

    def phonebook_select(self, storage: str = "SM") -> None:
        self.require("phonebook")
        self._set("+CPBS", storage)
        self._pb_limits = None

    def phonebook_limits(self) -> PhonebookLimits:
        if self._pb_limits is None:
            result = self._run(AtCommand("+CPBR", CommandKind.TEST))
            value = result.values()[0] if result.values() else ""
            # form: (1-50),20,14
            try:
                range_part, nlen, tlen = value.split(",")
                first, last = range_part.strip("()").split("-")
                self._pb_limits = PhonebookLimits(int(first), int(last), int(nlen), int(tlen))
            except ValueError:
                self._pb_limits = PhonebookLimits(1, 100, 20, 14)
        return self._pb_limits

    @staticmethod
    def _parse_entries(result: ExecResult) -> "list[PhonebookEntry]":
        entries = []
        for line in result.info:
            if line.prefix != "+CPBR":
                continue
            try:
                index_part, rest = line.value.split(",", 1)
                number, _, tail = rest.partition(",")
                _, _, text_part = tail.partition(",")
                entries.append(
                    PhonebookEntry(
                        index=int(index_part),
                        number=number.strip().strip('"'),
                        text=text_part.strip().strip('"'),
                    )
                )
            except ValueError:
                continue
        return entries

    def phonebook_read(self, first: int, last: Optional[int] = None) -> "list[PhonebookEntry]":
        self.require("phonebook")
        args = (first,) if last is None else (first, last)
        return self._parse_entries(self._set("+CPBR", *args))

    def phonebook_write(
        self, number: str, text: str, index: Optional[int] = None
    ) -> None:
        self.require("phonebook")
        ntype = 145 if number.startswith("+") else 129
        # a None index renders as the empty slot field: the modem picks first free
        result = self.engine.execute(
            AtCommand("+CPBW", CommandKind.SET, (index, number, ntype, text))
        )
        self._check_pb(result)

    def phonebook_delete(self, index: int) -> None:
        self.require("phonebook")
        self._check_pb(self.engine.execute(AtCommand("+CPBW", CommandKind.SET, (index,))))

    @staticmethod
    def _check_pb(result: ExecResult) -> None:
        if result.final is None or not result.final.ok:
            if result.final is not None and result.final.code is FinalCode.CME_ERROR:
                raise CmeError(result.final.error_code or 0)
            raise AtError(f"phonebook operation failed ({result.final})")

    def phonebook_find(self, prefix: str) -> "list[PhonebookEntry]":
        self.require("phonebook")
        return self._parse_entries(self._set("+CPBF", prefix))

    # -- raw (U)SIM access -------------------------------------------------------------------

    def sim_apdu(self, apdu_hex: str) -> str:
        self.require("sim_access")
        apdu_hex = apdu_hex.strip().upper()
        if not apdu_hex or len(apdu_hex) % 2 or any(
            c not in "0123456789ABCDEF" for c in apdu_hex
        ):
            raise ValueError("APDU must be non-empty even-length hex")
        result = self._set("+CSIM", len(apdu_hex), apdu_hex)
        for line in result.info:
            if line.prefix == "+CSIM":
                _, _, value = line.value.partition(",")
                return value.strip().strip('"')
        raise AtError("missing +CSIM response")

    # -- snapshot / sync ------------------------------------------------------------------------

    def snapshot(self) -> dict:
        """Read all stores into one export document."""
        taken_at = datetime.now(timezone.utc).isoformat(timespec="seconds")
        phonebook = []
        if "phonebook" in self.catalog.derived_services:
            self.phonebook_select("SM")
            limits = self.phonebook_limits()
            phonebook = [e.as_dict() for e in self.phonebook_read(limits.first, limits.last)]
        messages = []
        if "sms" in self.catalog.derived_services:
            for storage in ("SM", "ME"):
                try:
                    messages.extend(s.as_dict() for s in self.list_messages(storage, "all"))
                except (AtError, CmeError, CmsError):
                    continue
        return {
            "taken_at": taken_at,
            "phonebook": phonebook,
            "messages": messages,
            # no AT-level store exposes media files; kept for schema stability
            "media": [],
        }

    def sync(self, base: dict, edits: dict) -> dict:
        """Apply adds/updates/deletes against the phonebook and messages.

        An update or delete carries the expected current value (from the
        snapshot); if the modem entry changed in the meantime the item is
        reported as a conflict and left untouched.
        """
        results = []
        base_pb = {entry["index"]: entry for entry in base.get("phonebook", [])}
        for edit in edits.get("phonebook", []):
            op = edit.get("op")
            try:
                if op == "add":
                    self.phonebook_write(edit["number"], edit.get("text", ""))
                    results.append({"op": op, "status": "applied"})
                elif op in ("update", "delete"):
                    index = int(edit["index"])
                    expected = edit.get("expect") or base_pb.get(index)
                    current = {e.index: e for e in self.phonebook_read(index)}
                    entry = current.get(index)
                    if expected is not None:
                        live = (
                            {"number": entry.number, "text": entry.text}
                            if entry
                            else None
                        )
                        expect_cmp = {
                            "number": expected.get("number"),
                            "text": expected.get("text"),
                        }
                        if live != expect_cmp:
                            results.append({"op": op, "index": index, "status": "conflict"})
                            continue
                    if op == "update":
                        self.phonebook_write(edit["number"], edit.get("text", ""), index=index)
                    else:
                        self.phonebook_delete(index)
                    results.append({"op": op, "index": index, "status": "applied"})
                else:
                    results.append({"op": op, "status": "error", "error": "unknown op"})
            except (AtError, CmeError, KeyError, ValueError) as exc:
                results.append({"op": op, "status": "error", "error": str(exc)})
        for edit in edits.get("messages", []):
            op = edit.get("op")
            try:
                if op == "delete":
                    self.delete_message(edit.get("storage", "SM"), int(edit["index"]))
                    results.append({"op": "delete-message", "index": edit["index"], "status": "applied"})
                else:
                    results.append({"op": op, "status": "error", "error": "unknown op"})
            except (AtError, CmsError, KeyError, ValueError) as exc:
                results.append({"op": op, "status": "error", "error": str(exc)})
        return {"results": results, "changed": sum(1 for r in results if r["status"] == "applied")}
