"""AT command wire protocol: command serialization and response line classification.

Pure functions and value types only; the byte transport and request/response
pairing live in :mod:`cellgate.engine`.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

from .errors import InvalidCommand

DEFAULT_TIMEOUT = 5.0
# Dial and network interrogation take longer than ordinary commands.
LONG_TIMEOUT = 30.0

# Characters a command name may contain.  '?' and '=' are excluded so the
# rendered forms of execute/read/test/set can never collide.
_NAME_FORBIDDEN = set('?="\r\n')


class CommandKind(enum.Enum):
    EXECUTE = "execute"
    READ = "read"
    TEST = "test"
    SET = "set"


@dataclass(frozen=True)
class AtCommand:
    """One command to send to the modem (without the AT prefix or CR)."""

    name: str
    kind: CommandKind = CommandKind.EXECUTE
    args: tuple = ()
    timeout: float = DEFAULT_TIMEOUT
    expects_prompt: bool = False

    def __post_init__(self):
        if not self.name:
            raise InvalidCommand("empty command name")
        for ch in self.name:
            if not (0x20 <= ord(ch) <= 0x7E):
                raise InvalidCommand(f"non-printable character in command name: {ch!r}")
            if ch in _NAME_FORBIDDEN:
                raise InvalidCommand(f"forbidden character in command name: {ch!r}")
        if self.timeout <= 0:
            raise InvalidCommand("timeout must be positive")
        if self.kind is CommandKind.SET and not self.args:
            raise InvalidCommand("set command requires at least one argument")
        if self.kind is not CommandKind.SET and self.args:
            raise InvalidCommand(f"{self.kind.value} command takes no arguments")


def serialize(cmd: AtCommand) -> bytes:
    """Render ``cmd`` as the byte line sent to the modem, CR-terminated.

    String arguments are double quoted, integers rendered bare.  The result
    always matches ``^AT[^\\r\\n]*\\r$`` and is injective over valid commands.
    """
    if cmd.kind is CommandKind.EXECUTE:
        body = cmd.name
    elif cmd.kind is CommandKind.READ:
        body = cmd.name + "?"
    elif cmd.kind is CommandKind.TEST:
        body = cmd.name + "=?"
    else:
        rendered = []
        for arg in cmd.args:
            if isinstance(arg, bool):
                raise InvalidCommand("boolean arguments are ambiguous; use int")
            if arg is None:  # positional placeholder, e.g. +CPBW=,"num",...
                rendered.append("")
            elif isinstance(arg, int):
                rendered.append(str(arg))
            elif isinstance(arg, str):
                for ch in arg:
                    if ch in "\r\n":
                        raise InvalidCommand("argument contains CR/LF")
                    if ch == '"':
                        raise InvalidCommand("argument contains unbalanced quote")
                    if not (0x20 <= ord(ch) <= 0x7E):
                        raise InvalidCommand(f"non-printable character in argument: {ch!r}")
                rendered.append(f'"{arg}"')
            else:
                raise InvalidCommand(f"unsupported argument type: {type(arg).__name__}")
        body = cmd.name + "=" + ",".join(rendered)
    return b"AT" + body.encode("ascii") + b"\r"


class FinalCode(enum.Enum):
    OK = "OK"
    ERROR = "ERROR"
    CME_ERROR = "+CME ERROR"
    CMS_ERROR = "+CMS ERROR"
    NO_CARRIER = "NO CARRIER"
    BUSY = "BUSY"
    NO_ANSWER = "NO ANSWER"
    CONNECT = "CONNECT"


@dataclass(frozen=True)
class FinalResult:
    code: FinalCode
    error_code: Optional[int] = None

    @property
    def ok(self) -> bool:
        return self.code in (FinalCode.OK, FinalCode.CONNECT)

    def __str__(self):
        if self.error_code is not None:
            return f"{self.code.value}: {self.error_code}"
        return self.code.value


class LineKind(enum.Enum):
    INFO = "info"
    FINAL = "final"
    PROMPT = "prompt"
    ECHO = "echo"
    EMPTY = "empty"


@dataclass(frozen=True)
class ResponseLine:
    kind: LineKind
    prefix: str = ""
    value: str = ""
    final: Optional[FinalResult] = None
    raw: str = ""


@dataclass(frozen=True)
class Urc:
    """Unsolicited result code, never part of a command's response set."""

    prefix: str
    payload: str
    received_at: float = field(default_factory=time.monotonic)


_BARE_FINALS = {
    "OK": FinalCode.OK,
    "ERROR": FinalCode.ERROR,
    "NO CARRIER": FinalCode.NO_CARRIER,
    "BUSY": FinalCode.BUSY,
    "NO ANSWER": FinalCode.NO_ANSWER,
}


def parse_line(raw: Union[bytes, str], known_urc_prefixes: Iterable[str] = ()) -> Union[ResponseLine, Urc]:
    """Classify one line (already stripped of CR/LF) from the modem.

    Lines matching a registered URC prefix become :class:`Urc`; the verbose
    V.250 result codes become finals; ``"> "`` is the payload prompt; anything
    else is an info line whose prefix is the text before the first colon.
    Unknown input never raises: worst case it classifies as info.
    """
    if isinstance(raw, bytes):
        raw = raw.decode("latin-1")
    if raw == "":
        return ResponseLine(LineKind.EMPTY, raw="")
    if raw in ("> ", ">"):
        return ResponseLine(LineKind.PROMPT, raw=raw)

    for prefix in known_urc_prefixes:
        # Bare-form match only for basic codes (RING): extended URCs always
        # carry ': payload', and a bare '+CLIP' line is a +CLAC listing entry.
        if raw == prefix and not prefix.startswith(("+", "*")):
            return Urc(prefix=prefix, payload="")
        if raw.startswith(prefix + ":"):
            return Urc(prefix=prefix, payload=raw[len(prefix) + 1:].strip())

    code = _BARE_FINALS.get(raw)
    if code is not None:
        return ResponseLine(LineKind.FINAL, final=FinalResult(code), raw=raw)
    if raw.startswith("CONNECT"):
        return ResponseLine(LineKind.FINAL, final=FinalResult(FinalCode.CONNECT), raw=raw)
    for text, code in (("+CME ERROR:", FinalCode.CME_ERROR), ("+CMS ERROR:", FinalCode.CMS_ERROR)):
        if raw.startswith(text):
            value = raw[len(text):].strip()
            try:
                n = int(value)
            except ValueError:
                # Verbose error text (+CMEE=2); we only enable numeric mode,
                # so treat an unparsable code as a generic failure.
                return ResponseLine(
                    LineKind.FINAL,
                    final=FinalResult(FinalCode.ERROR),
                    raw=raw,
                )
            if n < 0:
                return ResponseLine(LineKind.FINAL, final=FinalResult(FinalCode.ERROR), raw=raw)
            return ResponseLine(LineKind.FINAL, final=FinalResult(code, error_code=n), raw=raw)

    idx = raw.find(":")
    if idx > 0:
        return ResponseLine(LineKind.INFO, prefix=raw[:idx], value=raw[idx + 1:].strip(), raw=raw)
    return ResponseLine(LineKind.INFO, prefix="", value=raw, raw=raw)
