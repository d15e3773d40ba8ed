"""Exception family shared across the gateway."""


class CellgateError(Exception):
    """Base class for all gateway errors."""


# --- transport / AT engine ---------------------------------------------------

class TransportError(CellgateError):
    pass


class TransportClosed(TransportError):
    pass


class AtError(CellgateError):
    pass


class InvalidCommand(AtError):
    """Command or argument violates the AT serialization rules."""


class AtTimeout(AtError):
    """No final result arrived within the command timeout."""


class PromptNeverArrived(AtError):
    pass


class CommandUnsupported(AtError):
    """Rejected locally by the active quirk profile or capability catalog."""


class CmeError(AtError):
    def __init__(self, code: int):
        super().__init__(f"+CME ERROR: {code}")
        self.code = code


class CmsError(AtError):
    def __init__(self, code: int):
        super().__init__(f"+CMS ERROR: {code}")
        self.code = code


# --- SMS codec ---------------------------------------------------------------

class SmsCodecError(CellgateError):
    pass


class UnmappableCharacter(SmsCodecError):
    """Text contains a character outside the GSM 7-bit default alphabet."""


class LengthMismatch(SmsCodecError):
    pass


class MessageTooLong(SmsCodecError):
    pass


class InvalidDigit(SmsCodecError):
    pass


class TruncatedPdu(SmsCodecError):
    pass


class BadHex(SmsCodecError):
    pass


class UnsupportedDcs(SmsCodecError):
    pass


# --- MMS ---------------------------------------------------------------------

class MmsError(CellgateError):
    pass


class MmsDecodeError(MmsError):
    pass


class MmsTruncated(MmsDecodeError):
    pass


class MmsUnknownType(MmsDecodeError):
    pass


class MmsMissingHeader(MmsError):
    def __init__(self, name: str):
        super().__init__(f"missing mandatory header: {name}")
        self.name = name


class MmsTransactionError(MmsError):
    def __init__(self, message: str, status=None):
        super().__init__(message)
        self.status = status


# --- services / gateway --------------------------------------------------------

class ModemNotReady(CellgateError):
    pass


class ServiceUnavailable(CellgateError):
    """Required modem capability absent from the discovered catalog."""


class SimPinRequired(CellgateError):
    pass


class SimPukRequired(CellgateError):
    pass


class InitCommandFailed(CellgateError):
    def __init__(self, command: str, detail: str = ""):
        super().__init__(f"init command failed: {command} {detail}".strip())
        self.command = command


class InvalidCallState(CellgateError):
    pass


class ModemBusy(CellgateError):
    pass


class SmsSendError(CellgateError):
    """Raised when one or more segments of a message failed to send."""

    def __init__(self, message: str, segments=None):
        super().__init__(message)
        # list of {"ref": int | None, "error": str | None}, one per segment
        self.segments = segments or []
