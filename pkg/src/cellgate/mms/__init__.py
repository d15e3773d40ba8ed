from .codec import (  # noqa: F401
    MessageClass,
    MmsBody,
    MmsHeaders,
    MmsMessageType,
    MmsPart,
    MmsStatus,
    decode_pdu,
    encode_pdu,
    validate_mandatory,
)
from .client import MmsClient, MmsTransaction, MmsTransactionState  # noqa: F401
