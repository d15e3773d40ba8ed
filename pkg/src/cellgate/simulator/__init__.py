"""Virtual DCE: AT command machine, SIM/message/phonebook stores, control
plane for test injection, and a PCM audio side-channel."""

from .machine import SimMachine  # noqa: F401
from .server import ModemSimulator  # noqa: F401
from .state import SimState, VirtualClock  # noqa: F401
