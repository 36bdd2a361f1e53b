"""Session service: live games and replays over a wire protocol."""

from .manager import SessionManager
from .protocol import PROTOCOL_VERSION

__all__ = ["SessionManager", "PROTOCOL_VERSION"]
