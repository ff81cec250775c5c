from .session import (
    Exercise,
    ReplayDriver,
    SeekOutOfRange,
    Session,
    SessionDescriptor,
    SessionManager,
    SessionNotLive,
    UnknownSession,
    transcript_lines,
)
from .wire import MessageKind, StreamMessage, decode_message, encode_message

__all__ = [
    "Exercise",
    "ReplayDriver",
    "SeekOutOfRange",
    "Session",
    "SessionDescriptor",
    "SessionManager",
    "SessionNotLive",
    "UnknownSession",
    "transcript_lines",
    "MessageKind",
    "StreamMessage",
    "decode_message",
    "encode_message",
]
