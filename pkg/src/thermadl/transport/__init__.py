from .channel import SimulatedChannel, UdpServer, run_simulated_link, run_udp_node
from .journal import Journal, JournalFull
from .node import EdgeNode
from .server import FrameStore, IngestServer
from .wire import (
    ACK_LEN,
    FRAME_LEN,
    MSG_ACK,
    MSG_FRAME,
    BadCrc,
    BadLength,
    BadMagic,
    BadVersion,
    DecodeError,
    FrameMessage,
    decode,
    encode,
    encode_ack,
)

__all__ = [
    "ACK_LEN",
    "FRAME_LEN",
    "MSG_ACK",
    "MSG_FRAME",
    "BadCrc",
    "BadLength",
    "BadMagic",
    "BadVersion",
    "DecodeError",
    "EdgeNode",
    "FrameMessage",
    "FrameStore",
    "IngestServer",
    "Journal",
    "JournalFull",
    "SimulatedChannel",
    "UdpServer",
    "decode",
    "encode",
    "encode_ack",
    "run_simulated_link",
    "run_udp_node",
]
