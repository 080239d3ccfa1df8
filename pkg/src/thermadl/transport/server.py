"""Server side: validate, deduplicate by seq, acknowledge, persist."""

from __future__ import annotations

import threading
from dataclasses import dataclass
from pathlib import Path

from ..model import ThermalFrame, write_frames
from .wire import FRAME_LEN, MSG_FRAME, DecodeError, decode, encode_ack

STORE_FILE = "frames.bin"


class FrameStore:
    """Exactly-once frame store keyed by seq.

    With a directory, every accepted message is appended to ``frames.bin``
    and reloaded on reopen, so a restarted server still rejects duplicates.
    """

    def __init__(self, directory=None):
        self.dir = Path(directory) if directory is not None else None
        self._lock = threading.Lock()
        self._frames: dict[int, ThermalFrame] = {}
        self._fh = None
        if self.dir is not None:
            self.dir.mkdir(parents=True, exist_ok=True)
            path = self.dir / STORE_FILE
            if path.exists():
                data = path.read_bytes()
                whole = len(data) - len(data) % FRAME_LEN
                for off in range(0, whole, FRAME_LEN):
                    try:
                        msg = decode(data[off : off + FRAME_LEN])
                    except DecodeError:
                        whole = off
                        break
                    self._frames.setdefault(msg.seq, msg.frame)
                if whole != len(data):
                    with open(path, "r+b") as fh:
                        fh.truncate(whole)
            self._fh = open(path, "ab")

    def add(self, seq: int, frame: ThermalFrame, raw: bytes | None = None) -> bool:
        """Insert unless ``seq`` is already stored. Atomic per call."""
        with self._lock:
            if seq in self._frames:
                return False
            if self._fh is not None and raw is not None:
                self._fh.write(raw)
                self._fh.flush()
            self._frames[seq] = frame
            return True

    def __len__(self) -> int:
        return len(self._frames)

    def __contains__(self, seq) -> bool:
        return seq in self._frames

    def seqs(self) -> list:
        with self._lock:
            return sorted(self._frames)

    def frames(self) -> list:
        """Stored frames ordered by timestamp."""
        with self._lock:
            return sorted(self._frames.values(), key=lambda f: f.timestamp)

    def export_csv(self, path) -> int:
        return write_frames(path, self.frames())

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None


@dataclass
class IngestStats:
    received: int = 0
    stored: int = 0
    duplicates: int = 0
    errors: int = 0
    acks: int = 0


class IngestServer:
    def __init__(self, store: FrameStore):
        self.store = store
        self.stats = IngestStats()
        self._lock = threading.Lock()

    def handle(self, datagram: bytes) -> bytes | None:
        """Returns the ack to send back, or None for undecodable input."""
        with self._lock:
            self.stats.received += 1
        try:
            msg = decode(datagram)
        except DecodeError:
            with self._lock:
                self.stats.errors += 1
            return None
        if msg.msg_type != MSG_FRAME:
            with self._lock:
                self.stats.errors += 1
            return None
        new = self.store.add(msg.seq, msg.frame, bytes(datagram))
        with self._lock:
            if new:
                self.stats.stored += 1
            else:
                self.stats.duplicates += 1
            self.stats.acks += 1
        return encode_ack(msg.seq)
