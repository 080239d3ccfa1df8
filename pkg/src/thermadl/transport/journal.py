"""Append-only local journal of wire messages with a sidecar ack index.

Layout of a journal directory::

    journal.bin   concatenated 408-byte frame messages, seq strictly increasing
    acked.idx     one little-endian u32 per acknowledged seq, append-only

Reopening a journal replays both files; the unacked set is every journaled
seq not present in the index. A torn trailing record (crash mid-write) is
dropped on replay.
"""

from __future__ import annotations

import os
import struct
import threading
from pathlib import Path

from ..model import ThermalFrame
from .wire import FRAME_LEN, DecodeError, decode, encode

_SEQ = struct.Struct("<I")
JOURNAL_FILE = "journal.bin"
INDEX_FILE = "acked.idx"


class JournalFull(RuntimeError):
    pass


class Journal:
    def __init__(self, directory, cap: int | None = None, fsync: bool = False):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        if cap is not None and cap < 2:
            raise ValueError("journal cap must be at least 2")
        self.cap = cap
        self.fsync = fsync
        self._lock = threading.Lock()
        self._messages: dict[int, bytes] = {}
        self._acked: set[int] = set()
        self._replay()
        self._next = max(self._messages, default=-1) + 1
        self._log = open(self.dir / JOURNAL_FILE, "ab")
        self._idx = open(self.dir / INDEX_FILE, "ab")

    def _replay(self) -> None:
        path = self.dir / JOURNAL_FILE
        if path.exists():
            data = path.read_bytes()
            whole = len(data) - len(data) % FRAME_LEN
            for off in range(0, whole, FRAME_LEN):
                chunk = data[off : off + FRAME_LEN]
                try:
                    seq = decode(chunk).seq
                except DecodeError:
                    whole = off
                    break
                self._messages[seq] = chunk
            if whole != len(data):
                with open(path, "r+b") as fh:
                    fh.truncate(whole)
        idx = self.dir / INDEX_FILE
        if idx.exists():
            raw = idx.read_bytes()
            raw = raw[: len(raw) - len(raw) % _SEQ.size]
            self._acked = {s for (s,) in _SEQ.iter_unpack(raw)} & self._messages.keys()

    def _sync(self, fh) -> None:
        fh.flush()
        if self.fsync:
            os.fsync(fh.fileno())

    @property
    def next_seq(self) -> int:
        return self._next

    def __len__(self) -> int:
        return len(self._messages)

    def append(self, frame: ThermalFrame) -> int:
        """Journal a captured frame and return its sequence number."""
        with self._lock:
            if self.cap is not None and len(self._messages) >= self.cap:
                self._prune()
            seq = self._next
            msg = encode(frame, seq)
            self._log.write(msg)
            self._sync(self._log)
            self._messages[seq] = msg
            self._next = seq + 1
            return seq

    def mark_acked(self, seq: int) -> bool:
        with self._lock:
            if seq not in self._messages or seq in self._acked:
                return False
            self._idx.write(_SEQ.pack(seq))
            self._sync(self._idx)
            self._acked.add(seq)
            return True

    def message(self, seq: int) -> bytes:
        return self._messages[seq]

    def is_acked(self, seq: int) -> bool:
        return seq in self._acked

    def unacked(self) -> list:
        with self._lock:
            return sorted(self._messages.keys() - self._acked)

    def acked(self) -> list:
        with self._lock:
            return sorted(self._acked)

    def seqs(self) -> list:
        return sorted(self._messages)

    def _prune(self) -> None:
        # caller holds the lock
        excess = len(self._messages) - self.cap + 1
        # the newest entry is kept so the seq counter survives a reopen
        newest = self._next - 1
        victims = sorted(self._acked - {newest})[:excess]
        if len(victims) < excess:
            raise JournalFull(f"journal holds {len(self._messages)} entries, too few acknowledged to prune")
        for seq in victims:
            del self._messages[seq]
            self._acked.discard(seq)
        self._rewrite()

    def _rewrite(self) -> None:
        self._log.close()
        self._idx.close()
        for name, payload in (
            (JOURNAL_FILE, b"".join(self._messages[s] for s in sorted(self._messages))),
            (INDEX_FILE, b"".join(_SEQ.pack(s) for s in sorted(self._acked))),
        ):
            tmp = self.dir / (name + ".tmp")
            tmp.write_bytes(payload)
            os.replace(tmp, self.dir / name)
        self._log = open(self.dir / JOURNAL_FILE, "ab")
        self._idx = open(self.dir / INDEX_FILE, "ab")

    def close(self) -> None:
        self._log.close()
        self._idx.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
