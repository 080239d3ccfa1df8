"""Edge node sender: journal first, then confirmable delivery with backoff.

The node is sans-IO. ``poll(now)`` returns the datagrams due for
(re)transmission and ``handle(datagram)`` consumes acknowledgements; the
caller owns the clock and the socket, which keeps the same logic usable
over the simulated channel and over UDP.
"""

from __future__ import annotations

import itertools
import math
import threading
from dataclasses import dataclass, field

from ..model import ThermalFrame
from .journal import Journal
from .wire import MSG_ACK, DecodeError, decode


@dataclass
class _Pending:
    next_due: float = -math.inf
    timeout: float = 0.0
    attempts: int = 0


@dataclass
class NodeStats:
    captured: int = 0
    sent: int = 0
    retransmits: int = 0
    acked: int = 0
    bad_acks: int = 0
    send_log: list = field(default_factory=list)


class EdgeNode:
    def __init__(
        self,
        journal: Journal,
        initial_timeout: float = 2.0,
        backoff: float = 2.0,
        max_timeout: float = 60.0,
        window: int = 32,
        record_sends: bool = False,
    ):
        if initial_timeout <= 0 or backoff < 1 or window < 1:
            raise ValueError("bad retransmission parameters")
        self.journal = journal
        self.initial_timeout = initial_timeout
        self.backoff = backoff
        self.max_timeout = max_timeout
        self.window = window
        self.record_sends = record_sends
        self.stats = NodeStats()
        self._lock = threading.Lock()
        # replayed entries that were never acknowledged go out first
        self._pending = {seq: _Pending(timeout=initial_timeout) for seq in journal.unacked()}

    def capture(self, frame: ThermalFrame) -> int:
        """Journal ``frame`` durably; it becomes eligible for sending afterwards."""
        seq = self.journal.append(frame)
        with self._lock:
            self._pending[seq] = _Pending(timeout=self.initial_timeout)
            self.stats.captured += 1
        return seq

    @property
    def unacked(self) -> list:
        with self._lock:
            return list(self._pending)

    @property
    def drained(self) -> bool:
        return not self._pending

    def poll(self, now: float) -> list:
        """Datagrams due at ``now``, oldest seq first, within the send window."""
        out = []
        with self._lock:
            for seq, p in itertools.islice(self._pending.items(), self.window):
                if p.next_due > now:
                    continue
                if p.attempts:
                    self.stats.retransmits += 1
                    p.timeout = min(p.timeout * self.backoff, self.max_timeout)
                p.attempts += 1
                p.next_due = now + p.timeout
                self.stats.sent += 1
                if self.record_sends:
                    self.stats.send_log.append(seq)
                out.append(self.journal.message(seq))
        return out

    def next_deadline(self) -> float | None:
        with self._lock:
            dues = [p.next_due for _, p in itertools.islice(self._pending.items(), self.window)]
        return min(dues) if dues else None

    def handle(self, datagram: bytes) -> int | None:
        """Process one acknowledgement; returns the acked seq when it was outstanding."""
        try:
            msg = decode(datagram)
        except DecodeError:
            self.stats.bad_acks += 1
            return None
        if msg.msg_type != MSG_ACK:
            self.stats.bad_acks += 1
            return None
        with self._lock:
            if self._pending.pop(msg.seq, None) is None:
                return None
            self.stats.acked += 1
        self.journal.mark_acked(msg.seq)
        return msg.seq
