"""Datagram channels and the drivers that run a node against a server.

Two bindings: an in-process simulated channel on a virtual clock (seeded
loss, duplication and reordering) and plain UDP sockets.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import random
import socket
import threading
import time
from dataclasses import dataclass
from typing import Iterable

from ..model import ThermalFrame
from .node import EdgeNode
from .server import IngestServer

log = logging.getLogger(__name__)

TO_SERVER = "server"
TO_NODE = "node"


class SimulatedChannel:
    """Lossy datagram link with per-direction independent drop.

    Delivery time is ``now + latency + U(0, jitter)``, so a positive jitter
    reorders messages. Corruption is not simulated; the CRC covers it.
    """

    def __init__(self, loss=0.0, duplicate=0.0, latency=0.05, jitter=0.0, seed=0):
        if not (0.0 <= loss < 1.0 and 0.0 <= duplicate < 1.0):
            raise ValueError("probabilities must be in [0, 1)")
        self.loss = loss
        self.duplicate = duplicate
        self.latency = latency
        self.jitter = jitter
        self.rng = random.Random(seed)
        self._queue: list = []
        self._counter = itertools.count()
        self.sent = {TO_SERVER: 0, TO_NODE: 0}
        self.dropped = {TO_SERVER: 0, TO_NODE: 0}

    def send(self, dest: str, data: bytes, now: float) -> None:
        self.sent[dest] += 1
        copies = 2 if self.rng.random() < self.duplicate else 1
        for _ in range(copies):
            if self.rng.random() < self.loss:
                self.dropped[dest] += 1
                continue
            at = now + self.latency + (self.rng.random() * self.jitter if self.jitter else 0.0)
            heapq.heappush(self._queue, (at, next(self._counter), dest, data))

    def next_time(self) -> float | None:
        return self._queue[0][0] if self._queue else None

    def pop_due(self, now: float) -> list:
        out = []
        while self._queue and self._queue[0][0] <= now:
            _, _, dest, data = heapq.heappop(self._queue)
            out.append((dest, data))
        return out


@dataclass
class LinkResult:
    captured: int
    virtual_seconds: float
    events: int


def run_simulated_link(
    frames: Iterable[ThermalFrame],
    node: EdgeNode,
    server: IngestServer,
    channel: SimulatedChannel,
    max_events: int | None = None,
) -> LinkResult:
    """Discrete-event run: frames are captured at their own timestamps.

    Returns when every frame was captured and the node's journal is fully
    acknowledged (or ``max_events`` is hit).
    """
    frames = list(frames)
    i = 0
    now = float(frames[0].timestamp) if frames else 0.0
    t0 = now
    events = 0
    while max_events is None or events < max_events:
        times = [t for t in (channel.next_time(), node.next_deadline()) if t is not None]
        if i < len(frames):
            times.append(frames[i].timestamp)
        if not times:
            break
        now = max(now, min(times))
        events += 1
        while i < len(frames) and frames[i].timestamp <= now:
            node.capture(frames[i])
            i += 1
        for dest, data in channel.pop_due(now):
            if dest == TO_SERVER:
                ack = server.handle(data)
                if ack is not None:
                    channel.send(TO_NODE, ack, now)
            else:
                node.handle(data)
        for datagram in node.poll(now):
            channel.send(TO_SERVER, datagram, now)
    return LinkResult(i, now - t0, events)


class UdpServer:
    """Serve an :class:`IngestServer` on a UDP socket from a background thread."""

    def __init__(self, server: IngestServer, host="127.0.0.1", port=0):
        self.server = server
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self.sock.bind((host, port))
        self.sock.settimeout(0.1)
        self.address = self.sock.getsockname()
        self._stop = threading.Event()
        self._thread = None

    def serve_forever(self) -> None:
        while not self._stop.is_set():
            try:
                data, peer = self.sock.recvfrom(4096)
            except socket.timeout:
                continue
            except OSError:
                break
            ack = self.server.handle(data)
            if ack is not None:
                self.sock.sendto(ack, peer)

    def start(self) -> "UdpServer":
        self._thread = threading.Thread(target=self.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join()
        self.sock.close()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()


def run_udp_node(
    frames: Iterable[ThermalFrame],
    node: EdgeNode,
    address,
    pace: float = 0.0,
    timeout: float | None = 30.0,
    stop: threading.Event | None = None,
) -> bool:
    """Capture ``frames`` (one every ``pace`` seconds) and deliver them over UDP.

    Capture runs in a producer thread while this thread sends and reads
    acks. Returns True once everything captured has been acknowledged.
    """
    stop = stop or threading.Event()
    sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    sock.settimeout(0.01)
    done_capturing = threading.Event()

    def produce():
        try:
            for frame in frames:
                if stop.is_set():
                    break
                node.capture(frame)
                if pace:
                    time.sleep(pace)
        finally:
            done_capturing.set()

    producer = threading.Thread(target=produce, daemon=True)
    producer.start()
    deadline = None if timeout is None else time.monotonic() + timeout
    try:
        while not stop.is_set():
            now = time.monotonic()
            if deadline is not None and now > deadline:
                log.warning("node timed out with %d unacknowledged frames", len(node.unacked))
                return False
            for datagram in node.poll(now):
                sock.sendto(datagram, address)
            try:
                data, _ = sock.recvfrom(4096)
                node.handle(data)
            except socket.timeout:
                pass
            if done_capturing.is_set() and node.drained:
                return True
        return node.drained
    finally:
        stop.set()
        producer.join()
        sock.close()
