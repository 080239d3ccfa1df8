import struct
import zlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import T0, uniform
from thermadl.model import N_PIXELS, TEMP_MAX, TEMP_MIN, ThermalFrame
from thermadl.transport import (
    ACK_LEN,
    FRAME_LEN,
    MSG_ACK,
    BadCrc,
    BadLength,
    BadMagic,
    BadVersion,
    EdgeNode,
    FrameStore,
    IngestServer,
    Journal,
    JournalFull,
    SimulatedChannel,
    UdpServer,
    decode,
    encode,
    encode_ack,
    run_simulated_link,
    run_udp_node,
)


def frames(n, seed=0):
    rng = np.random.default_rng(seed)
    return [ThermalFrame(T0 + 60 * i, rng.uniform(18, 36, N_PIXELS)) for i in range(n)]


def recrc(body: bytes) -> bytes:
    """Replace the trailing checksum so only the deliberate defect remains."""
    body = body[:-4]
    return body + struct.pack("<I", zlib.crc32(body))


def test_message_lengths():
    assert len(encode(uniform(), 0)) == FRAME_LEN == 408
    assert len(encode_ack(0)) == ACK_LEN == 14


def test_half_centi_rounds_away_from_zero():
    px = np.full(N_PIXELS, 22.0)
    px[0], px[1] = 22.005, -0.005
    got = decode(encode(ThermalFrame(T0, px), 1))
    assert got.centi[0] == 2201 and got.centi[1] == -1


def test_roundtrip_fields():
    f = frames(1)[0]
    msg = decode(encode(f, 123456))
    assert msg.seq == 123456 and msg.timestamp == f.timestamp
    assert np.max(np.abs(msg.frame.pixels - f.pixels)) <= 0.005 + 1e-9


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(TEMP_MIN, TEMP_MAX), min_size=N_PIXELS, max_size=N_PIXELS), st.integers(0, 2**32 - 1))
def test_roundtrip_property(px, seq):
    msg = decode(encode(ThermalFrame(T0, px), seq))
    assert msg.seq == seq
    assert np.max(np.abs(msg.frame.pixels - np.array(px))) <= 0.01


def test_encoding_is_deterministic():
    f = frames(1)[0]
    assert encode(f, 9) == encode(f, 9)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, FRAME_LEN * 8 - 1))
def test_any_single_bit_flip_is_bad_crc(bit):
    data = bytearray(encode(frames(1)[0], 42))
    data[bit // 8] ^= 1 << (bit % 8)
    with pytest.raises(BadCrc):
        decode(bytes(data))


def test_ack_bit_flips_are_bad_crc():
    ack = encode_ack(77)
    for bit in range(ACK_LEN * 8):
        data = bytearray(ack)
        data[bit // 8] ^= 1 << (bit % 8)
        with pytest.raises(BadCrc):
            decode(bytes(data))


def test_header_defects_with_valid_crc():
    good = encode(uniform(), 1)
    with pytest.raises(BadMagic):
        decode(recrc(b"XXXX" + good[4:]))
    with pytest.raises(BadVersion):
        decode(recrc(good[:4] + b"\x02" + good[5:]))
    with pytest.raises(BadLength):
        decode(recrc(good[:100] + good[-4:]))
    with pytest.raises(BadLength):
        decode(good[:10])
    assert decode(encode_ack(5)).msg_type == MSG_ACK


def link(loss, n=100, seed=1, tmp_path=None, duplicate=0.0, jitter=0.0):
    journal = Journal(tmp_path / f"j{loss}{seed}")
    node = EdgeNode(journal)
    store = FrameStore()
    server = IngestServer(store)
    channel = SimulatedChannel(loss=loss, duplicate=duplicate, jitter=jitter, seed=seed)
    fs = frames(n, seed)
    run_simulated_link(fs, node, server, channel)
    return fs, node, store, server


def test_lossless_link(tmp_path):
    fs, node, store, server = link(0.0, tmp_path=tmp_path)
    assert store.seqs() == list(range(100))
    assert node.stats.retransmits == 0 and server.stats.duplicates == 0
    assert node.drained


@pytest.mark.parametrize("loss", [0.0, 0.1, 0.3, 0.5])
def test_exactly_once_under_loss(tmp_path, loss):
    fs, node, store, server = link(loss, tmp_path=tmp_path, duplicate=0.05, jitter=0.5)
    assert store.seqs() == list(range(100))
    assert server.stats.stored == 100
    stored = store.frames()
    assert [f.timestamp for f in stored] == [f.timestamp for f in fs]
    assert all(np.max(np.abs(a.pixels - b.pixels)) <= 0.01 for a, b in zip(stored, fs))
    assert node.journal.unacked() == []


def test_duplicate_seq_stored_once_acked_each_time():
    server = IngestServer(FrameStore())
    msg = encode(uniform(), 7)
    acks = [server.handle(msg) for _ in range(3)]
    assert acks == [encode_ack(7)] * 3
    assert len(server.store) == 1
    assert (server.stats.stored, server.stats.duplicates, server.stats.acks) == (1, 2, 3)


def test_corrupted_message_is_counted_not_acked():
    server = IngestServer(FrameStore())
    data = bytearray(encode(uniform(), 1))
    data[50] ^= 0xFF
    assert server.handle(bytes(data)) is None
    assert server.stats.errors == 1 and len(server.store) == 0


def test_out_of_order_ingest():
    server = IngestServer(FrameStore())
    fs = frames(10)
    for seq in [3, 0, 9, 1, 2, 8, 4, 7, 6, 5]:
        server.handle(encode(fs[seq], seq))
    assert server.store.seqs() == list(range(10))
    assert [f.timestamp for f in server.store.frames()] == [f.timestamp for f in fs]


def test_backoff_doubles_and_caps(tmp_path):
    node = EdgeNode(Journal(tmp_path / "j"), initial_timeout=2.0, max_timeout=10.0, record_sends=True)
    node.capture(uniform())
    times = []
    t = 0.0
    for _ in range(6):
        assert node.poll(t)
        times.append(t)
        t = node.next_deadline()
    assert np.diff(times).tolist() == [2.0, 4.0, 8.0, 10.0, 10.0]


def test_window_limits_outstanding_sends(tmp_path):
    node = EdgeNode(Journal(tmp_path / "j"), window=4)
    for f in frames(10):
        node.capture(f)
    first = [decode(m).seq for m in node.poll(0.0)]
    assert first == [0, 1, 2, 3]
    node.handle(encode_ack(0))
    assert [decode(m).seq for m in node.poll(0.1)] == [4]


def test_capture_is_durable_before_send(tmp_path):
    node = EdgeNode(Journal(tmp_path / "j"))
    seq = node.capture(uniform())
    # an independent reader already sees the entry before anything was polled
    assert Journal(tmp_path / "j").unacked() == [seq]
    assert node.stats.sent == 0


def _crash_and_resume(directory, record=True):
    node = EdgeNode(Journal(directory), record_sends=record)
    sent = [decode(m).seq for m in node.poll(1e9)]
    return node, sent


def test_crash_before_any_ack(tmp_path):
    d = tmp_path / "j"
    node = EdgeNode(Journal(d))
    for f in frames(50):
        node.capture(f)
    del node  # no close: simulate power loss
    node, sent = _crash_and_resume(d)
    assert sent == list(range(32))  # window
    assert node.unacked == list(range(50))


def test_crash_after_partial_acks(tmp_path):
    d = tmp_path / "j"
    node = EdgeNode(Journal(d), window=64)
    for f in frames(50):
        node.capture(f)
    node.poll(0.0)
    acked = set(np.random.default_rng(2).choice(50, 20, replace=False).tolist())
    for s in acked:
        assert node.handle(encode_ack(s)) == s
    del node
    resumed = EdgeNode(Journal(d), window=64, record_sends=True)
    resumed.poll(0.0)
    assert sorted(resumed.stats.send_log) == sorted(set(range(50)) - acked)
    assert len(resumed.stats.send_log) == 30


def test_crash_mid_append_drops_torn_record(tmp_path):
    d = tmp_path / "j"
    node = EdgeNode(Journal(d), window=64)
    for f in frames(50):
        node.capture(f)
    node.poll(0.0)
    for s in range(20):
        node.handle(encode_ack(s))
    with open(d / "journal.bin", "ab") as fh:
        fh.write(encode(uniform(), 50)[:200])
    del node
    resumed = EdgeNode(Journal(d), window=64, record_sends=True)
    resumed.poll(0.0)
    assert resumed.stats.send_log == list(range(20, 50))
    assert resumed.journal.next_seq == 50


def test_replayed_node_delivers_everything_once(tmp_path):
    d = tmp_path / "j"
    store = FrameStore()
    server = IngestServer(store)
    fs = frames(60)
    node = EdgeNode(Journal(d))
    first = run_simulated_link(fs, node, server, SimulatedChannel(loss=0.3, seed=3), max_events=40)
    assert 0 < first.captured < 60 and node.unacked
    del node
    node = EdgeNode(Journal(d))
    run_simulated_link(fs[first.captured :], node, server, SimulatedChannel(loss=0.3, seed=4))
    assert store.seqs() == list(range(60))


def test_journal_cap_prunes_acked_and_raises_when_full(tmp_path):
    j = Journal(tmp_path / "j", cap=5)
    fs = frames(12)
    for f in fs[:5]:
        j.append(f)
    with pytest.raises(JournalFull):
        j.append(fs[5])
    for s in range(3):
        j.mark_acked(s)
    assert j.append(fs[5]) == 5
    assert len(j) <= 5 and j.unacked() == [3, 4, 5]
    j.close()
    again = Journal(tmp_path / "j", cap=5)
    assert again.next_seq == 6 and again.unacked() == [3, 4, 5]


def test_seq_never_reused_after_full_prune(tmp_path):
    j = Journal(tmp_path / "j", cap=2)
    for f in frames(6):
        s = j.append(f)
        j.mark_acked(s)
    j.close()
    assert Journal(tmp_path / "j", cap=2).next_seq == 6


def test_store_survives_restart_without_duplicates(tmp_path):
    d = tmp_path / "store"
    fs = frames(10)
    server = IngestServer(FrameStore(d))
    for i, f in enumerate(fs[:6]):
        server.handle(encode(f, i))
    server.store.close()
    server = IngestServer(FrameStore(d))
    for i, f in enumerate(fs):
        server.handle(encode(f, i))
    assert server.store.seqs() == list(range(10))
    assert server.stats.duplicates == 6
    assert (d / "frames.bin").stat().st_size == 10 * FRAME_LEN


def test_udp_loopback(tmp_path):
    store = FrameStore(tmp_path / "store")
    with UdpServer(IngestServer(store)) as udp:
        node = EdgeNode(Journal(tmp_path / "j"), initial_timeout=0.2)
        assert run_udp_node(frames(100), node, udp.address, timeout=30.0)
    assert store.seqs() == list(range(100))
