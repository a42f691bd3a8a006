import socket
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from myodecode.errors import UnknownClass
from myodecode.io_out import (
    DGRAM_BYTES,
    CursorState,
    Interpolator,
    OutputTarget,
    RateSender,
    StateCell,
    decode_state,
    encode_state,
    map_cursor,
)


class TestDatagram:
    def test_zero_state_layout(self):
        raw = encode_state(np.zeros(9), 0)
        assert len(raw) == 48 == DGRAM_BYTES
        assert raw[:4] == b"MGH1"
        assert raw[4:] == bytes(44)

    def test_round_trip(self):
        state = np.linspace(0, 1, 9)
        raw = encode_state(state, 123456789)
        out, t = decode_state(raw)
        assert t == 123456789
        assert np.allclose(out, state, atol=1e-7)

    @given(st.integers(0, 2**63 - 1), st.lists(st.floats(0, 1), min_size=9, max_size=9))
    @settings(max_examples=1000, deadline=None)
    def test_round_trip_property(self, t_us, vals):
        state = np.asarray(vals)
        out, t = decode_state(encode_state(state, t_us))
        assert t == t_us
        assert np.allclose(out, np.float32(state), atol=0)

    def test_reference_layout_frozen(self):
        # format freeze: little-endian u64 then 9 little-endian f32
        import struct

        state = np.arange(9, dtype=np.float64) / 10
        raw = encode_state(state, 0xAABBCCDD)
        assert struct.unpack_from("<Q", raw, 4)[0] == 0xAABBCCDD
        for i in range(9):
            assert struct.unpack_from("<f", raw, 12 + 4 * i)[0] == pytest.approx(i / 10)

    def test_reject_wrong_magic(self):
        with pytest.raises(ValueError):
            decode_state(b"XXXX" + bytes(44))


class TestCursor:
    def test_rest_origin(self):
        assert map_cursor("rest") == CursorState(0.0, 0.0)

    def test_axes(self):
        assert map_cursor("eversion") == CursorState(1.0, 0.0)
        assert map_cursor("inversion") == CursorState(-1.0, 0.0)
        assert map_cursor("dorsiflexion") == CursorState(0.0, 1.0)
        assert map_cursor("plantarflexion") == CursorState(0.0, -1.0)

    def test_proportional_activation(self):
        assert map_cursor("dorsiflexion", 0.5) == CursorState(0.0, 0.5)

    def test_unknown_class(self):
        with pytest.raises(UnknownClass):
            map_cursor("grasp")


class TestInterpolator:
    def test_constant_when_at_target(self):
        it = Interpolator(0.25, initial=np.full(9, 0.4))
        it.set_target(np.full(9, 0.4))
        assert np.allclose(it.step(0.1), 0.4)
        assert np.allclose(it.step(10.0), 0.4)

    def test_midpoint_at_half_duration(self):
        it = Interpolator(0.25)
        target = np.zeros(9)
        target[[0, 2, 3, 4, 5]] = 1.0  # grasp
        it.set_target(target)
        out = it.step(0.125)
        assert np.allclose(out[[0, 2, 3, 4, 5]], 0.5)
        assert np.allclose(out[[1, 6, 7, 8]], 0.0)

    def test_reaches_target(self):
        it = Interpolator(0.25)
        it.set_target(np.ones(9))
        it.step(0.25)
        assert np.allclose(it.current, 1.0)

    def test_retarget_is_continuous(self):
        it = Interpolator(0.2)
        rng = np.random.default_rng(0)
        prev = it.current.copy()
        dt = 0.016
        for _ in range(200):
            if rng.uniform() < 0.15:
                it.set_target(rng.uniform(0, 1, size=9))
            out = it.step(dt)
            # per-step change bounded by the Lipschitz limit dt/duration
            assert np.all(np.abs(out - prev) <= dt / 0.2 + 1e-12)
            prev = out

    def test_bounded_between_current_and_target(self):
        it = Interpolator(0.5, initial=np.full(9, 0.2))
        it.set_target(np.full(9, 0.8))
        for _ in range(10):
            out = it.step(0.03)
            assert np.all(out >= 0.2 - 1e-12) and np.all(out <= 0.8 + 1e-12)


class _UdpCounter:
    def __init__(self):
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self.sock.bind(("127.0.0.1", 0))
        self.port = self.sock.getsockname()[1]
        self.sock.settimeout(0.05)

    def drain(self, seconds):
        count = 0
        datagrams = []
        t0 = time.monotonic()
        while time.monotonic() - t0 < seconds:
            try:
                data, _ = self.sock.recvfrom(256)
            except (TimeoutError, socket.timeout):
                continue
            if time.monotonic() - t0 <= seconds:
                count += 1
                datagrams.append(data)
        return count, datagrams

    def close(self):
        self.sock.close()


@pytest.mark.slow
class TestSenderCadence:
    def _run(self, rate_hz, seconds=10.0):
        rx = _UdpCounter()
        cell = StateCell()
        cell.set(np.linspace(0, 1, 9), 42)
        sender = RateSender(OutputTarget(host="127.0.0.1", port=rx.port,
                                         rate_hz=rate_hz), cell)
        sender.start()
        try:
            count, datagrams = rx.drain(seconds)
        finally:
            sender.stop()
            rx.close()
        return count, datagrams

    def test_prediction_rate_32hz(self):
        count, datagrams = self._run(32.0)
        assert abs(count - 320) <= 320 * 0.015
        state, t = decode_state(datagrams[-1])
        assert t == 42

    def test_guide_rate_60hz(self):
        count, _ = self._run(60.0)
        assert abs(count - 600) <= 600 * 0.015


def test_sender_survives_socket_errors():
    cell = StateCell()
    sender = RateSender(OutputTarget(host="203.0.113.1", port=9, rate_hz=200.0), cell)
    sender.start()
    time.sleep(0.3)
    sender.stop()
    assert sender.sent >= 30  # kept running regardless of delivery