"""Simulated amplifier: synthetic movement-driven EMG served over the wire format.

Stands in for a participant at desk scale.  Each movement has a spatial
activation pattern over the 32 channels; generated samples are zero-mean
Gaussian noise whose per-channel RMS scales linearly with the drive
activation.  Frames are deterministic given (seed, t_us), so replays and
tests reproduce exactly.  The server speaks the frame protocol on one
TCP port and accepts JSON-line control commands (drive a movement's
guide cycle, return to rest) on a second.
"""

from __future__ import annotations

import argparse
import json
import logging
import socket
import threading
import time
from dataclasses import dataclass

import numpy as np

from . import proto
from .errors import PortInUse, UnknownMovement
from .kinematics import (
    REST,
    GuideTiming,
    MovementTemplate,
    default_catalog,
    guide_activation,
    guide_trajectory,
)
from .proto import CHANNELS, SAMPLES_PER_FRAME, EmgFrame, StreamConfig, encode_frame

log = logging.getLogger(__name__)

DEFAULT_PORT = 5566
NO_CONTACT_RMS_FACTOR = 25.0  # loose-electrode channels swamp the signal


@dataclass
class SyntheticModel:
    """Per-movement spatial activation patterns plus the noise model."""

    patterns: dict[str, np.ndarray]  # unit-max non-negative weights over 32 channels
    noise_floor: float = 100.0       # baseline RMS in ADC counts
    snr: float = 6.0                 # active-to-floor amplitude ratio at activation 1
    seed: int = 0
    noisy_channels: tuple[int, ...] = ()  # simulate electrodes without skin contact

    def __post_init__(self):
        for mid, p in self.patterns.items():
            p = np.asarray(p, dtype=np.float64)
            if p.shape != (CHANNELS,) or np.any(p < 0):
                raise ValueError(f"pattern {mid!r} must be 32 non-negative weights")
            if p.max() > 0:
                p = p / p.max()
            self.patterns[mid] = p

    def channel_rms(self, movement_id: str, activation: float) -> np.ndarray:
        if movement_id not in self.patterns:
            raise UnknownMovement(movement_id)
        rms = self.noise_floor * (1.0 + self.snr * activation * self.patterns[movement_id])
        for ch in self.noisy_channels:
            rms[ch] = self.noise_floor * NO_CONTACT_RMS_FACTOR
        return rms


def one_hot_model(movements: list[str], *, channels: list[int] | None = None,
                  **kwargs) -> SyntheticModel:
    """Model with one dominant channel per movement (distinct argmax channels)."""
    if channels is None:
        channels = [(3 + 5 * i) % CHANNELS for i in range(len(movements))]
    patterns = {REST: np.zeros(CHANNELS)}
    for mid, ch in zip(movements, channels):
        p = np.zeros(CHANNELS)
        p[ch] = 1.0
        patterns[mid] = p
    return SyntheticModel(patterns=patterns, **kwargs)


@dataclass(frozen=True)
class DriveSignal:
    movement_id: str
    activation: float

    def __post_init__(self):
        if not 0.0 <= self.activation <= 1.0:
            raise ValueError("activation must lie in [0, 1]")


REST_DRIVE = DriveSignal(REST, 0.0)


def synth_frame(model: SyntheticModel, drive: DriveSignal, t_us: int,
                seq: int | None = None) -> EmgFrame:
    """One 32x18 frame of zero-mean noise shaped by the drive activation."""
    rms = model.channel_rms(drive.movement_id, drive.activation)
    rng = np.random.default_rng((model.seed, t_us))
    samples = rng.standard_normal((CHANNELS, SAMPLES_PER_FRAME)) * rms[:, None]
    samples = np.clip(np.rint(samples), -32768, 32767).astype(np.int16)
    if seq is None:
        seq = t_us // 9000
    return EmgFrame(seq=int(seq), t_us=int(t_us), samples=samples)


class FrameSource:
    """Drive-aware frame generator with its own device clock.

    ``start_cycle`` returns the device timestamp at which the cycle
    begins (the next frame to be generated), so a consumer lagging
    behind the stream can align its own guide to the same origin.
    """

    def __init__(self, model: SyntheticModel, config: StreamConfig = StreamConfig()):
        self.model = model
        self.config = config
        self.period_us = config.frame_period_us
        self._lock = threading.Lock()
        self._drive: DriveSignal | tuple[str, GuideTiming, int] = REST_DRIVE
        self.seq = 0

    def set_drive(self, drive: DriveSignal) -> None:
        with self._lock:
            self._drive = drive

    def start_cycle(self, movement_id: str, timing: GuideTiming) -> int:
        """Follow the guide trajectory for a movement from the next frame on."""
        if movement_id not in self.model.patterns:
            raise UnknownMovement(movement_id)
        with self._lock:
            t0_us = self.seq * self.period_us
            self._drive = (movement_id, timing, t0_us)
            return t0_us

    def rest(self) -> None:
        self.set_drive(REST_DRIVE)

    def next_frame(self) -> EmgFrame:
        with self._lock:
            seq = self.seq
            self.seq += 1
            drive = self._drive
        t_us = seq * self.period_us
        if isinstance(drive, tuple):
            movement_id, timing, t0 = drive
            act = guide_activation(timing, (t_us - t0) / 1e6)
            drive = DriveSignal(movement_id, act)
        return synth_frame(self.model, drive, t_us, seq=seq)


class SimDevice:
    """TCP amplifier service: frames on one port, JSON-line control on another."""

    def __init__(self, model: SyntheticModel | None = None, *,
                 recording=None, port: int = DEFAULT_PORT,
                 control_port: int | None = None, realtime: bool = True,
                 host: str = "127.0.0.1"):
        if model is None and recording is None:
            raise ValueError("need a synthetic model or a recording to serve")
        self.model = model
        self.recording = recording
        self.host = host
        self.realtime = realtime
        self.source = FrameSource(model) if model is not None else None
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []
        self.frames_sent = 0
        try:
            self._listener = socket.create_server((host, port))
        except OSError as e:
            raise PortInUse(f"{host}:{port}: {e}") from e
        self.port = self._listener.getsockname()[1]
        self._ctl_listener = None
        if control_port is not None:
            try:
                self._ctl_listener = socket.create_server((host, control_port))
            except OSError as e:
                raise PortInUse(f"{host}:{control_port}: {e}") from e
            self.control_port = self._ctl_listener.getsockname()[1]

    # -- lifecycle ----------------------------------------------------

    def start(self) -> "SimDevice":
        t = threading.Thread(target=self._accept_loop, name="simdev-accept", daemon=True)
        t.start()
        self._threads.append(t)
        if self._ctl_listener is not None:
            t = threading.Thread(target=self._control_loop, name="simdev-ctl", daemon=True)
            t.start()
            self._threads.append(t)
        return self

    def stop(self) -> None:
        self._stop.set()
        self._listener.close()
        if self._ctl_listener is not None:
            self._ctl_listener.close()
        for t in self._threads:
            t.join(timeout=2.0)

    def __enter__(self) -> "SimDevice":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()

    # -- serving ------------------------------------------------------

    def _accept_loop(self) -> None:
        self._listener.settimeout(0.2)
        while not self._stop.is_set():
            try:
                conn, addr = self._listener.accept()
            except (TimeoutError, socket.timeout):
                continue
            except OSError:
                break
            log.info("client connected: %s", addr)
            try:
                self._serve_client(conn)
            except (BrokenPipeError, ConnectionResetError, OSError):
                log.info("client disconnected")
            finally:
                conn.close()

    def _serve_client(self, conn: socket.socket) -> None:
        conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        if self.recording is not None:
            self._serve_replay(conn)
        else:
            self._serve_synth(conn)

    def _serve_synth(self, conn: socket.socket) -> None:
        period_s = self.source.period_us / 1e6
        start = time.monotonic()
        n = 0
        while not self._stop.is_set():
            frame = self.source.next_frame()
            conn.sendall(encode_frame(frame))
            self.frames_sent += 1
            n += 1
            if self.realtime:
                deadline = start + n * period_s
                delay = deadline - time.monotonic()
                if delay > 0:
                    time.sleep(delay)

    def _serve_replay(self, conn: socket.socket) -> None:
        period_s = 1.0 / StreamConfig().frame_rate_hz
        start = time.monotonic()
        n = 0
        for frame in self.recording.all_frames():
            if self._stop.is_set():
                return
            conn.sendall(encode_frame(frame))
            self.frames_sent += 1
            n += 1
            if self.realtime:
                deadline = start + n * period_s
                delay = deadline - time.monotonic()
                if delay > 0:
                    time.sleep(delay)

    # -- control channel ----------------------------------------------

    def _control_loop(self) -> None:
        self._ctl_listener.settimeout(0.2)
        while not self._stop.is_set():
            try:
                conn, _ = self._ctl_listener.accept()
            except (TimeoutError, socket.timeout):
                continue
            except OSError:
                break
            with conn, conn.makefile("rw") as f:
                for line in f:
                    if self._stop.is_set():
                        break
                    try:
                        reply = self.handle_command(json.loads(line))
                    except Exception as e:  # control errors never kill the stream
                        log.warning("bad control command %r: %s", line.strip(), e)
                        reply = {"ok": False, "error": str(e)}
                    f.write(json.dumps(reply) + "\n")
                    f.flush()

    def handle_command(self, cmd: dict) -> dict:
        kind = cmd.get("cmd")
        if kind == "drive":
            timing = GuideTiming(**cmd.get("timing", {}))
            t0_us = self.source.start_cycle(cmd["movement"], timing)
            return {"ok": True, "t0_us": t0_us}
        if kind == "rest":
            self.source.rest()
            return {"ok": True}
        raise ValueError(f"unknown command {kind!r}")


def scripted_session(model: SyntheticModel, movements: list[str], timing: GuideTiming,
                     catalog: dict[str, MovementTemplate] | None = None,
                     *, duration_s: float = 30.0, guide_rate_hz: float = 60.0):
    """Synchronized EMG + guide streams for an unattended train/validate run.

    Returns a :class:`~myodecode.session.recording.SessionRecording` with
    one segment per movement; the synthetic "participant" follows the
    guide exactly (same trajectory drives both the labels and the EMG).
    """
    from .session.recording import GuideEntry, Segment, SessionRecording

    catalog = catalog or default_catalog()
    config = StreamConfig()
    period_us = config.frame_period_us
    guide_step_us = round(1e6 / guide_rate_hz)
    n_frames = int(duration_s * 1e6 // period_us)
    if not movements:
        movements = [REST]  # pure rest stream
    movement_ids = {m: i for i, m in enumerate([REST] + [m for m in movements if m != REST])}

    segments = []
    seq = 0
    for m in movements:
        template = catalog[m]
        frames = []
        guide = []
        start_us = seq * period_us
        next_guide_us = start_us
        for k in range(n_frames):
            t_us = seq * period_us
            t_s = (t_us - start_us) / 1e6
            act = guide_activation(timing, t_s) if m != REST else 0.0
            frames.append(synth_frame(model, DriveSignal(m, act), t_us, seq=seq))
            while next_guide_us <= t_us:
                g_s = (next_guide_us - start_us) / 1e6
                state, _ = guide_trajectory(template, timing, g_s)
                if m == REST:
                    state = np.zeros_like(state)
                guide.append(GuideEntry(t_us=next_guide_us, state=state,
                                        movement=movement_ids.get(m, 0)))
                next_guide_us += guide_step_us
            seq += 1
        segments.append(Segment(movement=m, frames=frames, guide=guide))

    return SessionRecording.new(
        catalog=catalog, config=config, timing=timing,
        movements=movements, segments=segments,
    )


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="simdev", description="simulated EMG amplifier")
    ap.add_argument("--port", type=int, default=DEFAULT_PORT)
    ap.add_argument("--control-port", type=int, default=None,
                    help="JSON-line control channel (default: port+1)")
    ap.add_argument("--mode", choices=["synth", "replay"], default="synth")
    ap.add_argument("--script", help="JSON session script (movements + timing)")
    ap.add_argument("--recording", help=".mgr file to replay")
    ap.add_argument("--snr", type=float, default=6.0)
    ap.add_argument("--noise-floor", type=float, default=100.0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--noisy-channels", default="",
                    help="comma-separated channels without skin contact, e.g. 1,17")
    ap.add_argument("--realtime", action=argparse.BooleanOptionalAction, default=True)
    args = ap.parse_args(argv)

    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(name)s %(message)s")
    noisy = tuple(int(c) for c in args.noisy_channels.split(",") if c != "")

    if args.mode == "replay":
        from .session.recording import load_session

        recording = load_session(args.recording)
        dev = SimDevice(recording=recording, port=args.port, realtime=args.realtime)
    else:
        movements = ["thumb", "index", "grasp"]
        if args.script:
            script = json.loads(open(args.script).read())
            movements = [e["movement"] for e in script]
        model = one_hot_model(movements, snr=args.snr, noise_floor=args.noise_floor,
                              seed=args.seed, noisy_channels=noisy)
        ctl = args.control_port if args.control_port is not None else args.port + 1
        dev = SimDevice(model=model, port=args.port, control_port=ctl,
                        realtime=args.realtime)
    with dev:
        log.info("serving on %s:%d (%s)", dev.host, dev.port, args.mode)
        try:
            while True:
                time.sleep(0.5)
        except KeyboardInterrupt:
            pass
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
