"""WebSocket/HTTP gateway over the session orchestrator.

One orchestrator, many observers: commands arrive as JSON envelopes
{type, seq, payload} and are answered with exactly one ack or error
carrying the same seq.  State changes, coalesced plot chunks (<= 30
msg/s), predictions (<= 32 Hz), and validation reports are broadcast to
every connected client.  Slow clients lose plot messages first; control
and state messages survive.
"""

from __future__ import annotations

import asyncio
import contextlib
import logging
import threading
import time

from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .. import __version__
from ..config import AppConfig
from ..decoder import GbdtParams
from ..errors import MyodecodeError
from ..session.orchestrator import Orchestrator
from .plotstream import PlotTap

log = logging.getLogger(__name__)

PUMP_INTERVAL_S = 1 / 30.0
PREDICTION_INTERVAL_S = 1 / 32.0
CLIENT_QUEUE_SIZE = 256


class Broadcaster:
    """Fan-out of engine events to per-client queues, loop-thread safe."""

    def __init__(self):
        self.loop: asyncio.AbstractEventLoop | None = None
        self.clients: dict[int, asyncio.Queue] = {}
        self.plot_drops: dict[int, int] = {}
        self.seq = 0
        self._lock = threading.Lock()

    def attach_loop(self, loop: asyncio.AbstractEventLoop) -> None:
        self.loop = loop

    def register(self) -> tuple[int, asyncio.Queue]:
        with self._lock:
            self._next_cid = getattr(self, "_next_cid", 0) + 1
            cid = self._next_cid
            q = asyncio.Queue(maxsize=CLIENT_QUEUE_SIZE)
            self.clients[cid] = q
            self.plot_drops[cid] = 0
            return cid, q

    def unregister(self, cid: int) -> None:
        with self._lock:
            self.clients.pop(cid, None)
            self.plot_drops.pop(cid, None)

    def publish_threadsafe(self, msg: dict) -> None:
        if self.loop is None or self.loop.is_closed():
            return
        self.loop.call_soon_threadsafe(self.publish, msg)

    def publish(self, msg: dict) -> None:
        self.seq += 1
        msg = {**msg, "seq": self.seq}
        droppable = msg.get("type") == "plot"
        for cid, q in list(self.clients.items()):
            try:
                q.put_nowait(msg)
            except asyncio.QueueFull:
                if droppable:
                    self.plot_drops[cid] = self.plot_drops.get(cid, 0) + 1
                else:
                    with contextlib.suppress(asyncio.QueueEmpty):
                        q.get_nowait()  # shed the oldest, keep control flowing
                    with contextlib.suppress(asyncio.QueueFull):
                        q.put_nowait(msg)


def create_app(orch: Orchestrator, config: AppConfig | None = None) -> FastAPI:
    config = config or AppConfig()

    @contextlib.asynccontextmanager
    async def lifespan(app: FastAPI):
        broadcaster.attach_loop(asyncio.get_running_loop())
        pump_task = asyncio.create_task(pump())
        yield
        pump_task.cancel()
        with contextlib.suppress(asyncio.CancelledError):
            await pump_task

    app = FastAPI(title="myodecode gateway", version=__version__, lifespan=lifespan)
    broadcaster = Broadcaster()
    plot_tap = PlotTap()
    app.state.orchestrator = orch
    app.state.broadcaster = broadcaster
    app.state.plot_tap = plot_tap

    if plot_tap.on_frame not in orch.engine.frame_taps:
        orch.engine.frame_taps.append(plot_tap.on_frame)

    orch.state_listeners.append(
        lambda s: broadcaster.publish_threadsafe({"type": "state", "payload": s.to_dict()})
    )
    orch.report_listeners.append(
        lambda r: broadcaster.publish_threadsafe(
            {"type": "validation_report", "payload": r.to_dict()}
        )
    )

    latest_pred = {"pred": None, "sent_at": 0.0}

    def on_prediction(pred):
        latest_pred["pred"] = pred

    orch.engine.prediction_taps.append(on_prediction)

    async def pump():
        while True:
            await asyncio.sleep(PUMP_INTERVAL_S)
            chunks = plot_tap.drain()
            if chunks and broadcaster.clients:
                broadcaster.publish({
                    "type": "plot",
                    "payload": {
                        "t_us": chunks[-1].t_us,
                        "chunks": [c.channels.tolist() for c in chunks],
                        "dropped": plot_tap.dropped
                        + sum(broadcaster.plot_drops.values()),
                    },
                })
            pred = latest_pred["pred"]
            now = time.monotonic()
            if (pred is not None and broadcaster.clients
                    and now - latest_pred["sent_at"] >= PREDICTION_INTERVAL_S):
                latest_pred["pred"] = None
                latest_pred["sent_at"] = now
                names = orch.engine.class_names
                broadcaster.publish({
                    "type": "prediction",
                    "payload": {
                        "t_us": pred.t_us,
                        "naive": names[pred.naive] if names else pred.naive,
                        "solved": names[pred.solved] if names else pred.solved,
                        "probs": [round(float(p), 5) for p in pred.probs],
                        "set": [names[i] if names else i for i in pred.set_labels],
                        "certain": pred.certain,
                        "state": orch.engine.prediction_cell.get()[0].tolist(),
                        "guide": orch.engine.guide_cell.get()[0].tolist(),
                    },
                })

    @app.get("/health")
    def health():
        return {"ok": True, "version": __version__}

    @app.get("/state")
    def state():
        return orch.state().to_dict()

    @app.get("/report")
    def report():
        return orch.report.to_dict() if orch.report is not None else None

    def run_command(cmd: str, payload: dict) -> dict:
        if cmd == "connect_device":
            orch.connect_device(payload.get("host", config.device.host),
                                int(payload.get("port", config.device.port)))
            return {}
        if cmd == "disconnect":
            orch.disconnect()
            return {}
        if cmd == "start_recording":
            orch.start_recording(payload["movement"],
                                 float(payload.get("duration_s", 30.0)))
            return {}
        if cmd == "stop_recording":
            orch.stop_recording()
            return {}
        if cmd == "train":
            params = GbdtParams(
                n_rounds=int(payload.get("rounds", config.decoder.rounds)),
                max_depth=int(payload.get("depth", config.decoder.depth)),
                learning_rate=float(payload.get("learning_rate",
                                                config.decoder.learning_rate)),
            )
            orch.train(params, block=False)
            return {}
        if cmd == "start_validation":
            orch.start_validation(payload["movements"],
                                  reps=int(payload.get("reps", 6)),
                                  window_s=float(payload.get("window_s", 45.0)))
            return {}
        if cmd == "stop":
            orch.stop()
            return {}
        if cmd == "set_config":
            return orch.set_config(payload)
        if cmd == "list_catalog":
            return {
                "movements": [
                    {"id": t.id, "target": t.target.tolist(), "display_id": t.display_id}
                    for t in orch.catalog.values()
                ]
            }
        if cmd == "remap_display":
            orch.remap_display(payload["executed"], payload["display"])
            return {}
        raise MyodecodeError(f"unknown command {cmd!r}")

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        cid, queue = broadcaster.register()
        await ws.send_json({"type": "state", "seq": 0, "payload": orch.state().to_dict()})

        async def sender():
            while True:
                msg = await queue.get()
                await ws.send_json(msg)

        send_task = asyncio.create_task(sender())
        try:
            while True:
                envelope = await ws.receive_json()
                cmd = envelope.get("type")
                seq = envelope.get("seq")
                payload = envelope.get("payload") or {}
                try:
                    result = await asyncio.to_thread(run_command, cmd, payload)
                    await ws.send_json({"type": "ack", "seq": seq,
                                        "payload": {"command": cmd, **result}})
                except (MyodecodeError, KeyError, ValueError, TypeError) as e:
                    await ws.send_json({
                        "type": "error", "seq": seq,
                        "payload": {"command": cmd, "error": type(e).__name__,
                                    "detail": str(e), "phase": orch.phase.value},
                    })
        except WebSocketDisconnect:
            pass
        finally:
            send_task.cancel()
            with contextlib.suppress(asyncio.CancelledError):
                await send_task
            broadcaster.unregister(cid)

    return app
