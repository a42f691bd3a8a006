"""Headless command-line interface.

Subcommands drive the same orchestrator the UI talks to: monitor,
record, train, validate, replay-eval, run-session (full scripted
workflow), bench (latency/throughput suite), and serve (gateway for the
browser console).  Successful runs print JSON results on stdout and exit
0; failures print a JSON error object on stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import logging
import socket
import sys
import time

import numpy as np

from .. import _kernels, simdev
from ..config import AppConfig, load_config
from ..conformal import fit_calibration, predict_set
from ..decoder import (
    GbdtParams,
    apply_normalizer,
    assemble,
    fit_normalizer,
    load_model,
    save_model,
    train_gbdt,
)
from ..engine import DecodeEngine
from ..errors import MyodecodeError
from ..io_out import OutputTarget, RateSender
from ..kinematics import GuideTiming, catalog_hash, default_catalog
from ..session.metrics import MovementResult, ValidationReport
from ..session.orchestrator import Orchestrator, Phase
from ..session.recording import load_session, save_session

log = logging.getLogger(__name__)


def _hostport(text: str, default_port: int) -> tuple[str, int]:
    if ":" in text:
        host, port = text.rsplit(":", 1)
        return host, int(port)
    return text, default_port


def _wait(predicate, timeout_s: float, what: str) -> None:
    deadline = time.monotonic() + timeout_s
    while not predicate():
        if time.monotonic() > deadline:
            raise MyodecodeError(f"timed out waiting for {what}")
        time.sleep(0.02)


class _SimControlClient:
    """JSON-line control channel to a remote simulated participant."""

    def __init__(self, host: str, port: int):
        self._sock = socket.create_connection((host, port), timeout=5.0)
        self._file = self._sock.makefile("rw")

    def _round_trip(self, obj: dict) -> dict:
        self._file.write(json.dumps(obj) + "\n")
        self._file.flush()
        return json.loads(self._file.readline())

    def start_cycle(self, movement: str, timing: GuideTiming) -> int | None:
        reply = self._round_trip(
            {"cmd": "drive", "movement": movement, "timing": timing.to_dict()})
        return reply.get("t0_us")

    def rest(self) -> None:
        self._round_trip({"cmd": "rest"})


def _make_orchestrator(args, config: AppConfig) -> Orchestrator:
    participant = None
    if getattr(args, "sim_control", None):
        host, port = _hostport(args.sim_control, config.device.port + 1)
        participant = _SimControlClient(host, port)
    return Orchestrator(
        timing=config.guide,
        conformal_enabled=config.conformal.enabled,
        conformal_alpha=config.conformal.alpha,
        conformal_lambda=config.conformal.lam,
        conformal_k_reg=config.conformal.k_reg,
        solver_window=config.conformal.window,
        participant=participant,
    )


def cmd_monitor(args, config: AppConfig) -> int:
    orch = _make_orchestrator(args, config)
    host, port = _hostport(args.device, config.device.port)
    orch.connect_device(host, port)
    t0 = time.monotonic()
    try:
        while args.seconds is None or time.monotonic() - t0 < args.seconds:
            time.sleep(0.5)
    except KeyboardInterrupt:
        pass
    stats = {"frames": orch.engine.frames_rx, "gaps": orch.engine.buffer.gaps,
             "resyncs": orch.engine.parser.resyncs}
    orch.disconnect()
    print(json.dumps(stats))
    return 0


def cmd_record(args, config: AppConfig) -> int:
    orch = _make_orchestrator(args, config)
    if args.session:
        orch.recording = load_session(args.session)
        orch.catalog.update(orch.recording.catalog())
    host, port = _hostport(args.device, config.device.port)
    orch.connect_device(host, port)
    for movement in args.movement:
        orch.start_recording(movement, args.duration)
        _wait(lambda: orch.phase != Phase.RECORDING,
              timeout_s=args.duration * 20 + 30, what=f"recording of {movement}")
    orch.disconnect()
    save_session(orch.recording, args.out)
    print(json.dumps({
        "out": args.out,
        "segments": [
            {"movement": s.movement, "frames": len(s.frames), "guide": len(s.guide),
             "seq_gaps": s.seq_gaps()}
            for s in orch.recording.segments
        ],
    }))
    return 0


def cmd_train(args, config: AppConfig) -> int:
    recording = load_session(args.recording)
    catalog = recording.catalog() or default_catalog()
    ds = assemble(recording, catalog)
    norm = fit_normalizer(ds)
    Xn = apply_normalizer(norm, ds.X)
    params = GbdtParams(n_rounds=args.rounds, max_depth=args.depth,
                        learning_rate=args.learning_rate)
    model = train_gbdt(Xn[ds.train_idx], ds.y[ds.train_idx], ds.n_classes, params)
    model.class_names = ds.class_names
    calibration = fit_calibration(
        model.predict_proba(Xn[ds.cal_idx]), ds.y[ds.cal_idx],
        alpha=config.conformal.alpha, lam=config.conformal.lam,
        k_reg=config.conformal.k_reg,
    )
    save_model(args.out, model, norm, catalog_hash(catalog), calibration)
    test_proba = model.predict_proba(Xn[ds.test_idx])
    test_acc = float(np.mean(test_proba.argmax(axis=1) == ds.y[ds.test_idx]))
    print(json.dumps({
        "out": args.out, "train_seconds": round(model.train_seconds, 3),
        "classes": ds.class_names, "n_samples": int(ds.X.shape[0]),
        "test_accuracy": round(test_acc, 4), "backend": _kernels.BACKEND,
    }))
    return 0


def cmd_validate(args, config: AppConfig) -> int:
    orch = _make_orchestrator(args, config)
    model, norm, _, calibration = load_model(args.model)
    orch.engine.set_model(model, norm, calibration, model.class_names)
    host, port = _hostport(args.device, config.device.port)
    orch.connect_device(host, port)
    movements = args.movements.split(",")
    orch.start_validation(movements, reps=args.reps, window_s=args.window)
    _wait(lambda: orch.phase != Phase.VALIDATING,
          timeout_s=args.window * len(movements) * 20 + 30, what="validation")
    orch.disconnect()
    report = orch.report
    print(report.to_json(indent=2))
    return 0


def cmd_replay_eval(args, config: AppConfig) -> int:
    """Offline: load a session, train, report naive vs conformal accuracy."""
    recording = load_session(args.session)
    catalog = recording.catalog() or default_catalog()
    ds = assemble(recording, catalog)
    norm = fit_normalizer(ds)
    Xn = apply_normalizer(norm, ds.X)
    params = GbdtParams(n_rounds=args.rounds, max_depth=args.depth)
    t0 = time.perf_counter()
    model = train_gbdt(Xn[ds.train_idx], ds.y[ds.train_idx], ds.n_classes, params)
    calibration = fit_calibration(
        model.predict_proba(Xn[ds.cal_idx]), ds.y[ds.cal_idx],
        alpha=config.conformal.alpha, lam=config.conformal.lam,
        k_reg=config.conformal.k_reg,
    )
    report = evaluate_on_test(ds, Xn, model, calibration,
                              window=config.conformal.window,
                              conformal_enabled=config.conformal.enabled)
    report.durations_s["train_s"] = time.perf_counter() - t0
    print(report.to_json(indent=2))
    return 0


def evaluate_on_test(ds, Xn, model, calibration, *, window: int = 75,
                     conformal_enabled: bool = True) -> ValidationReport:
    """Score the held-out windows per movement, naive vs solver output."""
    from ..conformal import SolverWindow

    report = ValidationReport(conformal_enabled=conformal_enabled)
    proba = model.predict_proba(Xn[ds.test_idx])
    naive = proba.argmax(axis=1)
    seg_ids = ds.segment_of[ds.test_idx]
    y = ds.y[ds.test_idx]
    for seg_i in np.unique(seg_ids):
        mask = seg_ids == seg_i
        movement = ds.class_names[int(np.max(y[mask]))] if np.any(y[mask] > 0) else "rest"
        solver = SolverWindow(capacity=window)
        solved = np.empty(mask.sum(), dtype=np.int64)
        for k, p in enumerate(proba[mask]):
            if conformal_enabled:
                pset = predict_set(p, calibration)
                solved[k] = solver.solve(pset)
            else:
                solved[k] = int(np.argmax(p))
        report.per_movement.append(MovementResult(
            movement=movement,
            naive_accuracy=float(np.mean(naive[mask] == y[mask])),
            conformal_accuracy=float(np.mean(solved == y[mask])),
            n_predictions=int(mask.sum()),
        ))
    return report


def cmd_run_session(args, config: AppConfig) -> int:
    """Scripted end-to-end workflow: record each movement, train, validate."""
    movements = args.movements.split(",")
    t_start = time.perf_counter()
    model_sim = simdev.one_hot_model(movements, snr=args.snr, seed=args.seed)
    dev = simdev.SimDevice(model=model_sim, port=0, control_port=0,
                           realtime=args.realtime)
    dev.start()
    try:
        orch = Orchestrator(
            timing=config.guide,
            conformal_enabled=config.conformal.enabled,
            conformal_alpha=config.conformal.alpha,
            conformal_lambda=config.conformal.lam,
            conformal_k_reg=config.conformal.k_reg,
            solver_window=config.conformal.window,
            participant=dev.source,
        )
        orch.connect_device(dev.host, dev.port)
        for movement in movements:
            orch.start_recording(movement, args.duration)
            _wait(lambda: orch.phase != Phase.RECORDING,
                  timeout_s=args.duration * 20 + 60, what=f"recording {movement}")
        train_info = orch.train(GbdtParams(n_rounds=args.rounds, max_depth=args.depth))
        orch.start_validation(movements, reps=args.reps, window_s=args.window)
        _wait(lambda: orch.phase != Phase.VALIDATING,
              timeout_s=args.window * len(movements) * 20 + 60, what="validation")
        orch.disconnect()
    finally:
        dev.stop()

    if args.out_session:
        save_session(orch.recording, args.out_session)
    if args.out_model:
        save_model(args.out_model, orch.engine.model, orch.engine.norm,
                   catalog_hash(orch.catalog), orch.engine.calibration)
    result = {
        "report": orch.report.to_dict(),
        "train": train_info,
        "total_seconds": round(time.perf_counter() - t_start, 2),
        "frames": orch.engine.frames_rx,
        "backend": _kernels.BACKEND,
    }
    print(json.dumps(result, indent=2))
    return 0


def cmd_bench(args, config: AppConfig) -> int:
    """Latency/throughput suite over the full realtime chain, plus kernels."""
    movements = ["thumb", "index", "grasp"]
    model_sim = simdev.one_hot_model(movements, snr=6.0, seed=7)
    recording = simdev.scripted_session(model_sim, movements, config.guide,
                                        duration_s=args.train_seconds)
    catalog = recording.catalog()
    ds = assemble(recording, catalog)
    norm = fit_normalizer(ds)
    Xn = apply_normalizer(norm, ds.X)
    params = GbdtParams(n_rounds=args.rounds, max_depth=args.depth)
    model = train_gbdt(Xn[ds.train_idx], ds.y[ds.train_idx], ds.n_classes, params)
    model.class_names = ds.class_names
    calibration = fit_calibration(model.predict_proba(Xn[ds.cal_idx]), ds.y[ds.cal_idx])

    engine = DecodeEngine(catalog)
    engine.set_model(model, norm, calibration, ds.class_names)
    dev = simdev.SimDevice(model=model_sim, port=0, realtime=True)
    dev.start()
    senders = []
    try:
        if args.udp_out:
            senders.append(RateSender(
                OutputTarget(kind="null", rate_hz=config.output.rate_hz),
                engine.prediction_cell, interpolate_s=config.output.interp_s).start())
        engine.connect(dev.host, dev.port)
        dev.source.start_cycle("grasp", config.guide)
        time.sleep(args.seconds)
        engine.disconnect()
    finally:
        for s in senders:
            s.stop()
        dev.stop()

    stats = engine.latency_stats()
    windows_per_s = stats.pop("steady_windows_per_s") or 0.0
    result = {
        "backend": _kernels.BACKEND,
        "seconds": args.seconds,
        "frames": engine.frames_rx,
        "windows": engine.windows,
        "windows_per_s": round(windows_per_s, 2),
        "latency_ms": {k: round(v, 4) for k, v in stats.items()
                       if k != "windows" and v is not None},
        "kernel_comparison": _bench_kernels(Xn[ds.train_idx], ds.y[ds.train_idx],
                                            ds.n_classes),
    }
    print(json.dumps(result, indent=2))
    ok = stats["p99_ms"] is not None and stats["p99_ms"] < 9.0 and windows_per_s >= 110.0
    return 0 if ok else 1


def _bench_kernels(Xn, y, n_classes) -> dict:
    """Compare compiled vs numpy backends on growth, inference, and the filter."""
    from ..decoder.gbdt import bin_features, quantile_bin_edges

    rng = np.random.default_rng(0)
    edges = quantile_bin_edges(Xn, 64)
    bins = bin_features(Xn, edges)
    g = rng.normal(size=Xn.shape[0])
    h = rng.uniform(0.05, 0.25, size=Xn.shape[0])
    grid = rng.normal(size=(16, 2, 360))
    x1 = Xn[:1]

    out = {}
    backends = [("numpy", _kernels.pure)]
    if _kernels.compiled is not None:
        backends.insert(0, ("compiled", _kernels.compiled))
    for name, impl in backends:
        grower = impl.Grower(bins, 6, 64, 1.0, 1e-3, 0.0)
        t0 = time.perf_counter()
        reps = 20 if name == "compiled" else 3
        for _ in range(reps):
            grower.grow(g, h)
        grow_ms = (time.perf_counter() - t0) / reps * 1e3
        params = GbdtParams(n_rounds=50)
        model = train_gbdt(Xn, y, n_classes, params, backend=impl)
        t0 = time.perf_counter()
        for _ in range(200):
            model.margins(x1, backend=impl)
        pred_us = (time.perf_counter() - t0) / 200 * 1e6
        t0 = time.perf_counter()
        for _ in range(200):
            impl.filter_rms(grid)
        rms_us = (time.perf_counter() - t0) / 200 * 1e6
        out[name] = {
            "grow_tree_ms": round(grow_ms, 3),
            "predict_window_us": round(pred_us, 1),
            "filter_rms_us": round(rms_us, 1),
        }
    return out


def cmd_serve(args, config: AppConfig) -> int:
    import uvicorn

    from .api import create_app

    orch = _make_orchestrator(args, config)
    app = create_app(orch, config)
    host, port = _hostport(args.bind, 8765)
    senders = []
    if config.output.kind != "null":
        senders.append(RateSender(
            OutputTarget(kind=config.output.kind, host=config.output.host,
                         port=config.output.port, rate_hz=config.output.rate_hz),
            orch.engine.prediction_cell, interpolate_s=config.output.interp_s).start())
        senders.append(RateSender(
            OutputTarget(kind=config.output.kind, host=config.output.host,
                         port=config.output.guide_port,
                         rate_hz=config.output.guide_rate_hz),
            orch.engine.guide_cell).start())
    try:
        uvicorn.run(app, host=host, port=port, log_level="info")
    finally:
        for s in senders:
            s.stop()
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="myodecode",
                                 description="real-time EMG decoding engine")
    ap.add_argument("--config", help="config file (TOML/JSON); default $MYO_CONFIG")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("monitor", help="connect and stream; prints counters")
    p.add_argument("--device", default="127.0.0.1:5566")
    p.add_argument("--seconds", type=float, default=None)
    p.add_argument("--sim-control", default=None)
    p.set_defaults(fn=cmd_monitor)

    p = sub.add_parser("record", help="record movements into a session file")
    p.add_argument("--device", default="127.0.0.1:5566")
    p.add_argument("--movement", action="append", required=True)
    p.add_argument("--duration", type=float, default=30.0)
    p.add_argument("--session", help="existing session to extend/replace")
    p.add_argument("--out", required=True)
    p.add_argument("--sim-control", default=None)
    p.set_defaults(fn=cmd_record)

    p = sub.add_parser("train", help="train a model from a session file")
    p.add_argument("--recording", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--rounds", type=int, default=1000)
    p.add_argument("--depth", type=int, default=6)
    p.add_argument("--learning-rate", type=float, default=0.1)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("validate", help="live validation against a trained model")
    p.add_argument("--device", default="127.0.0.1:5566")
    p.add_argument("--model", required=True)
    p.add_argument("--movements", required=True, help="comma-separated")
    p.add_argument("--reps", type=int, default=6)
    p.add_argument("--window", type=float, default=45.0)
    p.add_argument("--sim-control", default=None)
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("replay-eval",
                       help="offline: train on a session, report accuracies")
    p.add_argument("--session", required=True)
    p.add_argument("--rounds", type=int, default=1000)
    p.add_argument("--depth", type=int, default=6)
    p.set_defaults(fn=cmd_replay_eval)

    p = sub.add_parser("run-session",
                       help="scripted record+train+validate against a simulator")
    p.add_argument("--movements", default="thumb,index,grasp")
    p.add_argument("--duration", type=float, default=30.0)
    p.add_argument("--snr", type=float, default=6.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rounds", type=int, default=1000)
    p.add_argument("--depth", type=int, default=6)
    p.add_argument("--reps", type=int, default=6)
    p.add_argument("--window", type=float, default=45.0)
    p.add_argument("--realtime", action=argparse.BooleanOptionalAction, default=False)
    p.add_argument("--out-session")
    p.add_argument("--out-model")
    p.set_defaults(fn=cmd_run_session)

    p = sub.add_parser("bench", help="latency/throughput suite")
    p.add_argument("--seconds", type=float, default=10.0)
    p.add_argument("--rounds", type=int, default=1000)
    p.add_argument("--depth", type=int, default=6)
    p.add_argument("--train-seconds", type=float, default=8.0,
                   help="scripted duration per movement for the bench model")
    p.add_argument("--udp-out", action="store_true")
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("serve", help="run the WebSocket/HTTP gateway")
    p.add_argument("--bind", default="127.0.0.1:8765")
    p.add_argument("--sim-control", default=None)
    p.set_defaults(fn=cmd_serve)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    try:
        config = load_config(args.config)
        return args.fn(args, config)
    except MyodecodeError as e:
        print(json.dumps({"error": type(e).__name__, "detail": str(e)}), file=sys.stderr)
        return 1
    except OSError as e:
        print(json.dumps({"error": "OSError", "detail": str(e)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
