"""Live telemetry and steering service.

One simulation loop owns all control state and ticks at the configured
rate whether or not anyone is listening; frames are buffered in a fixed
ring for late joiners. Clients speak newline-delimited JSON:

* raw TCP on the bind port: a persistent bidirectional connection — the
  server pushes one frame object per tick, the client may send
  ``{"type":"switch"}`` or ``{"type":"replay","dataset":path}`` at any time.
* HTTP on the bind port + 1: ``GET /state`` (one-shot snapshot),
  ``GET /stream`` (the same frame feed over a long-lived response),
  ``POST /switch`` and ``POST /replay`` (same payloads as the socket), and
  static files for the browser dashboard.

Malformed client messages get an error reply and the connection stays up.
Network handlers never touch control state directly: they enqueue events
into the simulator and read immutable frame snapshots.
"""

from __future__ import annotations

import asyncio
import json
from collections import deque
from dataclasses import replace
from pathlib import Path

from ..classify import classify, encode_class
from ..control import ControlSimulator, LoopbackPort, TelemetryFrame
from ..dataset import load_dataset, split_half, synthesize_dataset
from ..features import extract_features, fit_feature_spec
from .config import PipelineConfig
from .pipeline import _train

RING_SIZE = 512
SUBSCRIBER_QUEUE = 256
MAX_BODY = 1 << 20

_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".map": "application/json",
    ".svg": "image/svg+xml",
    ".png": "image/png",
}


class Service:
    """The running simulation plus its two network faces."""

    def __init__(self, config: PipelineConfig) -> None:
        self.config = config
        self.sim = ControlSimulator(
            LoopbackPort().open(),
            tick_hz=config.tick_hz,
            speed_mps=config.car_speed_mps,
        )
        self.ring: deque[TelemetryFrame] = deque(maxlen=RING_SIZE)
        self._subscribers: set[asyncio.Queue] = set()
        self._model = None
        self._model_spec = None
        self._tick_task: asyncio.Task | None = None
        self._servers: list[asyncio.base_events.Server] = []
        self.ndjson_port: int | None = None
        self.http_port: int | None = None

    # -- lifecycle ---------------------------------------------------------

    async def start(self) -> None:
        host, port = self.config.bind_host_port()
        ndjson_server = await asyncio.start_server(self._handle_ndjson, host, port)
        self.ndjson_port = ndjson_server.sockets[0].getsockname()[1]
        http_port = port + 1 if port else 0
        http_server = await asyncio.start_server(self._handle_http, host, http_port)
        self.http_port = http_server.sockets[0].getsockname()[1]
        self._servers = [ndjson_server, http_server]
        self._tick_task = asyncio.ensure_future(self._tick_loop())

    async def stop(self) -> None:
        if self._tick_task is not None:
            self._tick_task.cancel()
            try:
                await self._tick_task
            except asyncio.CancelledError:
                pass
        for server in self._servers:
            server.close()
            await server.wait_closed()

    async def run_forever(self) -> None:
        await self.start()
        host, _ = self.config.bind_host_port()
        print(f"telemetry socket on {host}:{self.ndjson_port}")
        print(f"http interface on http://{host}:{self.http_port}/")
        try:
            await asyncio.Event().wait()
        finally:
            await self.stop()

    # -- simulation --------------------------------------------------------

    async def _tick_loop(self) -> None:
        interval = 1.0 / self.config.tick_hz
        loop = asyncio.get_event_loop()
        next_t = loop.time()
        while True:
            frame = self.sim.step()
            self.ring.append(frame)
            line = json.dumps(frame.to_dict()) + "\n"
            for queue in list(self._subscribers):
                if queue.full():
                    queue.get_nowait()  # drop the oldest, keep the feed live
                queue.put_nowait(line)
            next_t += interval
            await asyncio.sleep(max(0.0, next_t - loop.time()))

    def latest_frame(self) -> TelemetryFrame | None:
        return self.ring[-1] if self.ring else None

    def _ensure_model(self):
        """Train the recognition stage once, on first replay use."""
        if self._model is None:
            cfg = self.config
            if cfg.dataset_path:
                dataset = load_dataset(cfg.dataset_path)
            else:
                dataset = synthesize_dataset(replace(cfg.synth, seed=cfg.seed))
            train_set, _ = split_half(dataset, cfg.seed + 1)
            spec = fit_feature_spec(train_set, cfg.feature_spec())
            self._model = _train(cfg, spec, train_set)
            self._model_spec = spec
        return self._model, self._model_spec

    def _replay_codes(self, dataset_path: str) -> list:
        model, spec = self._ensure_model()
        dataset = load_dataset(dataset_path)
        codes = []
        for trial in dataset.trials:
            label, _ = classify(model, extract_features(trial, spec))
            codes.append(encode_class(label))
        return codes

    async def _apply_message(self, msg: dict) -> dict:
        """Handle one client message; returns the reply object."""
        if not isinstance(msg, dict) or "type" not in msg:
            return {"type": "error", "message": "message must be an object with a 'type'"}
        if msg["type"] == "switch":
            self.sim.submit_switch()
            return {"type": "ok"}
        if msg["type"] == "replay":
            path = msg.get("dataset")
            if not path:
                return {"type": "error", "message": "replay needs a 'dataset' path"}
            try:
                loop = asyncio.get_event_loop()
                codes = await loop.run_in_executor(None, self._replay_codes, path)
            except Exception as exc:  # noqa: BLE001 - reported to the client
                return {"type": "error", "message": str(exc)}
            for code in codes:
                self.sim.submit_code(code)
            return {"type": "ok", "queued": len(codes)}
        return {"type": "error", "message": f"unknown message type {msg['type']!r}"}

    # -- NDJSON socket -----------------------------------------------------

    async def _handle_ndjson(
        self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter
    ) -> None:
        queue: asyncio.Queue = asyncio.Queue(maxsize=SUBSCRIBER_QUEUE)
        for frame in self.ring:
            queue.put_nowait(json.dumps(frame.to_dict()) + "\n")
        self._subscribers.add(queue)
        sender = asyncio.ensure_future(self._pump(queue, writer))
        try:
            while True:
                raw = await reader.readline()
                if not raw:
                    break
                text = raw.decode(errors="replace").strip()
                if not text:
                    continue
                try:
                    msg = json.loads(text)
                except json.JSONDecodeError as exc:
                    reply = {"type": "error", "message": f"bad json: {exc}"}
                else:
                    reply = await self._apply_message(msg)
                writer.write((json.dumps(reply) + "\n").encode())
                await writer.drain()
        except (ConnectionError, asyncio.IncompleteReadError):
            pass
        finally:
            self._subscribers.discard(queue)
            sender.cancel()
            writer.close()

    async def _pump(self, queue: asyncio.Queue, writer: asyncio.StreamWriter) -> None:
        try:
            while True:
                line = await queue.get()
                writer.write(line.encode())
                await writer.drain()
        except (asyncio.CancelledError, ConnectionError):
            pass

    # -- HTTP --------------------------------------------------------------

    async def _handle_http(
        self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter
    ) -> None:
        try:
            request = await reader.readline()
            parts = request.decode(errors="replace").split()
            if len(parts) < 2:
                return
            method, path = parts[0], parts[1]
            headers = {}
            while True:
                line = await reader.readline()
                if line in (b"\r\n", b"\n", b""):
                    break
                key, _, value = line.decode(errors="replace").partition(":")
                headers[key.strip().lower()] = value.strip()
            body = b""
            length = int(headers.get("content-length", 0) or 0)
            if length:
                body = await reader.readexactly(min(length, MAX_BODY))
            await self._route_http(method, path, body, writer)
        except (ConnectionError, asyncio.IncompleteReadError):
            pass
        finally:
            try:
                writer.close()
            except Exception:
                pass

    async def _route_http(
        self, method: str, path: str, body: bytes, writer: asyncio.StreamWriter
    ) -> None:
        if method == "GET" and path == "/state":
            frame = self.latest_frame()
            payload = json.dumps(frame.to_dict() if frame else {"type": "empty"})
            await self._respond(writer, 200, payload.encode(), "application/json")
        elif method == "GET" and path == "/stream":
            await self._stream_http(writer)
        elif method == "POST" and path in ("/switch", "/replay"):
            try:
                msg = json.loads(body) if body else {}
            except json.JSONDecodeError as exc:
                msg = None
                reply = {"type": "error", "message": f"bad json: {exc}"}
            if msg is not None:
                msg.setdefault("type", path.lstrip("/"))
                reply = await self._apply_message(msg)
            status = 200 if reply.get("type") == "ok" else 400
            await self._respond(
                writer, status, json.dumps(reply).encode(), "application/json"
            )
        elif method == "GET":
            await self._static(path, writer)
        else:
            await self._respond(writer, 405, b"method not allowed", "text/plain")

    async def _stream_http(self, writer: asyncio.StreamWriter) -> None:
        queue: asyncio.Queue = asyncio.Queue(maxsize=SUBSCRIBER_QUEUE)
        for frame in self.ring:
            queue.put_nowait(json.dumps(frame.to_dict()) + "\n")
        self._subscribers.add(queue)
        writer.write(
            b"HTTP/1.1 200 OK\r\n"
            b"Content-Type: application/x-ndjson\r\n"
            b"Cache-Control: no-store\r\n"
            b"Access-Control-Allow-Origin: *\r\n"
            b"Connection: close\r\n\r\n"
        )
        try:
            while True:
                line = await queue.get()
                writer.write(line.encode())
                await writer.drain()
        except (ConnectionError, asyncio.CancelledError):
            pass
        finally:
            self._subscribers.discard(queue)

    async def _static(self, path: str, writer: asyncio.StreamWriter) -> None:
        root = self.config.static_dir
        if root is None:
            default = Path(__file__).resolve().parents[3] / "frontend" / "dist"
            root = default if default.is_dir() else None
        if root is None:
            if path == "/":
                body = (
                    b"<!doctype html><title>ecogcar</title>"
                    b"<p>No dashboard build found. GET /state for a snapshot, "
                    b"GET /stream for the frame feed.</p>"
                )
                await self._respond(writer, 200, body, "text/html; charset=utf-8")
            else:
                await self._respond(writer, 404, b"not found", "text/plain")
            return
        root = Path(root).resolve()
        rel = "index.html" if path == "/" else path.lstrip("/")
        target = (root / rel).resolve()
        if not str(target).startswith(str(root)) or not target.is_file():
            await self._respond(writer, 404, b"not found", "text/plain")
            return
        ctype = _CONTENT_TYPES.get(target.suffix, "application/octet-stream")
        await self._respond(writer, 200, target.read_bytes(), ctype)

    async def _respond(
        self, writer: asyncio.StreamWriter, status: int, body: bytes, ctype: str
    ) -> None:
        reason = {200: "OK", 400: "Bad Request", 404: "Not Found", 405: "Method Not Allowed"}
        head = (
            f"HTTP/1.1 {status} {reason.get(status, 'OK')}\r\n"
            f"Content-Type: {ctype}\r\n"
            f"Content-Length: {len(body)}\r\n"
            "Access-Control-Allow-Origin: *\r\n"
            "Connection: close\r\n\r\n"
        )
        writer.write(head.encode() + body)
        await writer.drain()


def serve(config: PipelineConfig, bind: str | None = None) -> None:
    """Run the service until interrupted."""
    if bind is not None:
        config = replace(config, bind=bind)
    service = Service(config)
    try:
        asyncio.run(service.run_forever())
    except KeyboardInterrupt:
        pass
