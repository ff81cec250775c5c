"""HTTP + WebSocket surface over the session manager.

Endpoints:
    POST /sessions                    create a live or replay session
    POST /sessions/{id}/events        ingest one event (live only)
    GET  /sessions/{id}/snapshot      consistent state cut for late joiners
    POST /sessions/{id}/commands      instructor commands and playback controls
    WS   /sessions/{id}/stream        stream messages out, playback controls in
"""
from __future__ import annotations

import asyncio
import queue
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect

from ..events import EventLogError, parse_event_line
from ..metrics import OutOfOrderEvent
from ..notifications import InvalidTransition, UnknownNotification
from .session import (
    Exercise,
    SeekOutOfRange,
    Session,
    SessionManager,
    SessionNotLive,
    UnknownSession,
)
from .wire import encode_message


class Broadcaster:
    """Per-session fan-out: synchronous emission into per-subscriber queues."""

    def __init__(self) -> None:
        self.queues: list[queue.SimpleQueue] = []

    def subscribe(self) -> queue.SimpleQueue:
        q: queue.SimpleQueue = queue.SimpleQueue()
        self.queues.append(q)
        return q

    def unsubscribe(self, q: queue.SimpleQueue) -> None:
        if q in self.queues:
            self.queues.remove(q)

    def publish(self, message) -> None:
        for q in self.queues:
            q.put(message)


def create_app(manager: Optional[SessionManager] = None) -> FastAPI:
    manager = manager or SessionManager()
    app = FastAPI(title="classpulse", version="0.1.0")
    app.state.manager = manager
    broadcasters: dict[str, Broadcaster] = {}

    def _broadcaster(session: Session) -> Broadcaster:
        sid = session.descriptor.session_id
        if sid not in broadcasters:
            broadcasters[sid] = Broadcaster()
            session.on_message = broadcasters[sid].publish
        return broadcasters[sid]

    def _session_or_404(session_id: str) -> Session:
        try:
            return manager.get(session_id)
        except UnknownSession:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")

    async def pump_replay(driver) -> None:
        """Advance a replay in wall time, honoring pause and speed. All state
        changes happen inside driver.step(), which is lock-serialized against
        playback commands."""
        while not driver.finished:
            if driver.paused:
                await asyncio.sleep(0.05)
                continue
            prev = driver.now_s
            t = await asyncio.to_thread(driver.step)
            if t is None:
                break
            delay = (t - prev) / driver.speed
            if delay > 0:
                await asyncio.sleep(delay)

    @app.post("/sessions")
    async def create_session(body: dict):
        mode = body.get("mode", "live")
        seed = int(body.get("seed", 0))
        if mode == "live":
            exercise = Exercise.from_json(
                body.get(
                    "exercise",
                    {"title": "exercise", "prompt": "", "tests_total": 4},
                )
            )
            session = manager.create_live(
                exercise, session_id=body.get("session_id"), seed=seed
            )
            _broadcaster(session)
            return {"session_id": session.descriptor.session_id, "mode": "live"}
        if mode == "replay":
            log_path = body.get("log")
            if not log_path or not Path(log_path).exists():
                raise HTTPException(status_code=400, detail="replay requires a log path")
            try:
                driver = manager.open_replay(
                    Path(log_path),
                    session_id=body.get("session_id"),
                    seed=seed,
                    speed=float(body.get("speed", 1.0)),
                    duration_s=body.get("duration_s"),
                )
            except EventLogError as exc:
                raise HTTPException(status_code=400, detail=str(exc))
            broadcaster = _broadcaster(driver.session)
            driver.on_message = broadcaster.publish
            driver.paused = not bool(body.get("autoplay", False))
            asyncio.get_running_loop().create_task(pump_replay(driver))
            return {
                "session_id": driver.descriptor.session_id,
                "mode": "replay",
                "duration_s": driver.duration_s,
            }
        raise HTTPException(status_code=400, detail=f"unknown mode {mode!r}")

    @app.post("/sessions/{session_id}/events")
    def ingest_event(session_id: str, body: dict):
        session = _session_or_404(session_id)
        try:
            import json as _json

            event = parse_event_line(_json.dumps(body))
            return session.ingest(event)
        except SessionNotLive:
            raise HTTPException(status_code=409, detail="session is not live")
        except (EventLogError, OutOfOrderEvent) as exc:
            raise HTTPException(status_code=400, detail=str(exc))

    @app.get("/sessions/{session_id}/snapshot")
    def snapshot(session_id: str):
        return _session_or_404(session_id).snapshot()

    @app.post("/sessions/{session_id}/commands")
    def command(session_id: str, body: dict):
        session = _session_or_404(session_id)
        driver = manager.get_replay(session_id)
        try:
            if body.get("type") == "playback":
                if driver is None:
                    raise HTTPException(status_code=409, detail="not a replay session")
                result = driver.command(body)
                if session_id in broadcasters:
                    # seek swaps the session object; rewire fan-out
                    driver.session.on_message = broadcasters[session_id].publish
                return result
            return session.command(body)
        except (UnknownNotification, KeyError) as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except (InvalidTransition, SeekOutOfRange, ValueError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))

    @app.websocket("/sessions/{session_id}/stream")
    async def stream(websocket: WebSocket, session_id: str):
        try:
            session = manager.get(session_id)
        except UnknownSession:
            await websocket.close(code=4404)
            return
        await websocket.accept()
        broadcaster = _broadcaster(session)
        q = broadcaster.subscribe()

        async def pump_outbound():
            while True:
                try:
                    message = q.get_nowait()
                except queue.Empty:
                    await asyncio.sleep(0.01)
                    continue
                await websocket.send_text(encode_message(message))

        pump = asyncio.create_task(pump_outbound())
        try:
            while True:
                raw = await websocket.receive_json()
                driver = manager.get_replay(session_id)
                if raw.get("type") == "playback" and driver is not None:
                    driver.command(raw)
                    driver.session.on_message = broadcaster.publish
        except WebSocketDisconnect:
            pass
        finally:
            pump.cancel()
            broadcaster.unsubscribe(q)

    @app.get("/healthz")
    def healthz():
        return {"ok": True, "sessions": len(manager.sessions)}

    return app
