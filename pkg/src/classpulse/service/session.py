"""Session shell: live ingestion with a write-ahead log, deterministic replay
with playback controls, instructor commands, and snapshotting.

One session has one writer: events, ticks, and commands are applied in order
on a single path, and every state change fans out as stream messages. Because
all scheduling (topic re-clustering, suggestion cadence, temporal alerts) runs
on session time, replaying a log at any speed reproduces identical outputs.
"""
from __future__ import annotations

import json
import math
import os
import threading
import uuid
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

from ..events import (
    ChatPayload,
    ClockMode,
    EventKind,
    EventRecord,
    LogValidator,
    MessageCategory,
    SessionClock,
    parse_event_log,
    serialize_event,
)
from ..gateway import GatewayConfig, GatewayError, LLMGateway
from ..metrics import MetricsEngine, SnapshotFrame
from ..notifications import (
    AlertMode,
    ChartKind,
    NotificationCenter,
    Status,
    TrackerAttribute,
)
from ..suggestions import (
    AreaSelect,
    DetailRowExpand,
    InteractionContext,
    PointClick,
    SuggestionEngine,
    ViewLevel,
    suggest_from_interaction,
)
from ..topics import TopicPipeline
from . import wire
from .wire import StreamMessage


class SessionNotLive(RuntimeError):
    pass


class SeekOutOfRange(ValueError):
    pass


class UnknownSession(KeyError):
    pass


@dataclass(frozen=True)
class Exercise:
    title: str
    prompt: str
    tests_total: int

    def to_json(self) -> dict:
        return {"title": self.title, "prompt": self.prompt, "tests_total": self.tests_total}

    @classmethod
    def from_json(cls, obj: dict) -> "Exercise":
        return cls(obj["title"], obj["prompt"], int(obj["tests_total"]))


@dataclass(frozen=True)
class SessionDescriptor:
    session_id: str
    exercise: Exercise
    mode: str  # "live" | "replay"
    created_at: str = ""
    log_path: Optional[str] = None

    def to_json(self) -> dict:
        return {
            "session_id": self.session_id,
            "exercise": self.exercise.to_json(),
            "mode": self.mode,
            "created_at": self.created_at,
            "log_path": self.log_path,
        }


class Session:
    """Deterministic core of one session; all mutation flows through here."""

    def __init__(
        self,
        descriptor: SessionDescriptor,
        gateway: Optional[LLMGateway] = None,
        seed: int = 0,
        wal_path: Optional[Path] = None,
        on_message: Optional[Callable[[StreamMessage], None]] = None,
    ):
        self.descriptor = descriptor
        self.gateway = gateway or LLMGateway(GatewayConfig(backend="stub", seed=seed))
        self.clock = SessionClock(
            mode=ClockMode.LIVE if descriptor.mode == "live" else ClockMode.REPLAY
        )
        self.engine = MetricsEngine()
        # initial empty frame: previews and interactions are answerable at t=0,
        # before any event has been applied (not emitted on the stream)
        self.engine.tick(0.0)
        self.validator = LogValidator()
        self.topics = TopicPipeline(self.gateway, seed=seed)
        self.center = NotificationCenter()
        self.suggestions = SuggestionEngine(
            self.gateway, problem=descriptor.exercise.prompt
        )
        self.view = ViewLevel.GROUP_VIEW
        self.transcript: list[StreamMessage] = []
        self.on_message = on_message
        self.events_applied = 0
        #: (time_s, student_id) of messages tagged as a fallback, for re-tagging
        self.untagged: list[tuple[float, str]] = []
        self._interaction_counter = 0
        self._match_lists: dict[str, list[str]] = {}
        self._wal_path = wal_path
        self._wal_file = None
        if wal_path is not None:
            wal_path.parent.mkdir(parents=True, exist_ok=True)
            self._wal_file = open(wal_path, "a", encoding="utf-8")

    # -- emission --------------------------------------------------------------

    def _emit(self, message: StreamMessage) -> None:
        self.transcript.append(message)
        if self.on_message is not None:
            self.on_message(message)

    def _emit_frame(self, frame: SnapshotFrame) -> None:
        self._emit(wire.frame_delta_message(frame))
        for event in self.center.evaluate(frame):
            self._emit(wire.trigger_message(event))
        for alert_id in sorted(self.center.alerts):
            alert = self.center.alerts[alert_id]
            if alert.status is not Status.ACTIVE:
                continue
            if self._match_lists.get(alert_id) != alert.match_list:
                self._match_lists[alert_id] = list(alert.match_list)
                self._emit(wire.notification_change_message(alert))

    # -- time & application ------------------------------------------------------

    def advance_to(self, to_s: float) -> None:
        """Fire 1 Hz tick frames and scheduled jobs up to ``to_s`` inclusive."""
        if to_s < self.clock.now_s:
            raise SeekOutOfRange(f"cannot advance backwards to {to_s}")
        tick = math.floor(self.clock.now_s) + 1.0
        while tick <= to_s:
            self.clock.advance(tick)
            frame = self.engine.tick(tick)
            self._emit_frame(frame)
            self._run_schedulers(tick)
            tick += 1.0
        self.clock.advance(to_s)

    def apply_event(self, event: EventRecord) -> None:
        """Advance to the event's time, then apply it (ticks fire first)."""
        self.advance_to(event.time_s)
        event = self._tag_if_needed(event)
        frame = self.engine.apply_event(event)
        self.events_applied += 1
        self._emit_frame(frame)
        self._run_schedulers(event.time_s)

    def _tag_if_needed(self, event: EventRecord) -> EventRecord:
        if event.kind is not EventKind.CHAT_MESSAGE:
            return event
        payload = event.payload
        assert isinstance(payload, ChatPayload)
        if payload.category is not None:
            return event
        try:
            category = self.gateway.tag_message(payload.text)
        except GatewayError:
            # degrade to the off-topic weight and remember the message for
            # re-tagging; activity math stays total
            category = MessageCategory.NOT_CLASS_RELATED
            self.untagged.append((event.time_s, payload.student_id))
        return EventRecord(
            kind=event.kind,
            time_s=event.time_s,
            payload=ChatPayload(
                payload.student_id, payload.group_id, payload.text, category
            ),
        )

    def _run_schedulers(self, now_s: float) -> None:
        frame = self.engine.current_frame
        if frame is None:
            return
        if self.topics.due(now_s):
            assignments = self.topics.recluster(frame)
            if assignments:
                topic_frame = self.engine.apply_topics(assignments, now_s)
                registry = self.topics.registry
                self._emit(
                    wire.registry_message(
                        {tid: rec.summary for tid, rec in registry.topics.items()},
                        registry.ordered_ids(),
                        dict(sorted(self.topics.assignments.items())),
                    )
                )
                self._emit_frame(topic_frame)
        if self.suggestions.due(now_s):
            drafts = self.suggestions.tick(
                now_s, self.engine.current_frame, self.topics.registry, self.view
            )
            for draft in drafts:
                self._register_draft(draft)

    def _register_draft(self, draft) -> None:
        if draft.kind == "Alert":
            self.center.add_alert(
                draft.criteria,
                draft.mode,
                draft.threshold,
                draft.reason,
                status=Status.SUGGESTED,
                alert_id=draft.draft_id,
            )
        else:
            self.center.add_tracker(
                draft.tracker_attribute,
                chart=draft.chart or ChartKind.BAR,
                reason=draft.reason,
                status=Status.SUGGESTED,
                tracker_id=draft.draft_id,
            )
        self._emit(wire.suggestion_message(draft))

    # -- live ingestion ----------------------------------------------------------

    def ingest(self, event: EventRecord) -> dict:
        """Validate, append to the write-ahead log, then apply. The log write
        precedes application so a crash replays to the identical state."""
        if self.clock.mode is not ClockMode.LIVE:
            raise SessionNotLive(self.descriptor.session_id)
        self.validator.validate(event, line_no=self.events_applied + 1)
        if self._wal_file is not None:
            self._wal_file.write(serialize_event(event) + "\n")
            self._wal_file.flush()
            os.fsync(self._wal_file.fileno())
        self.apply_event(event)
        return {"ok": True, "time_s": event.time_s, "events_applied": self.events_applied}

    def close(self) -> None:
        if self._wal_file is not None:
            self._wal_file.close()
            self._wal_file = None

    # -- commands -----------------------------------------------------------------

    def command(self, cmd: dict) -> dict:
        kind = cmd.get("type")
        if kind == "create_alert":
            alert = self.center.add_alert(
                wire.criteria_from_json(cmd["criteria"]),
                AlertMode(cmd.get("mode", "Spatial")),
                float(cmd.get("threshold", 0)),
                cmd.get("reason", "Manually created"),
            )
            self._emit(wire.notification_change_message(alert))
            return {"id": alert.id}
        if kind == "create_tracker":
            tracker = self.center.add_tracker(
                TrackerAttribute(cmd["attribute"]),
                chart=ChartKind(cmd.get("chart", "Bar")),
                reason=cmd.get("reason", "Manually created"),
            )
            self._emit(wire.notification_change_message(tracker))
            return {"id": tracker.id}
        if kind == "edit_alert":
            alert = self.center.edit_alert(
                cmd["id"],
                criteria=wire.criteria_from_json(cmd["criteria"]) if "criteria" in cmd else None,
                mode=AlertMode(cmd["mode"]) if "mode" in cmd else None,
                threshold=float(cmd["threshold"]) if "threshold" in cmd else None,
            )
            self._emit(wire.notification_change_message(alert))
            return {"id": alert.id}
        if kind == "activate":
            self.center.activate(cmd["id"])
            self._emit(wire.notification_change_message(self.center._get(cmd["id"])))
            return {"id": cmd["id"], "status": "Active"}
        if kind == "dismiss":
            self.center.dismiss(cmd["id"])
            self._emit(wire.notification_change_message(self.center._get(cmd["id"])))
            return {"id": cmd["id"], "status": "Dismissed"}
        if kind == "set_chart":
            tracker = self.center.trackers.get(cmd["id"])
            if tracker is None:
                raise KeyError(cmd["id"])
            tracker.chart = ChartKind(cmd["chart"])
            self._emit(wire.notification_change_message(tracker))
            return {"id": tracker.id, "chart": tracker.chart.value}
        if kind == "set_view":
            self.view = ViewLevel(cmd["view"])
            return {"view": self.view.value}
        if kind == "preview":
            from ..notifications import preview

            frame = self.engine.current_frame
            criteria = wire.criteria_from_json(cmd["criteria"])
            return {"matches": preview(criteria, frame) if frame else []}
        if kind == "interaction":
            return self._handle_interaction(cmd)
        if kind == "advance":
            self.advance_to(float(cmd["to_s"]))
            return {"now_s": self.clock.now_s}
        raise ValueError(f"unknown command type {kind!r}")

    def _handle_interaction(self, cmd: dict) -> dict:
        gesture_obj = cmd["gesture"]
        gkind = gesture_obj["kind"]
        if gkind == "AreaSelect":
            gesture = AreaSelect(
                tuple(gesture_obj["x_range"]), tuple(gesture_obj["y_range"])
            )
        elif gkind == "PointClick":
            gesture = PointClick(gesture_obj["entity_id"])
        else:
            gesture = DetailRowExpand(gesture_obj["attribute_value"])
        view = ViewLevel(cmd.get("view", self.view.value))
        self.view = view
        self._interaction_counter += 1
        draft = suggest_from_interaction(
            InteractionContext(view, gesture),
            self.engine.current_frame,
            draft_id=f"idraft-{self._interaction_counter}",
            topic_order=self.topics.registry.ordered_ids() or None,
        )
        self._register_draft(draft)
        return {"draft_id": draft.draft_id}

    # -- snapshot -------------------------------------------------------------------

    def snapshot(self) -> dict:
        """Consistent cut of metrics, notifications, and topics at the current
        frame boundary (single-writer, so no torn reads)."""
        frame = self.engine.current_frame
        registry = self.topics.registry
        return {
            "session_id": self.descriptor.session_id,
            "time_s": self.clock.now_s,
            "clock": {
                "now_s": self.clock.now_s,
                "speed": self.clock.speed,
                "mode": self.clock.mode.value,
            },
            "view": self.view.value,
            "students": {
                sid: wire.student_state_json(s)
                for sid, s in sorted(frame.students.items())
            }
            if frame
            else {},
            "groups": {
                gid: wire.group_state_json(g) for gid, g in sorted(frame.groups.items())
            }
            if frame
            else {},
            "notifications": [
                wire.notification_json(self.center._get(nid))
                for nid in sorted(list(self.center.alerts) + list(self.center.trackers))
            ],
            "topics": {
                "topics": {tid: rec.summary for tid, rec in registry.topics.items()},
                "order": registry.ordered_ids(),
                "assignments": dict(sorted(self.topics.assignments.items())),
            },
            "events_applied": self.events_applied,
        }


class ReplayDriver:
    """Steps a session through a recorded log. Speed scales only the wall-clock
    pacing applied by the caller; all outputs are functions of session time."""

    def __init__(
        self,
        descriptor: SessionDescriptor,
        events: list[EventRecord],
        gateway: Optional[LLMGateway] = None,
        seed: int = 0,
        speed: float = 1.0,
        duration_s: Optional[float] = None,
        on_message: Optional[Callable[[StreamMessage], None]] = None,
    ):
        self.descriptor = descriptor
        self.events = events
        self.seed = seed
        self.speed = speed
        self.gateway = gateway
        self.duration_s = duration_s if duration_s is not None else (
            events[-1].time_s if events else 0.0
        )
        self.on_message = on_message
        self.paused = False
        # step/seek/command may be called from a pump task and request
        # handlers concurrently; one lock serializes them per driver
        self._lock = threading.RLock()
        self.session = self._fresh_session(emit=True)
        self._idx = 0

    def _fresh_session(self, emit: bool) -> Session:
        session = Session(
            self.descriptor,
            gateway=self.gateway
            or LLMGateway(GatewayConfig(backend="stub", seed=self.seed)),
            seed=self.seed,
            on_message=self._forward if emit else None,
        )
        session.clock.mode = ClockMode.REPLAY
        session.clock.speed = self.speed
        return session

    def _forward(self, message: StreamMessage) -> None:
        if self.on_message is not None:
            self.on_message(message)

    @property
    def now_s(self) -> float:
        return self.session.clock.now_s

    @property
    def finished(self) -> bool:
        return self._idx >= len(self.events) and self.now_s >= self.duration_s

    def step(self) -> Optional[float]:
        """Process the next timeline point (one event, or up to one second of
        ticks). Returns the new session time, or None when the log is done."""
        with self._lock:
            if self.finished:
                return None
            next_tick = math.floor(self.now_s) + 1.0
            if self._idx < len(self.events) and self.events[self._idx].time_s <= min(
                next_tick, self.duration_s
            ):
                event = self.events[self._idx]
                self._idx += 1
                self.session.apply_event(event)
                return event.time_s
            target = min(next_tick, self.duration_s)
            if target <= self.now_s:
                return None
            self.session.advance_to(target)
            return target

    def run_to_completion(self) -> Session:
        while self.step() is not None:
            pass
        return self.session

    # -- playback controls -------------------------------------------------------

    def play(self) -> None:
        self.paused = False
        self.session.clock.mode = ClockMode.REPLAY
        self._emit_clock()

    def pause(self) -> None:
        self.paused = True
        self.session.clock.mode = ClockMode.PAUSED
        self._emit_clock()

    def set_speed(self, multiplier: float) -> None:
        if multiplier <= 0:
            raise ValueError("speed must be positive")
        self.speed = multiplier
        self.session.clock.speed = multiplier
        self._emit_clock()

    def seek(self, to_s: float) -> None:
        """Rebuild state from time zero up to ``to_s`` (no incremental rewind);
        stream subscribers should re-snapshot afterwards."""
        if to_s < 0 or to_s > self.duration_s:
            raise SeekOutOfRange(f"seek target {to_s} outside [0, {self.duration_s}]")
        with self._lock:
            was_paused = self.paused
            self.session.close()
            self.session = self._fresh_session(emit=False)
            self._idx = 0
            while self._idx < len(self.events) and self.events[self._idx].time_s <= to_s:
                self.session.apply_event(self.events[self._idx])
                self._idx += 1
            self.session.advance_to(to_s)
            self.session.on_message = self._forward
            self.paused = was_paused
            self._emit_clock()

    def _emit_clock(self) -> None:
        message = wire.clock_message(
            self.now_s, self.speed, self.session.clock.mode.value
        )
        self.session.transcript.append(message)
        self._forward(message)

    def command(self, cmd: dict) -> dict:
        kind = cmd.get("command")
        with self._lock:
            if kind == "Play":
                self.play()
            elif kind == "Pause":
                self.pause()
            elif kind == "Seek":
                self.seek(float(cmd["time_s"]))
            elif kind == "SetSpeed":
                self.set_speed(float(cmd["multiplier"]))
            else:
                raise ValueError(f"unknown playback command {kind!r}")
            return {"now_s": self.now_s, "speed": self.speed, "paused": self.paused}


def transcript_lines(session: Session) -> list[str]:
    return [wire.encode_message(m) for m in session.transcript]


class SessionManager:
    """Creates, recovers, and indexes sessions. Live sessions persist their
    descriptor and event log under ``data_dir`` for crash recovery."""

    def __init__(
        self,
        data_dir: Optional[Path] = None,
        gateway_config: Optional[GatewayConfig] = None,
    ):
        self.data_dir = Path(data_dir) if data_dir else None
        self.gateway_config = gateway_config or GatewayConfig.from_env()
        self.sessions: dict[str, Session] = {}
        self.replays: dict[str, ReplayDriver] = {}
        self._lock = threading.Lock()

    def _gateway(self, seed: int) -> LLMGateway:
        cfg = GatewayConfig(**{**self.gateway_config.__dict__})
        if cfg.backend == "stub":
            cfg.seed = seed
        return LLMGateway(cfg)

    def create_live(
        self,
        exercise: Exercise,
        session_id: Optional[str] = None,
        seed: int = 0,
        created_at: str = "",
    ) -> Session:
        session_id = session_id or f"sess-{uuid.uuid4().hex[:8]}"
        wal_path = None
        descriptor = SessionDescriptor(
            session_id=session_id, exercise=exercise, mode="live", created_at=created_at
        )
        if self.data_dir is not None:
            self.data_dir.mkdir(parents=True, exist_ok=True)
            wal_path = self.data_dir / f"{session_id}.log"
            meta = dict(descriptor.to_json(), seed=seed)
            meta_path = self.data_dir / f"{session_id}.json"
            with open(meta_path, "w", encoding="utf-8") as fh:
                json.dump(meta, fh)
                fh.flush()
                os.fsync(fh.fileno())
        session = Session(
            descriptor, gateway=self._gateway(seed), seed=seed, wal_path=wal_path
        )
        with self._lock:
            self.sessions[session_id] = session
        return session

    def recover(self) -> list[str]:
        """Rebuild every persisted live session by replaying its event log."""
        if self.data_dir is None or not self.data_dir.exists():
            return []
        recovered = []
        for meta_path in sorted(self.data_dir.glob("*.json")):
            meta = json.loads(meta_path.read_text(encoding="utf-8"))
            session_id = meta["session_id"]
            seed = int(meta.get("seed", 0))
            descriptor = SessionDescriptor(
                session_id=session_id,
                exercise=Exercise.from_json(meta["exercise"]),
                mode="live",
                created_at=meta.get("created_at", ""),
            )
            wal_path = self.data_dir / f"{session_id}.log"
            session = Session(descriptor, gateway=self._gateway(seed), seed=seed)
            if wal_path.exists():
                events = parse_event_log(
                    wal_path.read_text(encoding="utf-8").splitlines()
                )
                for event in events:
                    session.validator.validate(event)
                    session.apply_event(event)
                session.events_applied = len(events)
            # reopen the log for future appends
            session._wal_path = wal_path
            session._wal_file = open(wal_path, "a", encoding="utf-8")
            with self._lock:
                self.sessions[session_id] = session
            recovered.append(session_id)
        return recovered

    def open_replay(
        self,
        log_path: Path,
        exercise: Optional[Exercise] = None,
        session_id: Optional[str] = None,
        seed: int = 0,
        speed: float = 1.0,
        duration_s: Optional[float] = None,
    ) -> ReplayDriver:
        events = parse_event_log(Path(log_path).read_text(encoding="utf-8").splitlines())
        session_id = session_id or f"replay-{uuid.uuid4().hex[:8]}"
        descriptor = SessionDescriptor(
            session_id=session_id,
            exercise=exercise
            or Exercise("recorded session", "count values under 100 in a list", 4),
            mode="replay",
            log_path=str(log_path),
        )
        driver = ReplayDriver(
            descriptor,
            events,
            gateway=self._gateway(seed),
            seed=seed,
            speed=speed,
            duration_s=duration_s,
        )
        with self._lock:
            self.replays[session_id] = driver
            self.sessions[session_id] = driver.session
        return driver

    def get(self, session_id: str) -> Session:
        driver = self.replays.get(session_id)
        if driver is not None:
            return driver.session
        session = self.sessions.get(session_id)
        if session is None:
            raise UnknownSession(session_id)
        return session

    def get_replay(self, session_id: str) -> Optional[ReplayDriver]:
        return self.replays.get(session_id)
