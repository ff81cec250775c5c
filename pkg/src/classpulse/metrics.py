"""Per-student and per-group metric state, maintained incrementally from events.

The engine applies events in time order and emits an immutable
:class:`SnapshotFrame` after each one (plus empty frames on clock ticks, so
time passes for temporal alerts even when nothing happens). Frames carry a
``change_set`` of exactly the metric fields that differ from the previous
frame, which is what drives flash animations downstream.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

from .events import (
    ChatPayload,
    CodeIssue,
    EventKind,
    EventRecord,
    MessageCategory,
    RosterPayload,
    SubmissionPayload,
)

#: Topic assigned to a group before any of its members has sent a message.
NO_CONVERSATION = "No Conversation"

#: Upper bound of the activity-level scale.
ACTIVITY_CAP = 12.0

#: Fields that participate in change_set tracking, per entity kind.
STUDENT_FIELDS = ("pass_rate", "activity_level", "last_code_issue")
GROUP_FIELDS = ("group_pass_rate", "team_activity", "members_participated", "topic_id")


class OutOfOrderEvent(ValueError):
    def __init__(self, time_s: float, last_s: float):
        super().__init__(f"event at {time_s}s precedes engine time {last_s}s")
        self.time_s = time_s


class UnknownEntity(KeyError):
    pass


def message_weight(category: MessageCategory) -> float:
    """Activity contribution of one tagged message: 1.0 for the five
    class-related categories, 0.3 for off-topic chatter."""
    if category is MessageCategory.NOT_CLASS_RELATED:
        return 0.3
    return 1.0


def arrow_thickness(activity_level: float) -> float:
    """Edge width for communication arrows: min(A * 0.25, 2) + 1, in [1, 3]."""
    if activity_level < 0:
        raise ValueError("activity_level must be >= 0")
    return min(activity_level * 0.25, 2.0) + 1.0


@dataclass(frozen=True)
class MessageRecord:
    """One chat message with the sender/group metrics captured *before* the
    message itself was counted (the "at that time" values used in payloads)."""

    time_s: float
    text: str
    category: MessageCategory
    sender_activity: float
    sender_pass_rate: float
    group_activity: float
    group_pass_rate: float
    topic_id: str


@dataclass(frozen=True)
class SubmissionRecord:
    time_s: float
    tests_passed: int
    tests_total: int
    error_type: CodeIssue
    error_message: str
    pass_rate: float
    group_pass_rate_after: float


@dataclass(frozen=True)
class StudentState:
    student_id: str
    group_id: str
    pass_rate: float = 0.0
    activity_level: float = 0.0
    last_code_issue: Optional[CodeIssue] = None
    message_log: tuple[MessageRecord, ...] = ()
    submission_log: tuple[SubmissionRecord, ...] = ()


@dataclass(frozen=True)
class GroupState:
    group_id: str
    member_ids: tuple[str, ...]
    group_pass_rate: float = 0.0
    team_activity: float = 0.0
    participated_ids: frozenset[str] = frozenset()
    topic_id: str = NO_CONVERSATION

    @property
    def members_participated(self) -> int:
        return len(self.participated_ids)


def members_participated(group: GroupState) -> int:
    """Distinct members who have sent at least one chat message (any category)."""
    return group.members_participated


@dataclass(frozen=True)
class SnapshotFrame:
    """Immutable view of every entity's metrics at one session time."""

    time_s: float
    students: dict[str, StudentState]
    groups: dict[str, GroupState]
    change_set: tuple[tuple[str, str], ...]


def _diff_entity(entity_id: str, old, new, fields: Sequence[str]) -> list[tuple[str, str]]:
    if old is None:
        return [(entity_id, f) for f in fields]
    return [(entity_id, f) for f in fields if getattr(old, f) != getattr(new, f)]


class MetricsEngine:
    """Single-writer metric state. Emitted frames are immutable and may be
    shared freely; the engine itself must only be driven from one thread."""

    def __init__(self) -> None:
        self.students: dict[str, StudentState] = {}
        self.groups: dict[str, GroupState] = {}
        self.frames: list[SnapshotFrame] = []
        self.now_s: float = 0.0

    @property
    def current_frame(self) -> Optional[SnapshotFrame]:
        return self.frames[-1] if self.frames else None

    def _emit(self, time_s: float, changes: list[tuple[str, str]]) -> SnapshotFrame:
        frame = SnapshotFrame(
            time_s=time_s,
            students=dict(self.students),
            groups=dict(self.groups),
            change_set=tuple(changes),
        )
        self.frames.append(frame)
        self.now_s = time_s
        return frame

    def _group_aggregates(self, group: GroupState) -> tuple[float, float]:
        rates = [self.students[m].pass_rate for m in group.member_ids]
        acts = [self.students[m].activity_level for m in group.member_ids]
        return sum(rates) / len(rates), sum(acts) / len(acts)

    def apply_event(self, event: EventRecord) -> SnapshotFrame:
        """Apply one validated event and emit the resulting frame.

        Raises OutOfOrderEvent if the event's time precedes the engine clock.
        """
        if event.time_s < self.now_s:
            raise OutOfOrderEvent(event.time_s, self.now_s)
        changes: list[tuple[str, str]] = []
        if event.kind is EventKind.ROSTER:
            assert isinstance(event.payload, RosterPayload)
            changes = self._apply_roster(event.payload)
        elif event.kind is EventKind.SUBMISSION:
            assert isinstance(event.payload, SubmissionPayload)
            changes = self._apply_submission(event.time_s, event.payload)
        elif event.kind is EventKind.CHAT_MESSAGE:
            assert isinstance(event.payload, ChatPayload)
            changes = self._apply_chat(event.time_s, event.payload)
        return self._emit(event.time_s, changes)

    def tick(self, time_s: float) -> SnapshotFrame:
        """Emit an empty-delta frame so session time advances without events."""
        if time_s < self.now_s:
            raise OutOfOrderEvent(time_s, self.now_s)
        return self._emit(time_s, [])

    def apply_topics(self, assignments: dict[str, str], time_s: float) -> SnapshotFrame:
        """Install new topic assignments (group_id -> topic ref) as a frame."""
        if time_s < self.now_s:
            raise OutOfOrderEvent(time_s, self.now_s)
        changes: list[tuple[str, str]] = []
        for gid in sorted(assignments):
            topic = assignments[gid]
            old = self.groups.get(gid)
            if old is None:
                raise UnknownEntity(gid)
            if old.topic_id != topic:
                self.groups[gid] = replace(old, topic_id=topic)
                changes.append((gid, "topic_id"))
        return self._emit(time_s, changes)

    def _apply_roster(self, payload: RosterPayload) -> list[tuple[str, str]]:
        changes: list[tuple[str, str]] = []
        for rg in payload.groups:
            for sid in rg.member_ids:
                old = self.students.get(sid)
                if old is None:
                    state = StudentState(student_id=sid, group_id=rg.group_id)
                    self.students[sid] = state
                    changes.extend(_diff_entity(sid, None, state, STUDENT_FIELDS))
                elif old.group_id != rg.group_id:
                    self.students[sid] = replace(old, group_id=rg.group_id)
            old_group = self.groups.get(rg.group_id)
            group = GroupState(group_id=rg.group_id, member_ids=rg.member_ids)
            if old_group is not None:
                group = replace(
                    old_group,
                    member_ids=rg.member_ids,
                    participated_ids=old_group.participated_ids & set(rg.member_ids),
                )
            rate, act = self._group_aggregates(group)
            group = replace(group, group_pass_rate=rate, team_activity=act)
            self.groups[rg.group_id] = group
            changes.extend(_diff_entity(rg.group_id, old_group, group, GROUP_FIELDS))
        return changes

    def _apply_submission(self, time_s: float, p: SubmissionPayload) -> list[tuple[str, str]]:
        old = self.students.get(p.student_id)
        if old is None:
            raise UnknownEntity(p.student_id)
        new_rate = p.pass_rate
        # Group aggregate must be recomputed before the record is frozen: the
        # record stores the group's rate *after* this submission.
        interim = replace(old, pass_rate=new_rate, last_code_issue=p.error_type)
        self.students[p.student_id] = interim
        old_group = self.groups[old.group_id]
        g_rate, g_act = self._group_aggregates(old_group)
        record = SubmissionRecord(
            time_s=time_s,
            tests_passed=p.tests_passed,
            tests_total=p.tests_total,
            error_type=p.error_type,
            error_message=p.error_message,
            pass_rate=new_rate,
            group_pass_rate_after=g_rate,
        )
        new = replace(interim, submission_log=old.submission_log + (record,))
        self.students[p.student_id] = new
        new_group = replace(old_group, group_pass_rate=g_rate, team_activity=g_act)
        self.groups[old.group_id] = new_group
        changes = _diff_entity(p.student_id, old, new, STUDENT_FIELDS)
        changes.extend(_diff_entity(old.group_id, old_group, new_group, GROUP_FIELDS))
        return changes

    def _apply_chat(self, time_s: float, p: ChatPayload) -> list[tuple[str, str]]:
        old = self.students.get(p.student_id)
        if old is None:
            raise UnknownEntity(p.student_id)
        if p.category is None:
            raise ValueError("chat events must be tagged before application")
        old_group = self.groups[p.group_id]
        record = MessageRecord(
            time_s=time_s,
            text=p.text,
            category=p.category,
            sender_activity=old.activity_level,
            sender_pass_rate=old.pass_rate,
            group_activity=old_group.team_activity,
            group_pass_rate=old_group.group_pass_rate,
            topic_id=old_group.topic_id,
        )
        new_level = min(ACTIVITY_CAP, old.activity_level + message_weight(p.category))
        new = replace(
            old, activity_level=new_level, message_log=old.message_log + (record,)
        )
        self.students[p.student_id] = new
        g_rate, g_act = self._group_aggregates(old_group)
        new_group = replace(
            old_group,
            group_pass_rate=g_rate,
            team_activity=g_act,
            participated_ids=old_group.participated_ids | {p.student_id},
        )
        self.groups[p.group_id] = new_group
        changes = _diff_entity(p.student_id, old, new, STUDENT_FIELDS)
        changes.extend(_diff_entity(p.group_id, old_group, new_group, GROUP_FIELDS))
        return changes


def entity_xy(frame: SnapshotFrame, entity_id: str) -> tuple[float, float]:
    """(pass metric, activity metric) for a student or group in a frame."""
    if entity_id in frame.students:
        s = frame.students[entity_id]
        return (s.pass_rate, s.activity_level)
    if entity_id in frame.groups:
        g = frame.groups[entity_id]
        return (g.group_pass_rate, g.team_activity)
    raise UnknownEntity(entity_id)


def trace_history(
    entity_id: str, frames: Sequence[SnapshotFrame], horizon_s: float
) -> list[tuple[float, float, float]]:
    """Change-only (time, x, y) samples for an entity over the trailing horizon.

    The first in-horizon frame where the entity exists contributes a point;
    later frames only when (x, y) moved. ``horizon_s = 0`` therefore yields
    just the current point.
    """
    if not frames:
        return []
    latest = frames[-1]
    if entity_id not in latest.students and entity_id not in latest.groups:
        raise UnknownEntity(entity_id)
    cutoff = latest.time_s - horizon_s
    points: list[tuple[float, float, float]] = []
    for frame in frames:
        if frame.time_s < cutoff:
            continue
        if entity_id not in frame.students and entity_id not in frame.groups:
            continue  # before the entity was rostered
        x, y = entity_xy(frame, entity_id)
        if not points or (points[-1][1], points[-1][2]) != (x, y):
            points.append((frame.time_s, x, y))
    return points


def lowest_passrate_groups(frame: SnapshotFrame, cap: int = 8) -> list[str]:
    """Group ids ascending by pass rate (ties by id), truncated to ``cap``."""
    if cap < 1:
        raise ValueError("cap must be >= 1")
    ordered = sorted(frame.groups.values(), key=lambda g: (g.group_pass_rate, g.group_id))
    return [g.group_id for g in ordered[:cap]]
