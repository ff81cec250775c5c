"""Trackers and alerts over snapshot frames.

Alerts are threshold state machines: spatial alerts edge-trigger when the
count of matching entities rises above n (re-arming once it falls back), and
temporal alerts give every entity an alarm clock that measures its current
contiguous in-criteria episode and fires once per episode when that duration
strictly exceeds t. All evaluation is per-frame and deterministic, so replays
reproduce trigger logs byte for byte.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

from .events import CodeIssue
from .metrics import GroupState, SnapshotFrame, StudentState


class Scope(str, Enum):
    GROUP = "Group"
    INDIVIDUAL = "Individual"


class NumericAttribute(str, Enum):
    PASS_RATE = "PassRate"
    ACTIVITY_LEVEL = "ActivityLevel"
    TEAM_STRUCTURE = "TeamStructure"


class CategoricalAttribute(str, Enum):
    CODE_ISSUE = "CodeIssue"
    CONVERSATION_TOPIC = "ConversationTopic"


#: Valid [lo, hi] domains per numeric attribute.
NUMERIC_DOMAINS = {
    NumericAttribute.PASS_RATE: (0.0, 100.0),
    NumericAttribute.ACTIVITY_LEVEL: (0.0, 12.0),
    NumericAttribute.TEAM_STRUCTURE: (0.0, 3.0),
}

_GROUP_ONLY = {NumericAttribute.TEAM_STRUCTURE, CategoricalAttribute.CONVERSATION_TOPIC}
_INDIVIDUAL_ONLY = {CategoricalAttribute.CODE_ISSUE}


class ScopeMismatch(ValueError):
    pass


class InvalidTransition(ValueError):
    pass


class UnknownNotification(KeyError):
    pass


@dataclass(frozen=True)
class Criteria:
    """Conjunction of inclusive numeric ranges and categorical value sets.
    Absent attributes are unconstrained; empty criteria match everything."""

    scope: Scope
    numeric_ranges: dict[NumericAttribute, tuple[float, float]] = field(default_factory=dict)
    categorical_sets: dict[CategoricalAttribute, frozenset[str]] = field(default_factory=dict)

    def validate(self) -> "Criteria":
        for attr, (lo, hi) in self.numeric_ranges.items():
            if lo > hi:
                raise ValueError(f"{attr.value}: lo {lo} > hi {hi}")
            dlo, dhi = NUMERIC_DOMAINS[attr]
            if lo < dlo or hi > dhi:
                raise ValueError(f"{attr.value}: [{lo}, {hi}] outside [{dlo}, {dhi}]")
            if attr in _GROUP_ONLY and self.scope is not Scope.GROUP:
                raise ScopeMismatch(f"{attr.value} requires Group scope")
        for attr in self.categorical_sets:
            if attr in _GROUP_ONLY and self.scope is not Scope.GROUP:
                raise ScopeMismatch(f"{attr.value} requires Group scope")
            if attr in _INDIVIDUAL_ONLY and self.scope is not Scope.INDIVIDUAL:
                raise ScopeMismatch(f"{attr.value} requires Individual scope")
        return self


def _numeric_value(entity: Union[StudentState, GroupState], attr: NumericAttribute) -> float:
    if isinstance(entity, StudentState):
        if attr is NumericAttribute.PASS_RATE:
            return entity.pass_rate
        if attr is NumericAttribute.ACTIVITY_LEVEL:
            return entity.activity_level
        raise ScopeMismatch(f"{attr.value} not defined for students")
    if attr is NumericAttribute.PASS_RATE:
        return entity.group_pass_rate
    if attr is NumericAttribute.ACTIVITY_LEVEL:
        return entity.team_activity
    return float(entity.members_participated)


def _categorical_value(entity: Union[StudentState, GroupState], attr: CategoricalAttribute) -> Optional[str]:
    if isinstance(entity, StudentState):
        if attr is CategoricalAttribute.CODE_ISSUE:
            return entity.last_code_issue.value if entity.last_code_issue else None
        raise ScopeMismatch(f"{attr.value} not defined for students")
    if attr is CategoricalAttribute.CONVERSATION_TOPIC:
        return entity.topic_id
    raise ScopeMismatch(f"{attr.value} not defined for groups")


def matches(criteria: Criteria, entity: Union[StudentState, GroupState]) -> bool:
    """True when the entity satisfies every present constraint."""
    if isinstance(entity, StudentState) and criteria.scope is not Scope.INDIVIDUAL:
        raise ScopeMismatch("group criteria applied to a student")
    if isinstance(entity, GroupState) and criteria.scope is not Scope.GROUP:
        raise ScopeMismatch("individual criteria applied to a group")
    for attr, (lo, hi) in criteria.numeric_ranges.items():
        value = _numeric_value(entity, attr)
        if not (lo <= value <= hi):
            return False
    for attr, allowed in criteria.categorical_sets.items():
        value = _categorical_value(entity, attr)
        if value is None or value not in allowed:
            return False
    return True


def _scope_entities(criteria: Criteria, frame: SnapshotFrame) -> dict[str, Union[StudentState, GroupState]]:
    return frame.students if criteria.scope is Scope.INDIVIDUAL else frame.groups


def preview(criteria: Criteria, frame: SnapshotFrame) -> list[str]:
    """Ids currently satisfying the criteria; pure, mutates nothing."""
    entities = _scope_entities(criteria, frame)
    return [eid for eid in sorted(entities) if matches(criteria, entities[eid])]


class AlertMode(str, Enum):
    SPATIAL = "Spatial"
    TEMPORAL = "Temporal"


class Status(str, Enum):
    SUGGESTED = "Suggested"
    ACTIVE = "Active"
    DISMISSED = "Dismissed"


class TriggerKind(str, Enum):
    SPATIAL_THRESHOLD_CROSSED = "SpatialThresholdCrossed"
    TEMPORAL_TIMER_EXPIRED = "TemporalTimerExpired"


@dataclass(frozen=True)
class TriggerEvent:
    notification_id: str
    time_s: float
    entered: tuple[str, ...]
    kind: TriggerKind

    def to_json(self) -> dict:
        return {
            "notification_id": self.notification_id,
            "time_s": self.time_s,
            "entered": list(self.entered),
            "kind": self.kind.value,
        }


@dataclass
class Alert:
    id: str
    criteria: Criteria
    mode: AlertMode
    threshold: float  # n for Spatial, t seconds for Temporal
    reason: str
    status: Status = Status.SUGGESTED
    match_list: list[str] = field(default_factory=list)
    trigger_log: list[TriggerEvent] = field(default_factory=list)
    # Spatial: re-armed whenever the match count is back at or below n.
    armed: bool = True
    # Temporal: per-entity contiguous episode bookkeeping.
    episode_start: dict[str, float] = field(default_factory=dict)
    reported: set[str] = field(default_factory=set)

    def per_entity_timers(self, now_s: float) -> dict[str, float]:
        if self.mode is not AlertMode.TEMPORAL:
            return {}
        return {eid: now_s - t0 for eid, t0 in self.episode_start.items()}


class TrackerAttribute(str, Enum):
    CODE_ISSUES = "CodeIssues"
    CONVERSATION_TOPICS = "ConversationTopics"
    MEMBERS_PARTICIPATED = "MembersParticipated"


class ChartKind(str, Enum):
    BAR = "Bar"
    LINE = "Line"


@dataclass
class Tracker:
    id: str
    attribute: TrackerAttribute
    chart: ChartKind = ChartKind.BAR
    status: Status = Status.SUGGESTED
    reason: str = ""
    series: list[tuple[float, dict[str, int]]] = field(default_factory=list)

    def latest_counts(self) -> dict[str, int]:
        return self.series[-1][1] if self.series else {}


def tracker_counts(attribute: TrackerAttribute, frame: SnapshotFrame) -> dict[str, int]:
    counts: dict[str, int] = {}
    if attribute is TrackerAttribute.CODE_ISSUES:
        for s in frame.students.values():
            if s.last_code_issue is not None:
                counts[s.last_code_issue.value] = counts.get(s.last_code_issue.value, 0) + 1
    elif attribute is TrackerAttribute.CONVERSATION_TOPICS:
        for g in frame.groups.values():
            counts[g.topic_id] = counts.get(g.topic_id, 0) + 1
    else:
        counts = {str(level): 0 for level in range(4)}
        for g in frame.groups.values():
            counts[str(g.members_participated)] += 1
    return dict(sorted(counts.items()))


def tracker_update(tracker: Tracker, frame: SnapshotFrame) -> Tracker:
    """Append one sample of per-value counts for the tracked attribute."""
    tracker.series.append((frame.time_s, tracker_counts(tracker.attribute, frame)))
    return tracker


def evaluate_spatial(alert: Alert, frame: SnapshotFrame) -> Optional[TriggerEvent]:
    """Update the match list; fire exactly when the count crosses above n."""
    matching = preview(alert.criteria, frame)
    alert.match_list = matching
    n = int(alert.threshold)
    event: Optional[TriggerEvent] = None
    if len(matching) > n:
        if alert.armed:
            event = TriggerEvent(
                notification_id=alert.id,
                time_s=frame.time_s,
                entered=tuple(matching),
                kind=TriggerKind.SPATIAL_THRESHOLD_CROSSED,
            )
            alert.trigger_log.append(event)
            alert.armed = False
    else:
        alert.armed = True
    return event


def evaluate_temporal(alert: Alert, frame: SnapshotFrame) -> Optional[TriggerEvent]:
    """Advance per-entity alarm clocks; fire once per contiguous episode when
    an entity has been in-criteria strictly longer than t seconds."""
    entities = _scope_entities(alert.criteria, frame)
    expired: list[str] = []
    for eid in sorted(entities):
        if matches(alert.criteria, entities[eid]):
            start = alert.episode_start.setdefault(eid, frame.time_s)
            if frame.time_s - start > alert.threshold and eid not in alert.reported:
                alert.reported.add(eid)
                expired.append(eid)
        else:
            alert.episode_start.pop(eid, None)
            alert.reported.discard(eid)
    # Entities that vanished from the frame lose their episodes too.
    for eid in list(alert.episode_start):
        if eid not in entities:
            alert.episode_start.pop(eid)
            alert.reported.discard(eid)
    alert.match_list = sorted(alert.reported)
    if not expired:
        return None
    event = TriggerEvent(
        notification_id=alert.id,
        time_s=frame.time_s,
        entered=tuple(expired),
        kind=TriggerKind.TEMPORAL_TIMER_EXPIRED,
    )
    alert.trigger_log.append(event)
    return event


class NotificationCenter:
    """Holds every tracker/alert for a session and evaluates the active ones
    against each frame, in id order, on the single evaluator path."""

    def __init__(self) -> None:
        self.alerts: dict[str, Alert] = {}
        self.trackers: dict[str, Tracker] = {}
        self._counter = 0

    def _next_id(self, prefix: str) -> str:
        self._counter += 1
        return f"{prefix}-{self._counter}"

    def add_alert(
        self,
        criteria: Criteria,
        mode: AlertMode,
        threshold: float,
        reason: str,
        status: Status = Status.SUGGESTED,
        alert_id: Optional[str] = None,
    ) -> Alert:
        criteria.validate()
        alert = Alert(
            id=alert_id or self._next_id("alert"),
            criteria=criteria,
            mode=mode,
            threshold=threshold,
            reason=reason,
            status=status,
        )
        self.alerts[alert.id] = alert
        return alert

    def add_tracker(
        self,
        attribute: TrackerAttribute,
        chart: ChartKind = ChartKind.BAR,
        reason: str = "",
        status: Status = Status.SUGGESTED,
        tracker_id: Optional[str] = None,
    ) -> Tracker:
        tracker = Tracker(
            id=tracker_id or self._next_id("tracker"),
            attribute=attribute,
            chart=chart,
            reason=reason,
            status=status,
        )
        self.trackers[tracker.id] = tracker
        return tracker

    def _get(self, notification_id: str) -> Union[Alert, Tracker]:
        if notification_id in self.alerts:
            return self.alerts[notification_id]
        if notification_id in self.trackers:
            return self.trackers[notification_id]
        raise UnknownNotification(notification_id)

    def activate(self, notification_id: str) -> None:
        """Suggested -> Active. Timers/match state start fresh; the first
        evaluation happens on the next frame."""
        item = self._get(notification_id)
        if item.status is not Status.SUGGESTED:
            raise InvalidTransition(f"{notification_id} is {item.status.value}")
        item.status = Status.ACTIVE
        if isinstance(item, Alert):
            item.match_list = []
            item.armed = True
            item.episode_start.clear()
            item.reported.clear()

    def dismiss(self, notification_id: str) -> None:
        item = self._get(notification_id)
        if item.status is Status.DISMISSED:
            raise InvalidTransition(f"{notification_id} already dismissed")
        item.status = Status.DISMISSED

    def edit_alert(
        self,
        notification_id: str,
        criteria: Optional[Criteria] = None,
        mode: Optional[AlertMode] = None,
        threshold: Optional[float] = None,
    ) -> Alert:
        alert = self.alerts.get(notification_id)
        if alert is None:
            raise UnknownNotification(notification_id)
        if alert.status is not Status.SUGGESTED:
            raise InvalidTransition("only suggested notifications are editable")
        if criteria is not None:
            alert.criteria = criteria.validate()
        if mode is not None:
            alert.mode = mode
        if threshold is not None:
            alert.threshold = threshold
        return alert

    def evaluate(self, frame: SnapshotFrame) -> list[TriggerEvent]:
        events: list[TriggerEvent] = []
        for alert_id in sorted(self.alerts):
            alert = self.alerts[alert_id]
            if alert.status is not Status.ACTIVE:
                continue
            if alert.mode is AlertMode.SPATIAL:
                event = evaluate_spatial(alert, frame)
            else:
                event = evaluate_temporal(alert, frame)
            if event is not None:
                events.append(event)
        for tracker_id in sorted(self.trackers):
            tracker = self.trackers[tracker_id]
            if tracker.status is Status.ACTIVE:
                tracker_update(tracker, frame)
        return events


def trigger_log_bytes(alerts: list[Alert]) -> bytes:
    """Canonical serialization of all trigger logs, for determinism checks."""
    payload = {
        a.id: [e.to_json() for e in a.trigger_log] for a in sorted(alerts, key=lambda a: a.id)
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
