"""Wire format for the streaming API: one JSON document per message.

Everything on the wire is JSON-native data, so encode/decode round-trips are
exact. FrameDelta messages carry only the change set plus the states of the
entities that changed; late joiners bootstrap from a snapshot instead.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Union

from ..metrics import GroupState, SnapshotFrame, StudentState
from ..notifications import (
    Alert,
    CategoricalAttribute,
    ChartKind,
    Criteria,
    NumericAttribute,
    Scope,
    Tracker,
    TriggerEvent,
)
from ..suggestions import SuggestionDraft


class MessageKind(str, Enum):
    FRAME_DELTA = "FrameDelta"
    TRIGGER_EVENT = "TriggerEvent"
    SUGGESTION_DRAFT = "SuggestionDraft"
    NOTIFICATION_STATE_CHANGE = "NotificationStateChange"
    TOPIC_REGISTRY_UPDATE = "TopicRegistryUpdate"
    CLOCK_UPDATE = "ClockUpdate"


@dataclass(frozen=True)
class StreamMessage:
    kind: MessageKind
    payload: dict


def encode_message(message: StreamMessage) -> str:
    return json.dumps(
        {"kind": message.kind.value, "payload": message.payload},
        sort_keys=True,
        separators=(",", ":"),
    )


def decode_message(raw: str) -> StreamMessage:
    obj = json.loads(raw)
    return StreamMessage(kind=MessageKind(obj["kind"]), payload=obj["payload"])


# ---------------------------------------------------------------------------
# domain -> JSON projections
# ---------------------------------------------------------------------------


def student_state_json(s: StudentState) -> dict:
    return {
        "student_id": s.student_id,
        "group_id": s.group_id,
        "pass_rate": s.pass_rate,
        "activity_level": s.activity_level,
        "last_code_issue": s.last_code_issue.value if s.last_code_issue else None,
    }


def group_state_json(g: GroupState) -> dict:
    return {
        "group_id": g.group_id,
        "member_ids": list(g.member_ids),
        "group_pass_rate": g.group_pass_rate,
        "team_activity": g.team_activity,
        "members_participated": g.members_participated,
        "topic_id": g.topic_id,
    }


def criteria_json(criteria: Criteria) -> dict:
    return {
        "scope": criteria.scope.value,
        "numeric_ranges": {
            attr.value: [lo, hi] for attr, (lo, hi) in sorted(criteria.numeric_ranges.items())
        },
        "categorical_sets": {
            attr.value: sorted(values)
            for attr, values in sorted(criteria.categorical_sets.items())
        },
    }


def criteria_from_json(obj: dict) -> Criteria:
    return Criteria(
        scope=Scope(obj["scope"]),
        numeric_ranges={
            NumericAttribute(attr): (float(lo), float(hi))
            for attr, (lo, hi) in obj.get("numeric_ranges", {}).items()
        },
        categorical_sets={
            CategoricalAttribute(attr): frozenset(values)
            for attr, values in obj.get("categorical_sets", {}).items()
        },
    ).validate()


def notification_json(item: Union[Alert, Tracker]) -> dict:
    if isinstance(item, Alert):
        return {
            "id": item.id,
            "type": "Alert",
            "status": item.status.value,
            "criteria": criteria_json(item.criteria),
            "mode": item.mode.value,
            "threshold": item.threshold,
            "reason": item.reason,
            "match_list": list(item.match_list),
            "match_count": len(item.match_list),
            "trigger_count": len(item.trigger_log),
        }
    return {
        "id": item.id,
        "type": "Tracker",
        "status": item.status.value,
        "attribute": item.attribute.value,
        "chart": item.chart.value,
        "reason": item.reason,
        "series": [[t, counts] for t, counts in item.series],
    }


def draft_json(draft: SuggestionDraft) -> dict:
    payload = {
        "draft_id": draft.draft_id,
        "kind": draft.kind,
        "reason": draft.reason,
        "provenance": draft.provenance.value,
        "created_at_s": draft.created_at_s,
    }
    if draft.criteria is not None:
        payload["criteria"] = criteria_json(draft.criteria)
        payload["mode"] = draft.mode.value
        payload["threshold"] = draft.threshold
    if draft.tracker_attribute is not None:
        payload["attribute"] = draft.tracker_attribute.value
        payload["chart"] = draft.chart.value if draft.chart else ChartKind.BAR.value
    return payload


def frame_delta_message(frame: SnapshotFrame) -> StreamMessage:
    changed_students = sorted({eid for eid, _ in frame.change_set if eid in frame.students})
    changed_groups = sorted({eid for eid, _ in frame.change_set if eid in frame.groups})
    return StreamMessage(
        MessageKind.FRAME_DELTA,
        {
            "time_s": frame.time_s,
            "change_set": [[eid, field] for eid, field in frame.change_set],
            "students": {sid: student_state_json(frame.students[sid]) for sid in changed_students},
            "groups": {gid: group_state_json(frame.groups[gid]) for gid in changed_groups},
        },
    )


def trigger_message(event: TriggerEvent) -> StreamMessage:
    return StreamMessage(MessageKind.TRIGGER_EVENT, event.to_json())


def suggestion_message(draft: SuggestionDraft) -> StreamMessage:
    return StreamMessage(MessageKind.SUGGESTION_DRAFT, draft_json(draft))


def notification_change_message(item: Union[Alert, Tracker]) -> StreamMessage:
    return StreamMessage(MessageKind.NOTIFICATION_STATE_CHANGE, notification_json(item))


def registry_message(topics: dict[str, str], order: list[str], assignments: dict[str, str]) -> StreamMessage:
    return StreamMessage(
        MessageKind.TOPIC_REGISTRY_UPDATE,
        {"topics": topics, "order": order, "assignments": assignments},
    )


def clock_message(now_s: float, speed: float, mode: str) -> StreamMessage:
    return StreamMessage(
        MessageKind.CLOCK_UPDATE, {"now_s": now_s, "speed": speed, "mode": mode}
    )
