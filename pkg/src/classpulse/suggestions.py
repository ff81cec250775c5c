"""Notification suggestions from two sources: instructor interactions with the
views, and a periodic four-step language-model chain over historic activity.

The chain: (1+2) one structured completion identifies per-entity issues and
ranks entities by severity, (3) a second completion summarizes the top five
into one sentence plus the aspects it mentions, (4) local arithmetic turns
those aspects into criteria — min/max ranges for numeric attributes, value
unions for categorical ones. Chain failures degrade to "no suggestion this
cycle"; manual creation is never blocked.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from importlib import resources
from typing import Optional, Sequence, Union

from .events import CATEGORY_LABELS, CODE_ISSUE_LABELS
from .gateway import (
    GROUP_ASPECTS,
    STUDENT_ASPECTS,
    GatewayError,
    LLMGateway,
    SchemaInvalidAfterRetries,
    StructuredRequest,
)
from .metrics import GroupState, SnapshotFrame, StudentState
from .notifications import (
    AlertMode,
    CategoricalAttribute,
    ChartKind,
    Criteria,
    NumericAttribute,
    Scope,
    TrackerAttribute,
)
from .topics import TopicRegistry

MESSAGE_WINDOW = 50
SUBMISSION_WINDOW = 25
SUGGESTION_CADENCE_S = 15.0
DEFAULT_SPATIAL_N = 2


class ViewLevel(str, Enum):
    GROUP_VIEW = "GroupView"
    STRUCTURE_VIEW = "StructureView"
    INDIVIDUAL_VIEW = "IndividualView"

    @property
    def scope(self) -> Scope:
        return Scope.INDIVIDUAL if self is ViewLevel.INDIVIDUAL_VIEW else Scope.GROUP


class Provenance(str, Enum):
    INTERACTION_BASED = "InteractionBased"
    HISTORIC_BASED = "HistoricBased"


class EmptySelection(ValueError):
    pass


@dataclass(frozen=True)
class PointClick:
    entity_id: str


@dataclass(frozen=True)
class AreaSelect:
    x_range: tuple[float, float]
    y_range: tuple[float, float]


@dataclass(frozen=True)
class DetailRowExpand:
    attribute_value: str


Gesture = Union[PointClick, AreaSelect, DetailRowExpand]


@dataclass(frozen=True)
class InteractionContext:
    view: ViewLevel
    gesture: Gesture


@dataclass(frozen=True)
class SuggestionDraft:
    """A pre-filled notification proposal; activation is always explicit."""

    draft_id: str
    kind: str  # "Alert" | "Tracker"
    reason: str
    provenance: Provenance
    created_at_s: float
    criteria: Optional[Criteria] = None
    mode: Optional[AlertMode] = None
    threshold: Optional[float] = None
    tracker_attribute: Optional[TrackerAttribute] = None
    chart: Optional[ChartKind] = None


@dataclass(frozen=True)
class RankedIssue:
    rank: int
    entity_id: str
    aspect: str
    issue: str


@dataclass(frozen=True)
class IssueSummary:
    issue_summary: str
    aspect_list: tuple[str, ...]


# ---------------------------------------------------------------------------
# Chain payloads (step 0): the exact JSON document the ranking prompt expects
# ---------------------------------------------------------------------------


def _group_payload(frame: SnapshotFrame, registry: TopicRegistry, group: GroupState) -> dict:
    submissions = []
    messages = []
    for sid in group.member_ids:
        student = frame.students[sid]
        for rec in student.submission_log:
            submissions.append(
                (
                    rec.time_s,
                    sid,
                    {
                        "time": rec.time_s,
                        "student_id": sid,
                        "result": "pass" if rec.tests_passed == rec.tests_total else "not pass",
                        "errorType": CODE_ISSUE_LABELS[rec.error_type],
                        "errorMessage": rec.error_message,
                        "groupPassRate": rec.group_pass_rate_after,
                    },
                )
            )
        for rec in student.message_log:
            messages.append(
                (
                    rec.time_s,
                    sid,
                    {
                        "time": rec.time_s,
                        "message": rec.text,
                        "sender_id": sid,
                        "senderActivityLevel": rec.sender_activity,
                        "senderPassRate": rec.sender_pass_rate,
                        "activity": CATEGORY_LABELS[rec.category],
                        "topic": registry.summary_of(rec.topic_id),
                        "currentActivityLevel": rec.group_activity,
                        "currentPassRate": rec.group_pass_rate,
                    },
                )
            )
    submissions.sort(key=lambda item: (item[0], item[1]))
    messages.sort(key=lambda item: (item[0], item[1]))
    return {
        "currentStatus": {
            "groupPassRate": group.group_pass_rate,
            "teamActivity": group.team_activity,
            "membersParticipatedNum": group.members_participated,
            "topic": registry.summary_of(group.topic_id),
        },
        "teamMembers": list(group.member_ids),
        "submissionHistory": [item[2] for item in submissions[-SUBMISSION_WINDOW:]],
        "messageHistory": [item[2] for item in messages[-MESSAGE_WINDOW:]],
    }


def _student_payload(frame: SnapshotFrame, registry: TopicRegistry, student: StudentState) -> dict:
    group = frame.groups[student.group_id]
    return {
        "currentStatus": {
            "passRate": student.pass_rate,
            "teamActivity": student.activity_level,
            "topic": registry.summary_of(group.topic_id),
        },
        "submissionHistory": [
            {
                "time": rec.time_s,
                "passRate": rec.pass_rate,
                "errorType": CODE_ISSUE_LABELS[rec.error_type],
                "errorMessage": rec.error_message,
            }
            for rec in student.submission_log[-SUBMISSION_WINDOW:]
        ],
        "messageHistory": [
            {
                "time": rec.time_s,
                "message": rec.text,
                "activity": CATEGORY_LABELS[rec.category],
                "currentTopic": registry.summary_of(rec.topic_id),
                "currentActivityLevel": rec.sender_activity,
                "currentPassRate": rec.sender_pass_rate,
            }
            for rec in student.message_log[-MESSAGE_WINDOW:]
        ],
    }


def build_history_payload(
    frame: SnapshotFrame, registry: TopicRegistry, scope: Scope
) -> dict:
    """Chain input document for all entities of the scope, windowed to the
    most recent ``MESSAGE_WINDOW`` messages / ``SUBMISSION_WINDOW`` submissions
    per entity."""
    if scope is Scope.GROUP:
        return {
            "groupHistory": {
                gid: _group_payload(frame, registry, frame.groups[gid])
                for gid in sorted(frame.groups)
            }
        }
    return {
        "studentHistory": {
            sid: _student_payload(frame, registry, frame.students[sid])
            for sid in sorted(frame.students)
        }
    }


# ---------------------------------------------------------------------------
# Chain steps 1-3: gateway calls with schema validation
# ---------------------------------------------------------------------------


def _ranked_schema(scope: Scope) -> dict:
    key = "rankedGroupList" if scope is Scope.GROUP else "rankedStudentList"
    return {
        "title": "RankedGroupList" if scope is Scope.GROUP else "RankedStudentList",
        "type": "object",
        "properties": {
            key: {
                "type": "array",
                "items": {
                    "type": "object",
                    "properties": {
                        "rank": {"type": "integer", "minimum": 1},
                        "id": {"type": "string"},
                        "aspect": {"type": "string"},
                        "issue": {"type": "string", "minLength": 1},
                    },
                    "required": ["rank", "id", "aspect", "issue"],
                },
            }
        },
        "required": [key],
    }


ISSUE_SUMMARY_SCHEMA = {
    "title": "IssueSummary",
    "type": "object",
    "properties": {
        "summary": {
            "type": "object",
            "properties": {
                "issueSummary": {"type": "string", "minLength": 1},
                "aspectList": {
                    "type": "array",
                    "items": {"type": "string"},
                    "minItems": 1,
                },
            },
            "required": ["issueSummary", "aspectList"],
        }
    },
    "required": ["summary"],
}


def _load_prompt(name: str, problem: str) -> str:
    text = resources.files("classpulse.prompts").joinpath(name).read_text(encoding="utf-8")
    return text.replace("{problem}", problem)


def _aspect_vocab(scope: Scope) -> list[str]:
    return GROUP_ASPECTS if scope is Scope.GROUP else STUDENT_ASPECTS


def normalize_aspect(raw: str, scope: Scope) -> Optional[str]:
    cleaned = " ".join(raw.split()).lower()
    for aspect in _aspect_vocab(scope):
        if cleaned == aspect:
            return aspect
    return None


def rank_issues(
    payload: dict, scope: Scope, gateway: LLMGateway, problem: str = ""
) -> list[RankedIssue]:
    """Steps 1+2: identify and severity-rank issues for every entity.

    The output is completeness-repaired: entities the model dropped are
    appended at the tail in input order, duplicates and unknown ids removed,
    and ranks renumbered 1..N.
    """
    prompt_file = "rank_groups.txt" if scope is Scope.GROUP else "rank_students.txt"
    key = "rankedGroupList" if scope is Scope.GROUP else "rankedStudentList"
    input_key = "groupHistory" if scope is Scope.GROUP else "studentHistory"
    expected_ids = list(payload[input_key])
    doc = gateway.complete_structured(
        StructuredRequest(
            system_prompt=_load_prompt(prompt_file, problem),
            user_payload=payload,
            output_schema=_ranked_schema(scope),
        )
    )
    items = []
    seen: set[str] = set()
    for entry in sorted(doc[key], key=lambda e: e["rank"]):
        if entry["id"] not in expected_ids or entry["id"] in seen:
            continue
        aspect = normalize_aspect(entry["aspect"], scope)
        if aspect is None:
            raise SchemaInvalidAfterRetries(
                f"aspect {entry['aspect']!r} outside the closed vocabulary"
            )
        seen.add(entry["id"])
        items.append((entry["id"], aspect, entry["issue"]))
    for eid in expected_ids:
        if eid not in seen:
            items.append((eid, _aspect_vocab(scope)[0], "No specific issue identified."))
    return [
        RankedIssue(rank=i + 1, entity_id=eid, aspect=aspect, issue=issue)
        for i, (eid, aspect, issue) in enumerate(items)
    ]


def summarize_top5(
    ranked: Sequence[RankedIssue], scope: Scope, gateway: LLMGateway, problem: str = ""
) -> IssueSummary:
    """Step 3: summarize the min(5, N) most severe issues into one sentence
    plus the aspect subset it mentions."""
    if not ranked:
        raise ValueError("ranked list must be non-empty")
    top = sorted(ranked, key=lambda r: r.rank)[:5]
    if scope is Scope.GROUP:
        prompt_file, key = "summarize_group_issues.txt", "groupIssueList"
    else:
        prompt_file, key = "summarize_student_issues.txt", "studentIssueList"
    doc = gateway.complete_structured(
        StructuredRequest(
            system_prompt=_load_prompt(prompt_file, problem),
            user_payload={key: [{"aspect": r.aspect, "issue": r.issue} for r in top]},
            output_schema=ISSUE_SUMMARY_SCHEMA,
        )
    )
    aspects = []
    for raw in doc["summary"]["aspectList"]:
        aspect = normalize_aspect(raw, scope)
        if aspect is None:
            raise SchemaInvalidAfterRetries(f"aspect {raw!r} outside the closed vocabulary")
        if aspect not in aspects:
            aspects.append(aspect)
    return IssueSummary(
        issue_summary=doc["summary"]["issueSummary"], aspect_list=tuple(aspects)
    )


# ---------------------------------------------------------------------------
# Chain step 4: local range/union arithmetic
# ---------------------------------------------------------------------------

_NUMERIC_ASPECTS = {
    "pass rate": NumericAttribute.PASS_RATE,
    "amount of related messages in the conversation": NumericAttribute.ACTIVITY_LEVEL,
    "member's participation in discussion": NumericAttribute.TEAM_STRUCTURE,
}

_CATEGORICAL_ASPECTS = {
    "topic of conversation": CategoricalAttribute.CONVERSATION_TOPIC,
    "code issue": CategoricalAttribute.CODE_ISSUE,
}

_TRACKER_ASPECTS = {
    "topic of conversation": TrackerAttribute.CONVERSATION_TOPICS,
    "code issue": TrackerAttribute.CODE_ISSUES,
    "member's participation in discussion": TrackerAttribute.MEMBERS_PARTICIPATED,
}


def _attribute_value(entity, attr: NumericAttribute) -> float:
    if isinstance(entity, StudentState):
        return entity.pass_rate if attr is NumericAttribute.PASS_RATE else entity.activity_level
    if attr is NumericAttribute.PASS_RATE:
        return entity.group_pass_rate
    if attr is NumericAttribute.ACTIVITY_LEVEL:
        return entity.team_activity
    return float(entity.members_participated)


def derive_criteria(
    entities: Sequence[Union[StudentState, GroupState]],
    aspects: Sequence[str],
    scope: Scope,
) -> Criteria:
    """Numeric aspects map to the [min, max] of the entities' current values;
    categorical aspects map to the union of observed values. Aspects with no
    matching attribute in the scope are skipped."""
    if not entities:
        raise ValueError("derive_criteria needs at least one entity")
    numeric: dict[NumericAttribute, tuple[float, float]] = {}
    categorical: dict[CategoricalAttribute, frozenset[str]] = {}
    for aspect in aspects:
        attr = _NUMERIC_ASPECTS.get(aspect)
        if attr is not None:
            if attr is NumericAttribute.TEAM_STRUCTURE and scope is not Scope.GROUP:
                continue
            values = [_attribute_value(e, attr) for e in entities]
            numeric[attr] = (min(values), max(values))
            continue
        cat = _CATEGORICAL_ASPECTS.get(aspect)
        if cat is None:
            continue
        if cat is CategoricalAttribute.CONVERSATION_TOPIC:
            if scope is not Scope.GROUP:
                continue
            values_set = frozenset(e.topic_id for e in entities)
        else:
            if scope is not Scope.INDIVIDUAL:
                continue
            values_set = frozenset(
                e.last_code_issue.value for e in entities if e.last_code_issue is not None
            )
        if values_set:
            categorical[cat] = values_set
    return Criteria(
        scope=scope, numeric_ranges=numeric, categorical_sets=categorical
    ).validate()


# ---------------------------------------------------------------------------
# Interaction-based suggestions
# ---------------------------------------------------------------------------


def _clamp(rng: tuple[float, float], lo: float, hi: float) -> tuple[float, float]:
    return (max(lo, min(hi, rng[0])), max(lo, min(hi, rng[1])))


def suggest_from_interaction(
    ctx: InteractionContext,
    frame: SnapshotFrame,
    draft_id: str = "draft-0",
    topic_order: Optional[Sequence[str]] = None,
) -> SuggestionDraft:
    """Turn a view gesture into a pre-filled alert draft.

    Area selections carry their axis ranges into the criteria; point clicks in
    the structure view snapshot the group's topic and active-member count;
    detail-row expansion keys on the expanded topic or code issue.
    """
    scope = ctx.view.scope
    gesture = ctx.gesture
    if isinstance(gesture, AreaSelect):
        (x_lo, x_hi), (y_lo, y_hi) = gesture.x_range, gesture.y_range
        if x_lo >= x_hi or y_lo >= y_hi:
            raise EmptySelection(f"zero-area selection {gesture}")
        if ctx.view is ViewLevel.STRUCTURE_VIEW:
            order = list(topic_order) if topic_order is not None else sorted(
                {g.topic_id for g in frame.groups.values()}
            )
            selected = frozenset(
                t for i, t in enumerate(order) if x_lo <= i <= x_hi
            )
            criteria = Criteria(
                scope=Scope.GROUP,
                numeric_ranges={NumericAttribute.TEAM_STRUCTURE: _clamp((y_lo, y_hi), 0, 3)},
                categorical_sets={CategoricalAttribute.CONVERSATION_TOPIC: selected}
                if selected
                else {},
            )
        else:
            criteria = Criteria(
                scope=scope,
                numeric_ranges={
                    NumericAttribute.PASS_RATE: _clamp(gesture.x_range, 0, 100),
                    NumericAttribute.ACTIVITY_LEVEL: _clamp(gesture.y_range, 0, 12),
                },
            )
        reason = f"User selects a region in {ctx.view.value}"
    elif isinstance(gesture, PointClick):
        if ctx.view is ViewLevel.STRUCTURE_VIEW:
            group = frame.groups[gesture.entity_id]
            participated = float(group.members_participated)
            criteria = Criteria(
                scope=Scope.GROUP,
                numeric_ranges={NumericAttribute.TEAM_STRUCTURE: (participated, participated)},
                categorical_sets={
                    CategoricalAttribute.CONVERSATION_TOPIC: frozenset({group.topic_id})
                },
            )
        elif ctx.view is ViewLevel.INDIVIDUAL_VIEW:
            student = frame.students[gesture.entity_id]
            criteria = Criteria(
                scope=Scope.INDIVIDUAL,
                numeric_ranges={
                    NumericAttribute.PASS_RATE: (student.pass_rate, student.pass_rate),
                    NumericAttribute.ACTIVITY_LEVEL: (
                        student.activity_level,
                        student.activity_level,
                    ),
                },
            )
        else:
            group = frame.groups[gesture.entity_id]
            criteria = Criteria(
                scope=Scope.GROUP,
                numeric_ranges={
                    NumericAttribute.PASS_RATE: (group.group_pass_rate, group.group_pass_rate),
                    NumericAttribute.ACTIVITY_LEVEL: (group.team_activity, group.team_activity),
                },
            )
        reason = f"User clicks on {gesture.entity_id} in {ctx.view.value}"
    else:
        if scope is Scope.GROUP:
            criteria = Criteria(
                scope=Scope.GROUP,
                categorical_sets={
                    CategoricalAttribute.CONVERSATION_TOPIC: frozenset(
                        {gesture.attribute_value}
                    )
                },
            )
        else:
            criteria = Criteria(
                scope=Scope.INDIVIDUAL,
                categorical_sets={
                    CategoricalAttribute.CODE_ISSUE: frozenset({gesture.attribute_value})
                },
            )
        reason = f"User expands detail row {gesture.attribute_value!r} in {ctx.view.value}"
    return SuggestionDraft(
        draft_id=draft_id,
        kind="Alert",
        reason=reason,
        provenance=Provenance.INTERACTION_BASED,
        created_at_s=frame.time_s,
        criteria=criteria.validate(),
        mode=AlertMode.SPATIAL,
        threshold=DEFAULT_SPATIAL_N,
    )


# ---------------------------------------------------------------------------
# Cadenced historic suggestions
# ---------------------------------------------------------------------------


class SuggestionEngine:
    """Runs the chain every ``cadence_s`` seconds of session time; one alert
    draft (plus at most one tracker draft) per completed cycle."""

    def __init__(
        self,
        gateway: LLMGateway,
        cadence_s: float = SUGGESTION_CADENCE_S,
        problem: str = "",
        enabled: bool = True,
    ):
        self.gateway = gateway
        self.cadence_s = cadence_s
        self.problem = problem
        self.enabled = enabled
        self._next_due = cadence_s
        self._draft_counter = 0
        self._running = False
        self.failures: list[str] = []
        #: (time, ranked issues) per completed cycle; inspection/debug surface.
        self.ranked_history: list[tuple[float, tuple[RankedIssue, ...]]] = []

    def due(self, now_s: float) -> bool:
        return self.enabled and now_s >= self._next_due

    def _new_draft_id(self) -> str:
        self._draft_counter += 1
        return f"hdraft-{self._draft_counter}"

    def tick(
        self,
        now_s: float,
        frame: SnapshotFrame,
        registry: TopicRegistry,
        view: ViewLevel,
    ) -> list[SuggestionDraft]:
        """Run one chain cycle if due. Returns [] when not due, when the
        session has no entities yet, or when the chain failed this cycle."""
        if not self.due(now_s):
            return []
        while self._next_due <= now_s:
            self._next_due += self.cadence_s
        if self._running:  # overlapping executions are skipped, not queued
            return []
        scope = view.scope
        entities = frame.groups if scope is Scope.GROUP else frame.students
        if not entities:
            return []
        self._running = True
        try:
            payload = build_history_payload(frame, registry, scope)
            ranked = rank_issues(payload, scope, self.gateway, self.problem)
            summary = summarize_top5(ranked, scope, self.gateway, self.problem)
            top_ids = [r.entity_id for r in sorted(ranked, key=lambda r: r.rank)[:5]]
            criteria = derive_criteria(
                [entities[eid] for eid in top_ids], summary.aspect_list, scope
            )
        except (GatewayError, ValueError) as exc:
            self.failures.append(f"{now_s}: {exc}")
            return []
        finally:
            self._running = False
        self.ranked_history.append((now_s, tuple(ranked)))
        drafts = [
            SuggestionDraft(
                draft_id=self._new_draft_id(),
                kind="Alert",
                reason=summary.issue_summary,
                provenance=Provenance.HISTORIC_BASED,
                created_at_s=now_s,
                criteria=criteria,
                mode=AlertMode.SPATIAL,
                threshold=DEFAULT_SPATIAL_N,
            )
        ]
        tracker_attr = _most_frequent_tracker_aspect(ranked)
        if tracker_attr is not None:
            drafts.append(
                SuggestionDraft(
                    draft_id=self._new_draft_id(),
                    kind="Tracker",
                    reason=f"Most frequent issue aspect: {tracker_attr[1]}",
                    provenance=Provenance.HISTORIC_BASED,
                    created_at_s=now_s,
                    tracker_attribute=tracker_attr[0],
                    chart=ChartKind.BAR,
                )
            )
        return drafts


def _most_frequent_tracker_aspect(
    ranked: Sequence[RankedIssue],
) -> Optional[tuple[TrackerAttribute, str]]:
    counts: dict[str, int] = {}
    for issue in ranked:
        if issue.aspect in _TRACKER_ASPECTS:
            counts[issue.aspect] = counts.get(issue.aspect, 0) + 1
    if not counts:
        return None
    ordered = sorted(
        counts.items(),
        key=lambda kv: (-kv[1], list(_TRACKER_ASPECTS).index(kv[0])),
    )
    aspect = ordered[0][0]
    return _TRACKER_ASPECTS[aspect], aspect
