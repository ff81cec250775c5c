"""Event vocabulary, session clock, and event-log (de)serialization.

A session is fully described by a JSON-lines event log: one object per line,
ordered by ``time_s``. Every metric, alert, and suggestion downstream is a
deterministic function of this log, which is what makes replay exact.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Union


class EventKind(str, Enum):
    SESSION_START = "SessionStart"
    ROSTER = "Roster"
    SUBMISSION = "Submission"
    CHAT_MESSAGE = "ChatMessage"


class MessageCategory(str, Enum):
    """The six chat-message categories used for activity scoring."""

    HELP_GIVING = "HelpGiving"
    HELP_SEEKING = "HelpSeeking"
    EXCHANGING_INFO_FEEDBACK = "ExchangingInfoFeedback"
    JOINT_REFLECTION = "JointReflection"
    MUTUAL_ENCOURAGEMENT = "MutualEncouragement"
    NOT_CLASS_RELATED = "NotClassRelated"


#: Lower-case labels used in chain payloads and accepted as aliases when parsing.
CATEGORY_LABELS: dict[MessageCategory, str] = {
    MessageCategory.HELP_GIVING: "help-giving",
    MessageCategory.HELP_SEEKING: "help-seeking",
    MessageCategory.EXCHANGING_INFO_FEEDBACK: "exchanging information and feedback",
    MessageCategory.JOINT_REFLECTION: "joint reflection on progress and process",
    MessageCategory.MUTUAL_ENCOURAGEMENT: "mutual encouragement and challenging",
    MessageCategory.NOT_CLASS_RELATED: "not related to the class",
}

_CATEGORY_ALIASES: dict[str, MessageCategory] = {}
for _cat in MessageCategory:
    _CATEGORY_ALIASES[_cat.value.lower()] = _cat
    _CATEGORY_ALIASES[CATEGORY_LABELS[_cat].lower()] = _cat
_CATEGORY_ALIASES["not class related"] = MessageCategory.NOT_CLASS_RELATED


class CodeIssue(str, Enum):
    """Error classification of a code submission."""

    NO_COMPILING_ERROR = "NoCompilingError"
    TYPE_ERROR = "TypeError"
    NAME_ERROR = "NameError"
    INDENTATION_ERROR = "IndentationError"
    INDEX_ERROR = "IndexError"
    SYNTAX_ERROR = "SyntaxError"
    LOGICAL_ERROR = "LogicalError"
    OTHER_ERROR = "OtherError"


#: Display names used in chain payloads ("Logical Error" rather than "LogicalError").
CODE_ISSUE_LABELS: dict[CodeIssue, str] = {
    CodeIssue.NO_COMPILING_ERROR: "No Compiling Error",
    CodeIssue.TYPE_ERROR: "TypeError",
    CodeIssue.NAME_ERROR: "NameError",
    CodeIssue.INDENTATION_ERROR: "IndentationError",
    CodeIssue.INDEX_ERROR: "IndexError",
    CodeIssue.SYNTAX_ERROR: "SyntaxError",
    CodeIssue.LOGICAL_ERROR: "Logical Error",
    CodeIssue.OTHER_ERROR: "Other Error",
}


def _normalize_name(name: str) -> str:
    return "".join(name.split()).lower()


_ISSUE_LOOKUP: dict[str, CodeIssue] = {}
for _issue in CodeIssue:
    _ISSUE_LOOKUP[_normalize_name(_issue.value)] = _issue
    _ISSUE_LOOKUP[_normalize_name(CODE_ISSUE_LABELS[_issue])] = _issue


def classify_code_issue(tests_passed: int, tests_total: int, raw_error_name: str) -> CodeIssue:
    """Map a raw error name and test counts to a :class:`CodeIssue`.

    Matching against canonical names is case-insensitive and whitespace-tolerant
    ("Logical Error" == "LogicalError"). An empty error name means the code ran:
    all tests passing is a clean submission, anything less is a logical error.
    Unrecognized names collapse to ``OtherError``. Total over all inputs with
    ``tests_total >= 1``.
    """
    if tests_total < 1:
        raise ValueError("tests_total must be >= 1")
    name = raw_error_name.strip()
    if not name:
        if tests_passed >= tests_total:
            return CodeIssue.NO_COMPILING_ERROR
        return CodeIssue.LOGICAL_ERROR
    return _ISSUE_LOOKUP.get(_normalize_name(name), CodeIssue.OTHER_ERROR)


# ---------------------------------------------------------------------------
# Payloads
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RosterGroup:
    group_id: str
    member_ids: tuple[str, ...]


@dataclass(frozen=True)
class RosterPayload:
    groups: tuple[RosterGroup, ...]


@dataclass(frozen=True)
class SubmissionPayload:
    student_id: str
    tests_passed: int
    tests_total: int
    error_type: CodeIssue
    error_message: str = ""

    @property
    def pass_rate(self) -> float:
        return 100.0 * self.tests_passed / self.tests_total

    @property
    def passed(self) -> bool:
        return self.tests_passed == self.tests_total


@dataclass(frozen=True)
class ChatPayload:
    student_id: str
    group_id: str
    text: str
    category: Optional[MessageCategory] = None


Payload = Union[RosterPayload, SubmissionPayload, ChatPayload, None]


@dataclass(frozen=True)
class EventRecord:
    kind: EventKind
    time_s: float
    payload: Payload = None


class ClockMode(str, Enum):
    LIVE = "Live"
    REPLAY = "Replay"
    PAUSED = "Paused"


@dataclass
class SessionClock:
    """Session-time clock. ``now_s`` only moves forward, and only via the
    owning driver; replay speed never leaks into session time."""

    now_s: float = 0.0
    speed: float = 1.0
    mode: ClockMode = ClockMode.LIVE

    def advance(self, to_s: float) -> None:
        if to_s < self.now_s:
            raise ValueError(f"clock cannot move backwards ({self.now_s} -> {to_s})")
        self.now_s = to_s


# ---------------------------------------------------------------------------
# Log parsing / serialization
# ---------------------------------------------------------------------------


class EventLogError(ValueError):
    """Base class for event-log validation failures."""

    def __init__(self, message: str, line_no: int):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class MalformedLine(EventLogError):
    pass


class NonMonotonicTime(EventLogError):
    pass


class UnknownStudent(EventLogError):
    def __init__(self, student_id: str, line_no: int):
        super().__init__(f"unknown student {student_id!r}", line_no)
        self.student_id = student_id


def _parse_category(raw: str, line_no: int) -> MessageCategory:
    cat = _CATEGORY_ALIASES.get(raw.strip().lower())
    if cat is None:
        raise MalformedLine(f"unknown message category {raw!r}", line_no)
    return cat


def _parse_issue(raw: str, line_no: int) -> CodeIssue:
    issue = _ISSUE_LOOKUP.get(_normalize_name(raw))
    if issue is None:
        raise MalformedLine(f"unknown error type {raw!r}", line_no)
    return issue


class LogValidator:
    """Incremental validator shared by batch parsing and live ingestion.

    Tracks roster membership and the time watermark so each new event can be
    checked against the same invariants a full-log parse enforces.
    """

    def __init__(self) -> None:
        self.started = False
        self.last_time: float = 0.0
        self.membership: dict[str, str] = {}  # student -> group

    def validate(self, event: EventRecord, line_no: int = 0) -> EventRecord:
        if event.time_s < 0:
            raise MalformedLine("negative time_s", line_no)
        if self.started and event.time_s < self.last_time:
            raise NonMonotonicTime(
                f"time_s {event.time_s} precedes {self.last_time}", line_no
            )
        if event.kind is EventKind.SESSION_START:
            if self.started:
                raise MalformedLine("duplicate SessionStart", line_no)
            if event.time_s != 0:
                raise MalformedLine("SessionStart must be at time_s 0", line_no)
            self.started = True
        elif not self.started:
            raise MalformedLine("first event must be SessionStart", line_no)
        elif event.kind is EventKind.ROSTER:
            assert isinstance(event.payload, RosterPayload)
            seen: set[str] = set()
            for group in event.payload.groups:
                if not 1 <= len(group.member_ids) <= 3:
                    raise MalformedLine(
                        f"group {group.group_id!r} size {len(group.member_ids)} not in [1, 3]",
                        line_no,
                    )
                for sid in group.member_ids:
                    if sid in seen:
                        raise MalformedLine(f"student {sid!r} in two groups", line_no)
                    seen.add(sid)
            self.membership = {
                sid: g.group_id for g in event.payload.groups for sid in g.member_ids
            }
        elif event.kind is EventKind.SUBMISSION:
            assert isinstance(event.payload, SubmissionPayload)
            p = event.payload
            if p.student_id not in self.membership:
                raise UnknownStudent(p.student_id, line_no)
            if p.tests_total < 1 or p.tests_passed < 0 or p.tests_passed > p.tests_total:
                raise MalformedLine("invalid test counts", line_no)
        elif event.kind is EventKind.CHAT_MESSAGE:
            assert isinstance(event.payload, ChatPayload)
            p = event.payload
            if p.student_id not in self.membership:
                raise UnknownStudent(p.student_id, line_no)
            if self.membership[p.student_id] != p.group_id:
                raise MalformedLine(
                    f"student {p.student_id!r} is not a member of group {p.group_id!r}",
                    line_no,
                )
        self.last_time = event.time_s
        return event


def parse_event_line(line: str, line_no: int = 0) -> EventRecord:
    """Parse one JSON log line into an :class:`EventRecord` (no cross-line checks)."""
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedLine(f"invalid JSON: {exc.msg}", line_no) from exc
    if not isinstance(obj, dict):
        raise MalformedLine("event must be a JSON object", line_no)
    try:
        kind = EventKind(obj["kind"])
        time_s = obj["time_s"]
        if not isinstance(time_s, (int, float)) or isinstance(time_s, bool):
            raise MalformedLine("time_s must be a number", line_no)
        if kind is EventKind.SESSION_START:
            payload: Payload = None
        elif kind is EventKind.ROSTER:
            payload = RosterPayload(
                groups=tuple(
                    RosterGroup(g["group_id"], tuple(g["member_ids"]))
                    for g in obj["groups"]
                )
            )
        elif kind is EventKind.SUBMISSION:
            payload = SubmissionPayload(
                student_id=obj["student_id"],
                tests_passed=int(obj["tests_passed"]),
                tests_total=int(obj["tests_total"]),
                error_type=_parse_issue(obj["error_type"], line_no),
                error_message=obj.get("error_message", ""),
            )
        else:
            raw_cat = obj.get("category")
            payload = ChatPayload(
                student_id=obj["student_id"],
                group_id=obj["group_id"],
                text=obj["text"],
                category=_parse_category(raw_cat, line_no) if raw_cat is not None else None,
            )
    except EventLogError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedLine(f"bad event structure: {exc}", line_no) from exc
    return EventRecord(kind=kind, time_s=time_s, payload=payload)


def parse_event_log(lines: Iterable[str]) -> list[EventRecord]:
    """Parse a full JSON-lines log, enforcing ordering and referential invariants.

    Raises:
        MalformedLine: structural problems (bad JSON, bad fields, roster rules).
        NonMonotonicTime: a line whose time_s precedes an earlier line.
        UnknownStudent: submission/chat referencing an unrostered student.
    """
    validator = LogValidator()
    records: list[EventRecord] = []
    line_no = 0
    for raw in lines:
        line_no += 1
        line = raw.rstrip("\n")
        if not line.strip():
            continue
        records.append(validator.validate(parse_event_line(line, line_no), line_no))
    if not validator.started:
        raise MalformedLine("log has no SessionStart", line_no or 1)
    return records


def serialize_event(event: EventRecord) -> str:
    """Canonical single-line JSON for an event; inverse of :func:`parse_event_line`."""
    obj: dict = {"kind": event.kind.value, "time_s": event.time_s}
    p = event.payload
    if isinstance(p, RosterPayload):
        obj["groups"] = [
            {"group_id": g.group_id, "member_ids": list(g.member_ids)} for g in p.groups
        ]
    elif isinstance(p, SubmissionPayload):
        obj.update(
            student_id=p.student_id,
            tests_passed=p.tests_passed,
            tests_total=p.tests_total,
            error_type=p.error_type.value,
            error_message=p.error_message,
        )
    elif isinstance(p, ChatPayload):
        obj.update(student_id=p.student_id, group_id=p.group_id, text=p.text)
        if p.category is not None:
            obj["category"] = p.category.value
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False)


def serialize_event_log(events: Iterable[EventRecord]) -> str:
    return "".join(serialize_event(e) + "\n" for e in events)
