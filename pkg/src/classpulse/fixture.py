"""Synthetic session-log generator for demos and tests.

Mirrors the in-class grouping strategy: students who pass the exercise are
mixed with students who do not, and every group gets at least one passer.
Messages arrive pre-tagged so metric math is exact under replay.
"""
from __future__ import annotations

import random
from dataclasses import dataclass

from .events import (
    ChatPayload,
    CodeIssue,
    EventKind,
    EventRecord,
    MessageCategory,
    RosterGroup,
    RosterPayload,
    SubmissionPayload,
    serialize_event_log,
)

EXERCISE_TITLE = "under100"
EXERCISE_PROMPT = (
    "Write a function called under100 that accepts a list of integers and "
    "returns the number of values in the list that are less than 100."
)

_FAIL_ISSUES = [
    CodeIssue.TYPE_ERROR,
    CodeIssue.NAME_ERROR,
    CodeIssue.INDENTATION_ERROR,
    CodeIssue.INDEX_ERROR,
    CodeIssue.SYNTAX_ERROR,
    CodeIssue.LOGICAL_ERROR,
]

_ERROR_MESSAGES = {
    CodeIssue.TYPE_ERROR: "'int' object is not subscriptable",
    CodeIssue.NAME_ERROR: "name 'count' is not defined",
    CodeIssue.INDENTATION_ERROR: "unexpected indent",
    CodeIssue.INDEX_ERROR: "list index out of range",
    CodeIssue.SYNTAX_ERROR: "invalid syntax",
    CodeIssue.LOGICAL_ERROR: "",
}

# Text pools per category, themed around the counting exercise so the stub
# tagger and topic summarizer behave plausibly on untagged replays too.
_TEXT_POOLS: dict[MessageCategory, list[str]] = {
    MessageCategory.HELP_SEEKING: [
        "where is a count used?",
        "why does my loop stop early?",
        "how do I return the count?",
        "what should the function return for an empty list?",
        "can someone help with the range call?",
    ],
    MessageCategory.HELP_GIVING: [
        "it initializes your count value so the code knows where to start",
        "you should increment the counter inside the loop",
        "try checking each value against 100 before counting",
        "return the count after the loop ends",
    ],
    MessageCategory.EXCHANGING_INFO_FEEDBACK: [
        "my code prints 7 for the example list",
        "the tests expect an int not a list",
        "mine fails the last test case",
    ],
    MessageCategory.JOINT_REFLECTION: [
        "we fixed the syntax error but the count is still off",
        "so far two of us pass everything",
    ],
    MessageCategory.MUTUAL_ENCOURAGEMENT: [
        "nice, that passed!",
        "good catch on the loop bound",
    ],
    MessageCategory.NOT_CLASS_RELATED: ["hi", "hello", "wassup", "lol"],
}


@dataclass(frozen=True)
class FixtureSpec:
    students: int = 111
    group_size: int = 3
    seed: int = 0
    duration_s: float = 300.0
    tests_total: int = 4
    pass_fraction: float = 0.4


def generate_fixture(spec: FixtureSpec) -> list[EventRecord]:
    """Deterministic synthetic log: roster at t=0, then interleaved
    submissions and pre-tagged chat across the session duration. The final
    event lands exactly at ``duration_s`` so replays have a defined horizon."""
    rng = random.Random(spec.seed)
    n = spec.students
    n_groups = (n + spec.group_size - 1) // spec.group_size
    students = [f"s{i:03d}" for i in range(n)]

    # Grouping mixes passers and non-passers, one passer dealt to each group
    # first so no group is without one.
    n_passers = max(n_groups, int(round(spec.pass_fraction * n)))
    shuffled = students[:]
    rng.shuffle(shuffled)
    passers = set(shuffled[:n_passers])
    passer_pool = [s for s in shuffled if s in passers]
    rest = [s for s in shuffled if s not in passers]
    rng.shuffle(rest)
    groups: dict[str, list[str]] = {f"g{i:02d}": [] for i in range(n_groups)}
    group_ids = list(groups)
    for gid, passer in zip(group_ids, passer_pool):
        groups[gid].append(passer)
    fill = passer_pool[n_groups:] + rest
    idx = 0
    for gid in group_ids:
        while len(groups[gid]) < spec.group_size and idx < len(fill):
            groups[gid].append(fill[idx])
            idx += 1
    groups = {gid: members for gid, members in groups.items() if members}

    events: list[EventRecord] = [
        EventRecord(EventKind.SESSION_START, 0),
        EventRecord(
            EventKind.ROSTER,
            0,
            RosterPayload(
                tuple(RosterGroup(gid, tuple(members)) for gid, members in groups.items())
            ),
        ),
    ]

    member_group = {sid: gid for gid, members in groups.items() for sid in members}
    timed: list[EventRecord] = []

    def rand_time() -> float:
        return round(rng.uniform(1.0, spec.duration_s), 1)

    for sid in students:
        attempts = rng.randint(1, 3)
        times = sorted(rand_time() for _ in range(attempts))
        for i, t in enumerate(times):
            final_attempt = i == attempts - 1
            if sid in passers and final_attempt:
                payload = SubmissionPayload(
                    sid, spec.tests_total, spec.tests_total, CodeIssue.NO_COMPILING_ERROR, ""
                )
            else:
                issue = rng.choice(_FAIL_ISSUES)
                passed = rng.randint(0, spec.tests_total - 1)
                if issue is not CodeIssue.LOGICAL_ERROR and passed > 0 and rng.random() < 0.5:
                    passed = 0
                payload = SubmissionPayload(
                    sid, passed, spec.tests_total, issue, _ERROR_MESSAGES[issue]
                )
            timed.append(EventRecord(EventKind.SUBMISSION, t, payload))

    categories = list(_TEXT_POOLS)
    for gid, members in groups.items():
        for _ in range(rng.randint(0, 8)):
            sender = rng.choice(members)
            category = rng.choice(categories)
            text = rng.choice(_TEXT_POOLS[category])
            timed.append(
                EventRecord(
                    EventKind.CHAT_MESSAGE,
                    rand_time(),
                    ChatPayload(sender, gid, text, category),
                )
            )

    timed.sort(key=lambda e: e.time_s)
    if timed:
        last = timed[-1]
        timed[-1] = EventRecord(last.kind, spec.duration_s, last.payload)
    events.extend(timed)
    assert all(member_group[s] for s in students)
    return events


def fixture_log_text(spec: FixtureSpec) -> str:
    return serialize_event_log(generate_fixture(spec))
