import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from classpulse.events import (
    ChatPayload,
    CodeIssue,
    EventKind,
    EventRecord,
    MalformedLine,
    MessageCategory,
    NonMonotonicTime,
    RosterGroup,
    RosterPayload,
    SubmissionPayload,
    UnknownStudent,
    classify_code_issue,
    parse_event_log,
    serialize_event,
    serialize_event_log,
)


def make_log(*extra_lines: str) -> list[str]:
    base = [
        '{"kind":"SessionStart","time_s":0}',
        '{"kind":"Roster","time_s":0,"groups":[{"group_id":"g1","member_ids":["s1","s2","s3"]}]}',
    ]
    return base + list(extra_lines)


class TestParse:
    def test_minimal_log(self):
        records = parse_event_log(['{"kind":"SessionStart","time_s":0}'])
        assert len(records) == 1
        assert records[0].kind is EventKind.SESSION_START
        assert records[0].time_s == 0

    def test_three_event_log_with_type_error(self):
        lines = make_log(
            '{"kind":"Submission","time_s":68,"student_id":"s1","tests_passed":0,'
            '"tests_total":4,"error_type":"TypeError","error_message":"\'int\' object is not subscriptable"}'
        )
        records = parse_event_log(lines)
        assert len(records) == 3
        assert records[2].payload.error_type is CodeIssue.TYPE_ERROR
        assert records[2].time_s == 68

    def test_unknown_chat_sender(self):
        lines = make_log(
            '{"kind":"ChatMessage","time_s":5,"student_id":"ghost","group_id":"g1","text":"hi"}'
        )
        with pytest.raises(UnknownStudent) as exc:
            parse_event_log(lines)
        assert exc.value.student_id == "ghost"
        assert exc.value.line_no == 3

    def test_unknown_submission_student(self):
        lines = make_log(
            '{"kind":"Submission","time_s":5,"student_id":"nope","tests_passed":1,'
            '"tests_total":4,"error_type":"SyntaxError","error_message":"x"}'
        )
        with pytest.raises(UnknownStudent):
            parse_event_log(lines)

    def test_non_monotonic_time(self):
        lines = make_log(
            '{"kind":"ChatMessage","time_s":9,"student_id":"s1","group_id":"g1","text":"a"}',
            '{"kind":"ChatMessage","time_s":5,"student_id":"s1","group_id":"g1","text":"b"}',
        )
        with pytest.raises(NonMonotonicTime):
            parse_event_log(lines)

    def test_ties_allowed(self):
        lines = make_log(
            '{"kind":"ChatMessage","time_s":5,"student_id":"s1","group_id":"g1","text":"a"}',
            '{"kind":"ChatMessage","time_s":5,"student_id":"s2","group_id":"g1","text":"b"}',
        )
        assert len(parse_event_log(lines)) == 4

    def test_malformed_json(self):
        with pytest.raises(MalformedLine):
            parse_event_log(["not json"])

    def test_duplicate_session_start(self):
        with pytest.raises(MalformedLine):
            parse_event_log(make_log('{"kind":"SessionStart","time_s":0}'))

    def test_missing_session_start(self):
        with pytest.raises(MalformedLine):
            parse_event_log(
                ['{"kind":"Roster","time_s":0,"groups":[{"group_id":"g","member_ids":["s"]}]}']
            )

    def test_group_too_large(self):
        with pytest.raises(MalformedLine):
            parse_event_log(
                [
                    '{"kind":"SessionStart","time_s":0}',
                    '{"kind":"Roster","time_s":0,"groups":[{"group_id":"g","member_ids":["a","b","c","d"]}]}',
                ]
            )

    def test_student_in_two_groups(self):
        with pytest.raises(MalformedLine):
            parse_event_log(
                [
                    '{"kind":"SessionStart","time_s":0}',
                    '{"kind":"Roster","time_s":0,"groups":[{"group_id":"g1","member_ids":["a"]},'
                    '{"group_id":"g2","member_ids":["a"]}]}',
                ]
            )

    def test_chat_wrong_group(self):
        lines = make_log(
            '{"kind":"ChatMessage","time_s":1,"student_id":"s1","group_id":"g9","text":"hey"}'
        )
        with pytest.raises(MalformedLine):
            parse_event_log(lines)

    def test_category_aliases(self):
        lines = make_log(
            '{"kind":"ChatMessage","time_s":1,"student_id":"s1","group_id":"g1",'
            '"text":"x","category":"not related to the class"}'
        )
        records = parse_event_log(lines)
        assert records[2].payload.category is MessageCategory.NOT_CLASS_RELATED


class TestRoundTrip:
    def test_round_trip_bytes(self):
        records = [
            EventRecord(EventKind.SESSION_START, 0),
            EventRecord(
                EventKind.ROSTER,
                0,
                RosterPayload((RosterGroup("g1", ("s1", "s2")),)),
            ),
            EventRecord(
                EventKind.SUBMISSION,
                12.5,
                SubmissionPayload("s1", 1, 4, CodeIssue.LOGICAL_ERROR, ""),
            ),
            EventRecord(
                EventKind.CHAT_MESSAGE,
                20,
                ChatPayload("s2", "g1", "where is a count used?", MessageCategory.HELP_SEEKING),
            ),
            EventRecord(EventKind.CHAT_MESSAGE, 21, ChatPayload("s1", "g1", "untagged")),
        ]
        text = serialize_event_log(records)
        parsed = parse_event_log(text.splitlines())
        assert parsed == records
        assert serialize_event_log(parsed) == text

    def test_serialized_lines_are_json(self):
        record = EventRecord(
            EventKind.SUBMISSION, 3, SubmissionPayload("s", 4, 4, CodeIssue.NO_COMPILING_ERROR)
        )
        obj = json.loads(serialize_event(record))
        assert obj["error_type"] == "NoCompilingError"
        assert obj["tests_passed"] == 4


class TestClassifyCodeIssue:
    @pytest.mark.parametrize(
        "passed,total,name,expected",
        [
            (4, 4, "", CodeIssue.NO_COMPILING_ERROR),
            (1, 4, "", CodeIssue.LOGICAL_ERROR),
            (0, 4, "SyntaxError", CodeIssue.SYNTAX_ERROR),
            (0, 4, "syntax error", CodeIssue.SYNTAX_ERROR),
            (0, 4, "  Logical Error ", CodeIssue.LOGICAL_ERROR),
            (0, 4, "TypeError", CodeIssue.TYPE_ERROR),
            (0, 4, "name error", CodeIssue.NAME_ERROR),
            (0, 4, "IndentationError", CodeIssue.INDENTATION_ERROR),
            (2, 4, "IndexError", CodeIssue.INDEX_ERROR),
            (0, 4, "SegmentationFault", CodeIssue.OTHER_ERROR),
            (0, 1, "weird", CodeIssue.OTHER_ERROR),
        ],
    )
    def test_classification(self, passed, total, name, expected):
        assert classify_code_issue(passed, total, name) is expected

    def test_total_must_be_positive(self):
        with pytest.raises(ValueError):
            classify_code_issue(0, 0, "")

    def test_deterministic(self):
        for args in [(4, 4, ""), (0, 4, "TypeError"), (1, 3, "???")]:
            assert classify_code_issue(*args) is classify_code_issue(*args)

    @given(
        st.integers(0, 100),
        st.integers(1, 100),
        st.text(max_size=30),
    )
    @settings(max_examples=200, deadline=None)
    def test_total_over_all_inputs(self, passed, total, name):
        result = classify_code_issue(min(passed, total), total, name)
        assert isinstance(result, CodeIssue)
        assert result is classify_code_issue(min(passed, total), total, name)
