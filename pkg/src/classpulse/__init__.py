"""Real-time collaborative-programming session analytics.

Ingests classroom events (rosters, code submissions, group chat), maintains
per-student/per-group metrics, clusters conversations into topics, evaluates
instructor-defined trackers and alerts, and generates notification
suggestions — all deterministically replayable from a JSON-lines event log.
"""

__version__ = "0.1.0"
