"""Offline session report: replay a log headless and render the monitoring
views to files — tracker bar/line charts and the group scatter as PNGs, with
trigger/suggestion/metric tables as CSV alongside.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .metrics import SnapshotFrame, lowest_passrate_groups
from .notifications import TrackerAttribute, tracker_counts
from .service.session import SessionManager, transcript_lines
from .service.wire import MessageKind

TRACKED_ATTRIBUTES = [
    TrackerAttribute.CODE_ISSUES,
    TrackerAttribute.CONVERSATION_TOPICS,
    TrackerAttribute.MEMBERS_PARTICIPATED,
]


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _scatter_figure(frame: SnapshotFrame, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(7, 5))
    xs = [g.group_pass_rate for g in frame.groups.values()]
    ys = [g.team_activity for g in frame.groups.values()]
    ax.scatter(xs, ys, s=36, alpha=0.7, edgecolors="none")
    lowest = set(lowest_passrate_groups(frame))
    for gid, g in frame.groups.items():
        if gid in lowest:
            ax.annotate(gid, (g.group_pass_rate, g.team_activity), fontsize=7)
    ax.set_xlim(-2, 102)
    ax.set_ylim(-0.3, 12.3)
    ax.set_xlabel("group pass rate (%)")
    ax.set_ylabel("team activity level")
    ax.set_title(f"groups at t={frame.time_s:.0f}s")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _bar_figure(counts: dict[str, int], title: str, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(7, 4))
    labels = list(counts)
    ax.bar(range(len(labels)), [counts[k] for k in labels])
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=7)
    ax.set_ylabel("count")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _series_figure(
    series: list[tuple[float, dict[str, int]]], title: str, path: Path
) -> None:
    fig, ax = plt.subplots(figsize=(7, 4))
    keys = sorted({k for _, counts in series for k in counts})
    for key in keys:
        ax.plot(
            [t for t, _ in series],
            [counts.get(key, 0) for _, counts in series],
            label=key,
            linewidth=1.2,
        )
    ax.set_xlabel("session time (s)")
    ax.set_ylabel("count")
    ax.set_title(title)
    if keys:
        ax.legend(fontsize=6, ncol=2)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_report(log_path: Path, out_dir: Path, seed: int = 0) -> list[Path]:
    """Replay the log to completion and write figures + CSV tables. Returns
    the list of files written."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manager = SessionManager()
    driver = manager.open_replay(Path(log_path), seed=seed)
    session = driver.run_to_completion()
    written: list[Path] = []

    frame = session.engine.current_frame
    registry = session.topics.registry

    # delimited outputs -------------------------------------------------------
    triggers_path = out_dir / "triggers.csv"
    rows = []
    for message in session.transcript:
        if message.kind is MessageKind.TRIGGER_EVENT:
            p = message.payload
            rows.append([p["time_s"], p["notification_id"], p["kind"], ";".join(p["entered"])])
    _write_csv(triggers_path, ["time_s", "notification_id", "kind", "entered"], rows)
    written.append(triggers_path)

    suggestions_path = out_dir / "suggestions.csv"
    rows = []
    for message in session.transcript:
        if message.kind is MessageKind.SUGGESTION_DRAFT:
            p = message.payload
            rows.append(
                [
                    p["created_at_s"],
                    p["draft_id"],
                    p["kind"],
                    p["provenance"],
                    p["reason"],
                    json.dumps(p.get("criteria", {}), sort_keys=True),
                ]
            )
    _write_csv(
        suggestions_path,
        ["created_at_s", "draft_id", "kind", "provenance", "reason", "criteria"],
        rows,
    )
    written.append(suggestions_path)

    groups_path = out_dir / "groups.csv"
    rows = [
        [
            gid,
            f"{g.group_pass_rate:.4f}",
            f"{g.team_activity:.4f}",
            g.members_participated,
            registry.summary_of(g.topic_id),
        ]
        for gid, g in sorted(frame.groups.items())
    ]
    _write_csv(
        groups_path,
        ["group_id", "group_pass_rate", "team_activity", "members_participated", "topic"],
        rows,
    )
    written.append(groups_path)

    students_path = out_dir / "students.csv"
    rows = [
        [
            sid,
            s.group_id,
            f"{s.pass_rate:.4f}",
            f"{s.activity_level:.4f}",
            s.last_code_issue.value if s.last_code_issue else "",
        ]
        for sid, s in sorted(frame.students.items())
    ]
    _write_csv(
        students_path,
        ["student_id", "group_id", "pass_rate", "activity_level", "last_code_issue"],
        rows,
    )
    written.append(students_path)

    transcript_path = out_dir / "transcript.jsonl"
    transcript_path.write_text(
        "\n".join(transcript_lines(session)) + "\n", encoding="utf-8"
    )
    written.append(transcript_path)

    # figures -----------------------------------------------------------------
    scatter_path = out_dir / "group_scatter.png"
    _scatter_figure(frame, scatter_path)
    written.append(scatter_path)

    for attribute in TRACKED_ATTRIBUTES:
        counts = tracker_counts(attribute, frame)
        if attribute is TrackerAttribute.CONVERSATION_TOPICS:
            counts = {registry.summary_of(k): v for k, v in counts.items()}
        name = attribute.value.lower()
        bar_path = out_dir / f"tracker_{name}_bar.png"
        _bar_figure(counts, f"{attribute.value} (final)", bar_path)
        written.append(bar_path)

    # line view: counts sampled over the replayed frames
    for attribute in TRACKED_ATTRIBUTES:
        series = [
            (f.time_s, tracker_counts(attribute, f))
            for f in session.engine.frames
            if f.time_s == int(f.time_s)  # 1 Hz samples keep the plot readable
        ]
        line_path = out_dir / f"tracker_{attribute.value.lower()}_line.png"
        _series_figure(series, f"{attribute.value} over time", line_path)
        written.append(line_path)

    return written
