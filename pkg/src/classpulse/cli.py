"""Command line entry points: serve the HTTP/WS API, replay logs, generate
fixture data, validate logs, and render offline reports."""
from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click

from .events import EventLogError, parse_event_log
from .fixture import EXERCISE_PROMPT, EXERCISE_TITLE, FixtureSpec, fixture_log_text
from .gateway import GatewayConfig
from .service.session import SessionManager, transcript_lines


@click.group()
def main() -> None:
    """Real-time collaborative-programming session analytics."""


@main.command()
@click.option("--port", "-p", default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option(
    "--data-dir",
    type=click.Path(path_type=Path),
    default=None,
    help="Durable session logs (defaults to $DATA_DIR if set).",
)
def serve(port: int, host: str, data_dir: Path | None) -> None:
    """Run the session service (recovers persisted sessions on startup)."""
    import uvicorn

    from .service.server import create_app

    if data_dir is None and os.environ.get("DATA_DIR"):
        data_dir = Path(os.environ["DATA_DIR"])
    manager = SessionManager(data_dir=data_dir, gateway_config=GatewayConfig.from_env())
    recovered = manager.recover()
    if recovered:
        click.echo(f"recovered sessions: {', '.join(recovered)}")
    uvicorn.run(create_app(manager), host=host, port=port)


@main.command()
@click.option("--log", "log_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--speed", default=1.0, show_default=True)
@click.option("--headless", is_flag=True, help="Run at full speed, no pacing.")
@click.option("--seed", default=0, show_default=True)
@click.option("--transcript", type=click.Path(path_type=Path), default=None,
              help="Write the full stream transcript to this file.")
def replay(log_path: Path, speed: float, headless: bool, seed: int, transcript: Path | None) -> None:
    """Replay a recorded session log and print a summary."""
    import time

    manager = SessionManager()
    driver = manager.open_replay(log_path, seed=seed, speed=speed)
    if headless:
        session = driver.run_to_completion()
    else:
        prev = driver.now_s
        while True:
            t = driver.step()
            if t is None:
                break
            time.sleep(max(0.0, (t - prev) / driver.speed))
            prev = t
        session = driver.session
    counts: dict[str, int] = {}
    for message in session.transcript:
        counts[message.kind.value] = counts.get(message.kind.value, 0) + 1
    click.echo(f"replayed {session.events_applied} events to t={session.clock.now_s:.0f}s")
    for kind, count in sorted(counts.items()):
        click.echo(f"  {kind}: {count}")
    if transcript is not None:
        transcript.write_text("\n".join(transcript_lines(session)) + "\n", encoding="utf-8")
        click.echo(f"transcript written to {transcript}")


@main.command("gen-fixture")
@click.option("--students", default=111, show_default=True)
@click.option("--group-size", default=3, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--duration", default=300.0, show_default=True)
@click.option("--tests-total", default=4, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), default=None,
              help="Output file (stdout if omitted).")
def gen_fixture(students: int, group_size: int, seed: int, duration: float,
                tests_total: int, out: Path | None) -> None:
    """Generate a synthetic session log (each group gets at least one passer)."""
    spec = FixtureSpec(
        students=students,
        group_size=group_size,
        seed=seed,
        duration_s=duration,
        tests_total=tests_total,
    )
    text = fixture_log_text(spec)
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text, encoding="utf-8")
        click.echo(f"wrote {len(text.splitlines())} events to {out}")
        click.echo(f"exercise: {EXERCISE_TITLE} — {EXERCISE_PROMPT[:60]}...")


@main.command("validate-log")
@click.argument("log_file", type=click.Path(exists=True, path_type=Path))
def validate_log(log_file: Path) -> None:
    """Check a log against format and ordering invariants."""
    try:
        records = parse_event_log(log_file.read_text(encoding="utf-8").splitlines())
    except EventLogError as exc:
        click.echo(f"INVALID: {exc}", err=True)
        raise SystemExit(1)
    kinds: dict[str, int] = {}
    for r in records:
        kinds[r.kind.value] = kinds.get(r.kind.value, 0) + 1
    click.echo(f"OK: {len(records)} events, duration {records[-1].time_s:.0f}s")
    click.echo(json.dumps(kinds, sort_keys=True))


@main.command()
@click.option("--log", "log_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--seed", default=0, show_default=True)
def report(log_path: Path, out: Path, seed: int) -> None:
    """Replay a log headless and render figures + CSV tables into OUT."""
    from .report import render_report

    written = render_report(log_path, out, seed=seed)
    for path in written:
        click.echo(str(path))
