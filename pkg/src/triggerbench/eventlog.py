"""Shared event log for live runs and model predictions.

One row per timed operation. ``stage`` is the closed vocabulary used by
stage-time reporting: gen, check, io_put, io_get, trigger, analysis.
"""

import csv
import io
import threading
from dataclasses import dataclass

STAGES = ("gen", "check", "io_put", "io_get", "trigger", "analysis")

CSV_COLUMNS = (
    "run_id",
    "pattern",
    "event_type",
    "stage",
    "step",
    "task_kind",
    "bytes",
    "t_start_ms",
    "t_end_ms",
)


@dataclass(frozen=True)
class EventRow:
    event_type: str  # put | get | publish | trigger | eos | compute
    stage: str
    step: int
    task_kind: str
    bytes: int
    t_start_ms: float
    t_end_ms: float


class EventLog:
    """Thread-safe append-only list of EventRows."""

    def __init__(self):
        self._rows = []
        self._lock = threading.Lock()

    def add(self, event_type, stage, step, task_kind, nbytes, t_start_ms, t_end_ms):
        row = EventRow(event_type, stage, step, task_kind, int(nbytes), t_start_ms, t_end_ms)
        with self._lock:
            self._rows.append(row)
        return row

    def rows(self):
        with self._lock:
            return list(self._rows)

    def __len__(self):
        with self._lock:
            return len(self._rows)

    def to_csv(self, run_id, pattern):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in sorted(self.rows(), key=lambda r: (r.t_start_ms, r.t_end_ms, r.step, r.stage)):
            writer.writerow(
                [
                    run_id,
                    pattern,
                    r.event_type,
                    r.stage,
                    r.step,
                    r.task_kind,
                    r.bytes,
                    repr(r.t_start_ms),
                    repr(r.t_end_ms),
                ]
            )
        return buf.getvalue()


def stage_means(log):
    """Mean duration per stage; stages with no events are absent."""
    rows = log.rows()
    if not rows:
        raise ValueError("event log is empty")
    totals = {}
    counts = {}
    for r in rows:
        if r.stage not in STAGES or r.event_type == "eos":
            continue
        totals[r.stage] = totals.get(r.stage, 0.0) + (r.t_end_ms - r.t_start_ms)
        counts[r.stage] = counts.get(r.stage, 0) + 1
    return {s: totals[s] / counts[s] for s in totals}
