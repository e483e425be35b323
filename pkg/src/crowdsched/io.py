"""Flat-file formats: archetype/event/friend/qualification CSV in, metrics
and trace CSV out.

All writers format numbers explicitly so identical inputs produce
byte-identical files.
"""

from __future__ import annotations

import csv
import io as _io
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Sequence

from .errors import ConfigError
from .profiling import QualificationRecord

ARCHETYPE_HEADER = ["worker_id", "category", "accuracy", "mean_response_s", "response_variance"]
EVENT_HEADER = ["worker_id", "timestamp_epoch_seconds"]
FRIEND_HEADER = ["worker_id_a", "worker_id_b"]
QUALIFICATION_HEADER = ["worker_id", "category", "task_id", "answer", "ground_truth"]
METRICS_HEADER = ["seed", "policy", "m", "n", "L", "qlo", "qhi", "max_latency", "avg_accuracy", "throughput"]
TRACE_HEADER = ["task_id", "category", "quality", "start_time", "finish_time", "latency", "answers", "skips", "correct"]
NOTIFY_EVAL_HEADER = ["method", "fraction", "predictions", "correct", "actual", "precision", "recall"]
ACCURACY_HEADER = ["worker_id", "category", "accuracy", "flipped"]
DIFFICULTY_HEADER = ["category", "task_id", "difficulty"]


@dataclass(frozen=True)
class ArchetypeRow:
    """One seed-population worker's statistics for one category."""

    worker_id: str
    category: str
    accuracy: float
    mean_response: float
    response_variance: float


def _reader(text: str, expected_header: Sequence[str], what: str) -> Iterable[dict]:
    handle = _io.StringIO(text)
    reader = csv.DictReader(handle)
    if reader.fieldnames is None or list(reader.fieldnames) != list(expected_header):
        raise ConfigError(
            what,
            f"expected header {','.join(expected_header)}, got "
            f"{','.join(reader.fieldnames or [])}",
        )
    return reader


def parse_archetypes_csv(text: str) -> list[ArchetypeRow]:
    rows = []
    for row in _reader(text, ARCHETYPE_HEADER, "archetypes"):
        try:
            rows.append(
                ArchetypeRow(
                    worker_id=row["worker_id"],
                    category=row["category"],
                    accuracy=float(row["accuracy"]),
                    mean_response=float(row["mean_response_s"]),
                    response_variance=float(row["response_variance"]),
                )
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError("archetypes", f"bad row {row}: {exc}") from exc
    if not rows:
        raise ConfigError("archetypes", "no archetype rows")
    for row in rows:
        if not 0.0 <= row.accuracy <= 1.0:
            raise ConfigError("archetypes", f"accuracy {row.accuracy} outside [0, 1]")
        if row.mean_response <= 0 or row.response_variance < 0:
            raise ConfigError("archetypes", f"bad response statistics in {row}")
    return rows


def format_archetypes_csv(rows: Sequence[ArchetypeRow]) -> str:
    out = [",".join(ARCHETYPE_HEADER)]
    for row in rows:
        out.append(
            f"{row.worker_id},{row.category},{row.accuracy:g},"
            f"{row.mean_response:g},{row.response_variance:g}"
        )
    return "\n".join(out) + "\n"


def load_default_archetypes() -> list[ArchetypeRow]:
    text = resources.files("crowdsched.data").joinpath("default_archetypes.csv").read_text()
    return parse_archetypes_csv(text)


def parse_events_csv(text: str) -> dict[str, list[float]]:
    """Event log: one activity per row, raw epoch seconds, grouped by worker."""
    events: dict[str, list[float]] = {}
    for row in _reader(text, EVENT_HEADER, "events"):
        try:
            events.setdefault(row["worker_id"], []).append(
                float(row["timestamp_epoch_seconds"])
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError("events", f"bad row {row}: {exc}") from exc
    for timestamps in events.values():
        timestamps.sort()
    return events


def format_events_csv(events: dict[str, Sequence[float]]) -> str:
    out = [",".join(EVENT_HEADER)]
    for worker_id in sorted(events):
        for timestamp in events[worker_id]:
            out.append(f"{worker_id},{timestamp:g}")
    return "\n".join(out) + "\n"


def parse_friends_csv(text: str) -> dict[str, set[str]]:
    """Undirected friendship edges; adjacency is symmetrised on read."""
    adjacency: dict[str, set[str]] = {}
    for row in _reader(text, FRIEND_HEADER, "friends"):
        a, b = row["worker_id_a"], row["worker_id_b"]
        if not a or not b or a == b:
            raise ConfigError("friends", f"bad edge {row}")
        adjacency.setdefault(a, set()).add(b)
        adjacency.setdefault(b, set()).add(a)
    return adjacency


def format_friends_csv(adjacency: dict[str, Iterable[str]]) -> str:
    out = [",".join(FRIEND_HEADER)]
    seen = set()
    for a in sorted(adjacency):
        for b in sorted(adjacency[a]):
            if (b, a) in seen:
                continue
            seen.add((a, b))
            out.append(f"{a},{b}")
    return "\n".join(out) + "\n"


def parse_qualification_csv(
    text: str,
) -> tuple[list[QualificationRecord], dict[str, list[str]]]:
    """Qualification answers: one (worker, testing task) row.

    Returns the per-worker records plus, per category, the testing-task ids
    in the order the records' answer lists use (sorted).
    """
    cells: dict[tuple[str, str], dict[str, tuple[int, int]]] = {}
    for row in _reader(text, QUALIFICATION_HEADER, "qualification"):
        try:
            key = (row["worker_id"], row["category"])
            cells.setdefault(key, {})[row["task_id"]] = (
                int(row["answer"]),
                int(row["ground_truth"]),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError("qualification", f"bad row {row}: {exc}") from exc
    if not cells:
        raise ConfigError("qualification", "no qualification rows")
    task_ids_by_category: dict[str, list[str]] = {}
    for (_, category), by_task in sorted(cells.items()):
        known = task_ids_by_category.setdefault(category, sorted(by_task))
        if sorted(by_task) != known:
            raise ConfigError(
                "qualification",
                f"workers in category {category} answered different testing tasks",
            )
    records = []
    for (worker_id, category), by_task in sorted(cells.items()):
        task_ids = task_ids_by_category[category]
        records.append(
            QualificationRecord(
                worker_id=worker_id,
                category=category,
                answers=[by_task[t][0] for t in task_ids],
                ground_truth=[by_task[t][1] for t in task_ids],
            )
        )
    return records, task_ids_by_category


def format_metrics_csv(rows: Sequence[dict]) -> str:
    out = [",".join(METRICS_HEADER)]
    for row in rows:
        out.append(
            f"{row['seed']},{row['policy']},{row['m']},{row['n']},{row['L']},"
            f"{row['qlo']:g},{row['qhi']:g},{row['max_latency']:.3f},"
            f"{row['avg_accuracy']:.6f},{row['throughput']:.3f}"
        )
    return "\n".join(out) + "\n"


def parse_metrics_csv(text: str) -> list[dict]:
    rows = []
    for row in _reader(text, METRICS_HEADER, "metrics"):
        rows.append(
            {
                "seed": int(row["seed"]),
                "policy": row["policy"],
                "m": int(row["m"]),
                "n": int(row["n"]),
                "L": int(row["L"]),
                "qlo": float(row["qlo"]),
                "qhi": float(row["qhi"]),
                "max_latency": float(row["max_latency"]),
                "avg_accuracy": float(row["avg_accuracy"]),
                "throughput": float(row["throughput"]),
            }
        )
    return rows


def format_trace_csv(rows: Sequence[dict]) -> str:
    out = [",".join(TRACE_HEADER)]
    for row in rows:
        finish = f"{row['finish_time']:.3f}" if row["finish_time"] is not None else ""
        latency = f"{row['latency']:.3f}" if row["latency"] is not None else ""
        correct = "" if row["correct"] is None else str(int(row["correct"]))
        out.append(
            f"{row['task_id']},{row['category']},{row['quality']:.6f},"
            f"{row['start_time']:.3f},{finish},{latency},"
            f"{row['answers']},{row['skips']},{correct}"
        )
    return "\n".join(out) + "\n"


def format_notify_eval_csv(rows: Sequence[dict]) -> str:
    out = [",".join(NOTIFY_EVAL_HEADER)]
    for row in rows:
        out.append(
            f"{row['method']},{row['fraction']:g},{row['predictions']},"
            f"{row['correct']},{row['actual']},{row['precision']:.6f},"
            f"{row['recall']:.6f}"
        )
    return "\n".join(out) + "\n"


def format_accuracies_csv(rows: Sequence[dict]) -> str:
    out = [",".join(ACCURACY_HEADER)]
    for row in rows:
        out.append(
            f"{row['worker_id']},{row['category']},{row['accuracy']:.6f},"
            f"{int(row['flipped'])}"
        )
    return "\n".join(out) + "\n"


def format_difficulties_csv(rows: Sequence[dict]) -> str:
    out = [",".join(DIFFICULTY_HEADER)]
    for row in rows:
        out.append(f"{row['category']},{row['task_id']},{row['difficulty']:.6f}")
    return "\n".join(out) + "\n"
