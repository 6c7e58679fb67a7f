"""Metric records and their CSV interchange format.

One row per (run, episode, policy).  Floats are rendered with 9
significant digits and lines end with LF, so identical runs produce
byte-identical files.  Wall-clock timings are deliberately kept out of
the metric files (they would break reproducibility) and live in a
per-run ``timing.json`` instead.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path

METRIC_COLUMNS = (
    "run_id",
    "episode",
    "policy",
    "attack",
    "mean_reward",
    "mean_latency",
    "fbr",
    "br",
)

SCHEMA = ",".join(METRIC_COLUMNS)


@dataclass(frozen=True)
class MetricRecord:
    run_id: str
    episode: int
    policy: str
    attack: str
    mean_reward: float
    mean_latency: float
    fbr: float | None = None
    br: float | None = None


def format_float(value: float) -> str:
    return "%.9g" % value


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return format_float(value)
    return str(value)


def write_metrics(records, path: str | Path) -> Path:
    """Write records as CSV with the documented column order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [SCHEMA]
    for r in records:
        lines.append(",".join(_cell(v) for v in (
            r.run_id, r.episode, r.policy, r.attack,
            r.mean_reward, r.mean_latency, r.fbr, r.br,
        )))
    path.write_text("\n".join(lines) + "\n", newline="\n")
    return path


def read_metrics(path: str | Path) -> list[dict]:
    """Parse a metrics CSV back into dicts (floats where applicable)."""
    lines = Path(path).read_text().strip().split("\n")
    header = lines[0].split(",")
    if tuple(header) != METRIC_COLUMNS:
        raise ValueError(f"unexpected metrics header {header!r}")
    out = []
    for line in lines[1:]:
        cells = line.split(",")
        row: dict = dict(zip(header, cells))
        row["episode"] = int(row["episode"])
        for key in ("mean_reward", "mean_latency", "fbr", "br"):
            row[key] = float(row[key]) if row[key] != "" else None
        out.append(row)
    return out


class Stopwatch:
    """Run timing destined for timing.json, never for metric CSVs."""

    def __init__(self) -> None:
        self._start = time.perf_counter()

    def elapsed(self) -> float:
        return time.perf_counter() - self._start

    def dump(self, out_dir: str | Path, **extra) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        payload = {"wall_clock_s": round(self.elapsed(), 3), **extra}
        (out / "timing.json").write_text(json.dumps(payload, indent=2) + "\n")
