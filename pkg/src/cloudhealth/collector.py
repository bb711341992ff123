"""Windowed KPI sample store with heartbeat-derived failure statistics.

Samples arrive over a newline-delimited JSON wire format (one sample per
line) and land in in-memory per-series ring buffers bounded by a retention
horizon. Heartbeat streams (1 = alive, 0 = dead) can be folded into failure
counts, downtime, and recovery times.
"""

from __future__ import annotations

import json
import math
import threading
from bisect import bisect_left, bisect_right, insort
from dataclasses import dataclass, field
from typing import Optional

from .errors import (NonBooleanSeries, StaleSample, UnitMismatch, UnknownMetric,
                     UnknownProbe)
from .model import MonitoringModel, Statistic

# Raw probe streams that are not model metrics themselves but feed derived ones.
HEARTBEAT_STREAM = "heartbeat"
RAW_STREAMS = {HEARTBEAT_STREAM: "bool"}

DEFAULT_LATENESS_MS = 30_000
DEFAULT_RETENTION_MS = 3_600_000


@dataclass(frozen=True)
class KpiSample:
    probe_id: str
    service_id: str
    metric_id: str
    ts: int  # epoch milliseconds
    value: float
    unit: str

    def to_line(self) -> str:
        return json.dumps({
            "probe_id": self.probe_id, "service_id": self.service_id,
            "metric_id": self.metric_id, "ts": self.ts,
            "value": self.value, "unit": self.unit,
        }, sort_keys=True)

    @staticmethod
    def from_line(line: str) -> "KpiSample":
        rec = json.loads(line)
        return KpiSample(
            probe_id=str(rec["probe_id"]),
            service_id=str(rec["service_id"]),
            metric_id=str(rec["metric_id"]),
            ts=int(rec["ts"]),
            value=float(rec["value"]),
            unit=str(rec["unit"]),
        )


@dataclass(frozen=True)
class SeriesWindow:
    metric_id: str
    service_id: str
    from_ts: int
    to_ts: int
    samples: tuple[tuple[int, float], ...]

    @property
    def count(self) -> int:
        return len(self.samples)

    def stats(self) -> dict:
        values = [v for _, v in self.samples]
        if not values:
            return {"count": 0, "mean": None, "min": None, "max": None, "sum": 0.0}
        return {"count": len(values), "mean": sum(values) / len(values),
                "min": min(values), "max": max(values), "sum": sum(values)}

    def statistic(self, stat: Statistic) -> Optional[float]:
        """Apply one aggregate statistic; None on an empty window."""
        if not self.samples:
            return None
        s = self.stats()
        return {Statistic.MEAN: s["mean"], Statistic.MAX: s["max"],
                Statistic.MIN: s["min"], Statistic.SUM: s["sum"],
                Statistic.COUNT: float(s["count"])}[stat]

    def to_dict(self) -> dict:
        return {
            "metric_id": self.metric_id, "service_id": self.service_id,
            "from": self.from_ts, "to": self.to_ts,
            "samples": [[ts, v] for ts, v in self.samples],
            "stats": self.stats(),
        }


@dataclass(frozen=True)
class FailureStats:
    service_id: str
    from_ts: int
    to_ts: int
    num_failures: int
    total_downtime_ms: int
    recovery_times_ms: tuple[int, ...]

    @property
    def mttr_ms(self) -> float:
        if not self.recovery_times_ms:
            return 0.0
        return sum(self.recovery_times_ms) / len(self.recovery_times_ms)

    def to_dict(self) -> dict:
        return {
            "service_id": self.service_id, "from": self.from_ts, "to": self.to_ts,
            "num_failures": self.num_failures,
            "total_downtime_ms": self.total_downtime_ms,
            "recovery_times_ms": list(self.recovery_times_ms),
            "mttr_ms": self.mttr_ms,
        }


class Collector:
    """In-memory KPI store keyed by (metric_id, service_id)."""

    def __init__(self, model: MonitoringModel,
                 lateness_ms: int = DEFAULT_LATENESS_MS,
                 retention_ms: int = DEFAULT_RETENTION_MS,
                 trace_path: Optional[str] = None):
        self._model = model
        self._lateness_ms = lateness_ms
        self._retention_ms = retention_ms
        self._trace_path = trace_path
        self._series: dict[tuple[str, str], list[tuple[int, float]]] = {}
        self._probes: set[str] = set()
        self._lock = threading.RLock()

    def set_model(self, model: MonitoringModel) -> None:
        with self._lock:
            self._model = model

    def register_probe(self, probe_id: str) -> None:
        with self._lock:
            self._probes.add(probe_id)

    def known_units(self, metric_id: str) -> Optional[str]:
        if metric_id in RAW_STREAMS:
            return RAW_STREAMS[metric_id]
        mdef = self._model.metrics.get(metric_id)
        return mdef.unit if mdef else None

    def ingest(self, sample: KpiSample) -> None:
        with self._lock:
            expected_unit = self.known_units(sample.metric_id)
            if expected_unit is None:
                raise UnknownMetric(f"unknown metric {sample.metric_id!r}")
            if sample.probe_id not in self._probes:
                raise UnknownProbe(f"probe {sample.probe_id!r} is not registered")
            if sample.unit != expected_unit:
                raise UnitMismatch(
                    f"metric {sample.metric_id!r} expects unit {expected_unit!r}, "
                    f"got {sample.unit!r}")
            if sample.ts <= 0 or not math.isfinite(sample.value):
                raise StaleSample(f"bad timestamp/value in sample for {sample.metric_id!r}")
            key = (sample.metric_id, sample.service_id)
            series = self._series.setdefault(key, [])
            if series:
                high_water = series[-1][0]
                if sample.ts < high_water - self._lateness_ms:
                    raise StaleSample(
                        f"sample at {sample.ts} is beyond the {self._lateness_ms} ms "
                        f"lateness bound (high water {high_water})")
            insort(series, (sample.ts, sample.value))
            # Bounded retention relative to the series high-water mark.
            horizon = series[-1][0] - self._retention_ms
            if series[0][0] < horizon:
                del series[:bisect_left(series, (horizon, -math.inf))]
            if self._trace_path:
                with open(self._trace_path, "a", encoding="utf-8") as fh:
                    fh.write(sample.to_line() + "\n")

    def ingest_lines(self, text: str) -> list[dict]:
        """Wire-format ingestion; returns per-line errors (empty on full success)."""
        errors = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                sample = KpiSample.from_line(line)
            except (json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
                errors.append({"line": lineno, "code": "parse_error", "message": str(exc)})
                continue
            try:
                self.ingest(sample)
            except Exception as exc:  # per-line error reporting, keep going
                code = getattr(exc, "code", "error")
                errors.append({"line": lineno, "code": code, "message": str(exc)})
        return errors

    def query(self, metric_id: str, service_id: str, from_ts: int, to_ts: int) -> SeriesWindow:
        if self.known_units(metric_id) is None:
            raise UnknownMetric(f"unknown metric {metric_id!r}")
        assert from_ts < to_ts, "query window must be non-empty"
        with self._lock:
            series = self._series.get((metric_id, service_id), [])
            lo = bisect_left(series, (from_ts, -math.inf))
            hi = bisect_left(series, (to_ts, -math.inf))
            samples = tuple(series[lo:hi])
        return SeriesWindow(metric_id, service_id, from_ts, to_ts, samples)

    def sample_count(self, metric_id: str, service_id: str) -> int:
        with self._lock:
            return len(self._series.get((metric_id, service_id), []))

    def service_ids(self) -> set[str]:
        with self._lock:
            return {sid for _, sid in self._series}


def derive_failure_stats(window: SeriesWindow, beat_interval_ms: int) -> FailureStats:
    """Fold a heartbeat window (1 = alive, 0 = dead) into failure statistics.

    An outage is a maximal run of dead beats. Its downtime span is
    (last dead beat - first dead beat) + one beat interval. An outage closed
    by a later alive beat contributes a recovery time measured from the last
    alive beat before the run (one interval before the run when the window
    opens mid-outage) to the first alive beat after it. An outage still open
    at the window end adds downtime but no recovery time.
    """
    for _, v in window.samples:
        if v not in (0.0, 1.0):
            raise NonBooleanSeries(f"heartbeat value {v!r} is not 0 or 1")
    num_failures = 0
    total_downtime = 0
    recovery_times: list[int] = []
    run_start: Optional[int] = None  # ts of first dead beat in current run
    run_end: Optional[int] = None    # ts of last dead beat in current run
    last_alive: Optional[int] = None
    for ts, v in window.samples:
        if v == 0.0:
            if run_start is None:
                run_start = ts
            run_end = ts
        else:
            if run_start is not None:
                num_failures += 1
                total_downtime += (run_end - run_start) + beat_interval_ms
                before = last_alive if last_alive is not None else run_start - beat_interval_ms
                recovery_times.append(ts - before)
                run_start = run_end = None
            last_alive = ts
    if run_start is not None:  # open outage at window end
        total_downtime += (run_end - run_start) + beat_interval_ms
    return FailureStats(
        service_id=window.service_id,
        from_ts=window.from_ts,
        to_ts=window.to_ts,
        num_failures=num_failures,
        total_downtime_ms=total_downtime,
        recovery_times_ms=tuple(recovery_times),
    )
