"""Wall-time and resident-memory probes around assembly, solves and self-test suites.

Convergence levels run on worker threads and all of them may report to the
process-wide monitor, so recording is guarded by a lock.
"""

import functools
import logging
import threading
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass
from typing import Any, Callable, Dict, Iterator, List, Optional, Sequence, TypeVar

import pandas as pd
import psutil

F = TypeVar("F", bound=Callable[..., Any])

MB = 1024.0 * 1024.0


@dataclass(frozen=True)
class OperationTiming:
    """One measured block: wall time and resident set size in MB."""

    operation: str
    seconds: float
    rss_before_mb: float
    rss_after_mb: float
    rss_peak_mb: float
    started_at: float

    @property
    def rss_delta_mb(self) -> float:
        return self.rss_after_mb - self.rss_before_mb

    def to_dict(self) -> Dict[str, Any]:
        return {**asdict(self), "rss_delta_mb": self.rss_delta_mb}


class PerformanceMonitor:
    """Collects an OperationTiming for every ``measure`` block."""

    def __init__(self):
        self.metrics: List[OperationTiming] = []
        self.logger = logging.getLogger(__name__)
        self._process = psutil.Process()
        self._lock = threading.Lock()

    def _rss_mb(self) -> float:
        try:
            return self._process.memory_info().rss / MB
        except psutil.Error:
            return 0.0

    @contextmanager
    def measure(self, operation: str) -> Iterator[None]:
        """Time the enclosed block; failed blocks are recorded too."""
        started_at = time.time()
        start = time.perf_counter()
        rss_before = self._rss_mb()
        try:
            yield
        finally:
            rss_after = self._rss_mb()
            timing = OperationTiming(
                operation=operation,
                seconds=time.perf_counter() - start,
                rss_before_mb=rss_before,
                rss_after_mb=rss_after,
                rss_peak_mb=max(rss_before, rss_after),
                started_at=started_at,
            )
            with self._lock:
                self.metrics.append(timing)
            self.logger.debug(f"{operation}: {timing.seconds:.3f}s, rss {timing.rss_delta_mb:+.1f}MB")

    def last(self, operation: str) -> Optional[OperationTiming]:
        with self._lock:
            for timing in reversed(self.metrics):
                if timing.operation == operation:
                    return timing
        return None

    def timings(self, operations: Sequence[str]) -> Dict[str, float]:
        """Seconds of the latest block of each named operation (skipping unmeasured ones)."""
        latest = {name: self.last(name) for name in operations}
        return {name: timing.seconds for name, timing in latest.items() if timing is not None}

    def frame(self) -> pd.DataFrame:
        with self._lock:
            rows = [timing.to_dict() for timing in self.metrics]
        return pd.DataFrame(rows, columns=list(OperationTiming.__dataclass_fields__) + ["rss_delta_mb"])

    def get_summary(self) -> Dict[str, Any]:
        """Totals plus per-operation statistics; ``slowest_operations`` lists at most five names."""
        frame = self.frame()
        if frame.empty:
            return {"total_operations": 0}

        grouped = frame.groupby("operation").agg(
            call_count=("seconds", "size"),
            total_time=("seconds", "sum"),
            max_time=("seconds", "max"),
            max_rss_mb=("rss_peak_mb", "max"),
        )
        grouped = grouped.sort_values("total_time", ascending=False)
        operation_stats = {
            name: {
                "call_count": int(row.call_count),
                "total_time": float(row.total_time),
                "max_time": float(row.max_time),
                "max_rss_mb": float(row.max_rss_mb),
            }
            for name, row in grouped.iterrows()
        }
        return {
            "total_operations": len(frame),
            "total_time": float(frame["seconds"].sum()),
            "peak_rss_mb": float(frame["rss_peak_mb"].max()),
            "operation_stats": operation_stats,
            "slowest_operations": list(grouped.index[:5]),
        }

    def clear(self) -> None:
        with self._lock:
            self.metrics.clear()


_performance_monitor: Optional[PerformanceMonitor] = None
_monitor_lock = threading.Lock()


def get_performance_monitor() -> PerformanceMonitor:
    """Get or create the process-wide monitor."""
    global _performance_monitor
    with _monitor_lock:
        if _performance_monitor is None:
            _performance_monitor = PerformanceMonitor()
        return _performance_monitor


def performance_monitored(func: F) -> F:
    """Record every call of ``func`` on the process-wide monitor as ``module.name``."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        with get_performance_monitor().measure(f"{func.__module__}.{func.__name__}"):
            return func(*args, **kwargs)

    return wrapper  # type: ignore[return-value]


def log_performance_summary(monitor: Optional[PerformanceMonitor] = None) -> None:
    summary = (monitor or get_performance_monitor()).get_summary()
    logger = logging.getLogger(__name__)
    if summary["total_operations"] == 0:
        logger.info("No performance metrics recorded")
        return

    logger.info(
        f"Measured operations: {summary['total_operations']}, "
        f"{summary['total_time']:.3f}s in total, peak rss {summary['peak_rss_mb']:.1f}MB"
    )
    for name in summary["slowest_operations"]:
        stats = summary["operation_stats"][name]
        logger.info(f"  {name}: {stats['total_time']:.3f}s over {stats['call_count']} call(s)")
