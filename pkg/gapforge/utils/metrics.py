import functools
import itertools
import json
import threading
import time
from datetime import datetime
from typing import Any, Callable, Dict, List, Optional
import logging

logger = logging.getLogger(__name__)


class PerformanceMetrics:
    """Thread-safe wall-clock timings of eigensolves, SDP solves and commands"""

    def __init__(self):
        self.metrics: List[Dict[str, Any]] = []
        self.start_times: Dict[int, Dict[str, Any]] = {}
        self._lock = threading.Lock()
        self._tokens = itertools.count()

    def start_timer(self, operation: str) -> int:
        token = next(self._tokens)
        with self._lock:
            self.start_times[token] = {
                "operation": operation,
                "start": time.perf_counter(),
            }
        return token

    def end_timer(self, token: int, metadata: Optional[Dict[str, Any]] = None) -> float:
        with self._lock:
            entry = self.start_times.pop(token, None)
        if entry is None:
            logger.warning(f"No start time found for timer token: {token}")
            return 0.0

        duration = time.perf_counter() - entry["start"]
        metric = {
            "operation": entry["operation"],
            "duration_seconds": duration,
            "timestamp": datetime.now().isoformat(),
            "metadata": metadata or {},
        }
        with self._lock:
            self.metrics.append(metric)
        logger.debug(f"Operation {entry['operation']} completed in {duration:.3f}s")
        return duration

    def get_metrics(self, operation: Optional[str] = None) -> List[Dict[str, Any]]:
        with self._lock:
            if operation:
                return [m for m in self.metrics if m["operation"] == operation]
            return list(self.metrics)

    def get_average_duration(self, operation: str) -> float:
        op_metrics = self.get_metrics(operation)
        if not op_metrics:
            return 0.0
        return sum(m["duration_seconds"] for m in op_metrics) / len(op_metrics)

    def get_stats(self) -> Dict[str, Any]:
        metrics = self.get_metrics()
        if not metrics:
            return {"total_operations": 0}

        grouped: Dict[str, List[float]] = {}
        for metric in metrics:
            grouped.setdefault(metric["operation"], []).append(metric["duration_seconds"])

        stats: Dict[str, Any] = {"total_operations": len(metrics), "operations": {}}
        for op, durations in grouped.items():
            stats["operations"][op] = {
                "count": len(durations),
                "average_duration": sum(durations) / len(durations),
                "min_duration": min(durations),
                "max_duration": max(durations),
                "total_duration": sum(durations),
            }
        return stats

    def clear_metrics(self) -> None:
        with self._lock:
            self.metrics.clear()
            self.start_times.clear()

    def export_metrics(self, filename) -> bool:
        try:
            with open(filename, "w") as f:
                json.dump(
                    {
                        "metrics": self.get_metrics(),
                        "stats": self.get_stats(),
                        "exported_at": datetime.now().isoformat(),
                    },
                    f,
                    indent=2,
                )
            logger.info(f"Metrics exported to {filename}")
            return True
        except OSError as e:
            logger.error(f"Failed to export metrics: {e}")
            return False


# Global metrics instance
performance_metrics = PerformanceMetrics()


def track_performance(operation: str) -> Callable:
    """Decorator recording the wall time of every call under `operation`"""

    def decorator(func):
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            token = performance_metrics.start_timer(operation)
            try:
                return func(*args, **kwargs)
            finally:
                performance_metrics.end_timer(token)

        return wrapper

    return decorator
