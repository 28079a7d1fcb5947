#!/usr/bin/env python3
"""
CodeFoundry - Drift Monitor
Rolling violation rate of bounded invocations per artifact. A rate above the
threshold over the window flags drift.
"""

import logging
import threading
from collections import deque
from dataclasses import dataclass
from typing import Deque, Dict, Optional

LOG = logging.getLogger("CodeFoundry.drift")


@dataclass(frozen=True)
class DriftStatus:
    artifact_digest: str
    invocations: int
    violations: int
    rate: float
    drifting: bool
    total_violations: int

    def to_dict(self) -> Dict[str, object]:
        return {
            "artifact_digest": self.artifact_digest,
            "invocations": self.invocations,
            "violations": self.violations,
            "rate": self.rate,
            "drifting": self.drifting,
            "total_violations": self.total_violations,
        }


class DriftMonitor:
    def __init__(self, window: int = 50, threshold: float = 0.2):
        if window < 1:
            raise ValueError("drift window must be >= 1")
        if not 0.0 <= threshold <= 1.0:
            raise ValueError("drift threshold must be between 0 and 1")
        self.window = window
        self.threshold = threshold
        self._lock = threading.Lock()
        self._windows: Dict[str, Deque[bool]] = {}
        self._totals: Dict[str, int] = {}
        self._alerted: Dict[str, bool] = {}

    def record(self, artifact_digest: str, violated: bool) -> None:
        """Record one bounded invocation attempt"""
        with self._lock:
            window = self._windows.setdefault(artifact_digest, deque(maxlen=self.window))
            window.append(violated)
            if violated:
                self._totals[artifact_digest] = self._totals.get(artifact_digest, 0) + 1
            drifting = self._rate(window) > self.threshold
            if drifting and not self._alerted.get(artifact_digest):
                LOG.warning(
                    f"Drift detected for artifact {artifact_digest[:12]}: "
                    f"violation rate {self._rate(window):.2f} over {len(window)} invocations"
                )
            self._alerted[artifact_digest] = drifting

    @staticmethod
    def _rate(window: Deque[bool]) -> float:
        return sum(window) / len(window) if window else 0.0

    def violations(self, artifact_digest: str) -> int:
        """Total violations recorded since start"""
        with self._lock:
            return self._totals.get(artifact_digest, 0)

    def status(self, artifact_digest: str) -> Optional[DriftStatus]:
        with self._lock:
            window = self._windows.get(artifact_digest)
            if window is None:
                return None
            rate = self._rate(window)
            return DriftStatus(
                artifact_digest=artifact_digest,
                invocations=len(window),
                violations=sum(window),
                rate=rate,
                drifting=rate > self.threshold,
                total_violations=self._totals.get(artifact_digest, 0),
            )
