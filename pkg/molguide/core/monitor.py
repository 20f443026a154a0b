"""Training progress monitoring via psutil.

Provides:
    - get_process_metrics(): standalone function returning a clean dict
    - TrainingSnapshot: dataclass of one recorded optimizer step
    - TrainingMonitor: rolling loss history with throughput and memory readings
"""

from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import psutil

from molguide.utils.config import LOSS_HISTORY_SIZE
from molguide.utils.logger import get_logger

log = get_logger(__name__)


# ─── Standalone Function ───────────────────────────────────────────


def get_process_metrics() -> dict:
    """Return memory and CPU readings of the current process.

    Returns:
        dict with keys: rss_mb, cpu_percent, ram_percent.
    """
    try:
        proc = psutil.Process()
        rss = proc.memory_info().rss
        cpu = proc.cpu_percent(interval=None)
    except psutil.Error:
        rss, cpu = 0, 0.0
    mem = psutil.virtual_memory()
    return {
        "rss_mb": round(rss / (1024 ** 2), 1),
        "cpu_percent": round(cpu, 1),
        "ram_percent": round(mem.percent, 1),
    }


# ─── Data Model ────────────────────────────────────────────────────


@dataclass
class TrainingSnapshot:
    """One recorded optimizer step."""

    step: int
    loss: float
    timestamp: float = field(default_factory=time.time)
    rss_mb: float = 0.0
    steps_per_sec: float = 0.0

    def to_row(self) -> dict:
        """Deterministic fields for the loss-trace CSV."""
        return {"step": self.step, "loss": self.loss}


# ─── Monitor ───────────────────────────────────────────────────────


class TrainingMonitor:
    """Keeps a bounded rolling history of training losses.

    Every recorded step carries the process RSS and the step throughput
    computed from the previous snapshot. The full loss trace is kept
    separately for the CSV artifact.

    Usage:
        monitor = TrainingMonitor(name="diffusion")
        monitor.record(step, loss)
        monitor.latest          # most recent TrainingSnapshot
        monitor.history         # rolling window
        monitor.trace           # every (step, loss)
    """

    def __init__(
        self,
        name: str = "train",
        history_size: int = LOSS_HISTORY_SIZE,
        on_update: Callable[[TrainingSnapshot], None] | None = None,
    ):
        self.name = name
        self._history_size = history_size
        self._on_update = on_update
        self._history: list[TrainingSnapshot] = []
        self._trace: list[tuple[int, float]] = []
        self._lock = threading.Lock()
        self._latest: TrainingSnapshot | None = None
        self._prev: TrainingSnapshot | None = None

    # ── Public API ──────────────────────────────────────────────

    def record(self, step: int, loss: float) -> TrainingSnapshot:
        """Record the loss of one optimizer step."""
        snap = TrainingSnapshot(step=step, loss=float(loss))
        snap.rss_mb = get_process_metrics()["rss_mb"]
        if self._prev is not None:
            dt = snap.timestamp - self._prev.timestamp
            if dt > 0:
                snap.steps_per_sec = (snap.step - self._prev.step) / dt
        self._prev = snap

        with self._lock:
            self._latest = snap
            self._trace.append((step, float(loss)))
            self._history.append(snap)
            if len(self._history) > self._history_size:
                self._history = self._history[-self._history_size:]

        if self._on_update:
            self._on_update(snap)
        return snap

    @property
    def latest(self) -> TrainingSnapshot | None:
        with self._lock:
            return self._latest

    @property
    def history(self) -> list[TrainingSnapshot]:
        """Return a copy of the rolling window."""
        with self._lock:
            return list(self._history)

    @property
    def trace(self) -> list[tuple[int, float]]:
        with self._lock:
            return list(self._trace)

    def smoothed_loss(self, window: int = 50) -> float:
        """Mean loss over the last ``window`` recorded steps."""
        with self._lock:
            recent = [s.loss for s in self._history[-window:]]
        return float(np.mean(recent)) if recent else float("nan")

    def log_progress(self, logger: logging.Logger = log) -> None:
        snap = self.latest
        if snap is None:
            return
        logger.info(
            "[%s] step %d  loss %.4f  (avg %.4f)  %.1f steps/s  rss %.0f MB",
            self.name, snap.step, snap.loss, self.smoothed_loss(),
            snap.steps_per_sec, snap.rss_mb,
        )
