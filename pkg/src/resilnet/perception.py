"""Telemetry acquisition: replica voting, outlier removal, normalization, buffering."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError, DomainError, StreamError

MAD_SCALE = 1.4826
MAD_K = 3.0
MIN_WINDOW = 5


@dataclass(frozen=True)
class TelemetrySample:
    stream: str
    tick: float
    value: float
    replica: int = 0


def redundancy_vote(replicas: Sequence[float]) -> float:
    """Median of the replica readings."""
    if len(replicas) == 0:
        raise DomainError("redundancy_vote needs at least one replica")
    return float(np.median(np.asarray(replicas, dtype=float)))


def detect_outliers(window: Sequence[float]) -> np.ndarray:
    """Mask of samples further than 3 scaled MADs from the window median."""
    x = np.asarray(window, dtype=float)
    if x.size < MIN_WINDOW:
        return np.zeros(x.size, dtype=bool)
    med = np.median(x)
    mad = np.median(np.abs(x - med))
    return np.abs(x - med) > MAD_K * MAD_SCALE * mad


def normalize(value, lo, hi):
    """Min-max scaling; values outside the nominal range map outside [0, 1]."""
    return (np.asarray(value, dtype=float) - lo) / (hi - lo)


class TimeSeriesBuffer:
    """Ring of the last ``window`` cleaned values per stream, plus outlier flags."""

    def __init__(self, stream_ids: Sequence[str], window: int = 100):
        if window < 1:
            raise ConfigError("buffer window must be >= 1")
        self.stream_ids = list(stream_ids)
        self.index = {s: i for i, s in enumerate(self.stream_ids)}
        self.window = int(window)
        n = len(self.stream_ids)
        self._values = np.zeros((self.window, n))
        self._flags = np.zeros((self.window, n), dtype=bool)
        self._head = 0
        self.count = 0

    def append(self, values: np.ndarray, flags: np.ndarray) -> None:
        self._values[self._head] = values
        self._flags[self._head] = flags
        self._head = (self._head + 1) % self.window
        self.count = min(self.count + 1, self.window)

    def _order(self) -> np.ndarray:
        if self.count < self.window:
            return np.arange(self.count)
        return (self._head + np.arange(self.window)) % self.window

    def values(self) -> np.ndarray:
        """(count, streams) array, oldest row first."""
        return self._values[self._order()]

    def flags(self) -> np.ndarray:
        return self._flags[self._order()]

    def series(self, stream: str) -> np.ndarray:
        if stream not in self.index:
            raise StreamError(stream)
        return self.values()[:, self.index[stream]]

    def __len__(self) -> int:
        return self.count

    def shift(self, delta: np.ndarray) -> None:
        """Add a per-stream offset to every stored value."""
        self._values += delta


def _row_median(raw: np.ndarray) -> np.ndarray:
    """Row-wise median; a plain sort is much cheaper than np.median for a few replicas."""
    srt = np.sort(raw, axis=1)
    r = srt.shape[1]
    if r % 2:
        return srt[:, r // 2]
    return 0.5 * (srt[:, r // 2 - 1] + srt[:, r // 2])


class Perception:
    """Vectorized preprocessing over all declared streams.

    Window statistics (median and MAD of the buffer) are refreshed every
    ``refresh`` ticks. A flagged sample is replaced by the window median unless
    the previous tick of that stream was flagged too, so that a genuine level
    shift passes through after one tick.
    """

    def __init__(
        self,
        stream_ids: Sequence[str],
        ranges: Mapping[str, tuple[float, float]],
        window: int = 100,
        refresh: int = 10,
    ):
        self.buffer = TimeSeriesBuffer(stream_ids, window)
        self.stream_ids = self.buffer.stream_ids
        try:
            lo_hi = np.array([ranges[s] for s in self.stream_ids], dtype=float).reshape(-1, 2)
        except KeyError as exc:
            raise ConfigError(f"no normalization range for stream {exc.args[0]!r}") from exc
        self.lo, self.hi = lo_hi[:, 0], lo_hi[:, 1]
        if np.any(self.hi <= self.lo):
            raise ConfigError("normalization ranges need hi > lo")
        self.refresh = max(1, int(refresh))
        n = len(self.stream_ids)
        self._median = np.zeros(n)
        self._limit = np.full(n, np.inf)
        self._prev_flag = np.zeros(n, dtype=bool)
        self._since_refresh = self.refresh

    def _refresh_stats(self) -> None:
        if len(self.buffer) < MIN_WINDOW:
            self._limit[:] = np.inf
            return
        win = self.buffer.values()
        self._median = np.median(win, axis=0)
        mad = np.median(np.abs(win - self._median), axis=0)
        self._limit = MAD_K * MAD_SCALE * mad

    def shift(self, delta: np.ndarray) -> None:
        """Move the window and its median by a known level change (normalized units)."""
        self.buffer.shift(delta)
        self._median = self._median + delta

    def step(self, raw: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Clean one tick of (streams, replicas) readings.

        Returns the normalized cleaned vector and the outlier flags.
        """
        if self._since_refresh >= self.refresh:
            self._refresh_stats()
            self._since_refresh = 0
        self._since_refresh += 1
        voted = _row_median(raw)
        x = (voted - self.lo) / (self.hi - self.lo)
        flags = np.abs(x - self._median) > self._limit
        substitute = flags & ~self._prev_flag
        clean = np.where(substitute, self._median, x)
        self._prev_flag = flags
        self.buffer.append(clean, flags)
        return clean, flags


def preprocess(raw: Mapping[str, Sequence[float]], perception: Perception) -> dict[str, float]:
    """Clean one tick given as stream id -> replica readings.

    Streams missing from ``raw`` repeat their last buffered value.
    """
    unknown = [s for s in raw if s not in perception.buffer.index]
    if unknown:
        raise StreamError(f"undeclared streams {unknown}")
    n = len(perception.stream_ids)
    width = max((len(v) for v in raw.values()), default=1)
    last = perception.buffer.values()[-1] if len(perception.buffer) else np.zeros(n)
    fill = last * (perception.hi - perception.lo) + perception.lo
    grid = np.repeat(fill[:, None], width, axis=1)
    for s, reps in raw.items():
        reps = np.asarray(reps, dtype=float)
        if reps.size == 0:
            raise DomainError(f"stream {s!r} has no replicas")
        row = perception.buffer.index[s]
        # pad short replica lists with their own median so the vote is unchanged
        grid[row] = np.median(reps)
        grid[row, : reps.size] = reps
    clean, _ = perception.step(grid)
    return {s: float(clean[perception.buffer.index[s]]) for s in raw}
