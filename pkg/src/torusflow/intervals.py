"""Closed interval unions on the time axis, JSON-serializable."""

from __future__ import annotations

import json

import numpy as np

__all__ = ["IntervalSet"]


class IntervalSet:
    """Finite union of closed intervals [a, b], kept merged and sorted."""

    def __init__(self, intervals=()):
        ivs = sorted((float(a), float(b)) for a, b in intervals if b >= a)
        merged: list[list[float]] = []
        for a, b in ivs:
            if merged and a <= merged[-1][1] + 1e-15:
                merged[-1][1] = max(merged[-1][1], b)
            else:
                merged.append([a, b])
        self.intervals = [(a, b) for a, b in merged]

    def __len__(self) -> int:
        return len(self.intervals)

    def __iter__(self):
        return iter(self.intervals)

    def measure(self) -> float:
        return sum(b - a for a, b in self.intervals)

    def contains(self, t: float) -> bool:
        return any(a - 1e-15 <= t <= b + 1e-15 for a, b in self.intervals)

    def covers(self, other: "IntervalSet", tol: float = 1e-12) -> bool:
        return all(
            any(a1 - tol <= a2 and b2 <= b1 + tol for a1, b1 in self.intervals)
            for a2, b2 in other.intervals)

    def dist_to_complement(self, t) -> np.ndarray:
        """Distance from t to the complement of the union (on the real line)."""
        t = np.asarray(t, dtype=np.float64)
        out = np.zeros_like(t)
        for a, b in self.intervals:
            inside = (t >= a) & (t <= b)
            out = np.where(inside, np.maximum(out, np.minimum(t - a, b - t)), out)
        return out

    def intersect_measure(self, a: float, b: float) -> float:
        return sum(max(0.0, min(b, y) - max(a, x)) for x, y in self.intervals)

    def to_json(self) -> str:
        return json.dumps({"intervals": self.intervals}, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "IntervalSet":
        return cls(json.loads(text)["intervals"])
