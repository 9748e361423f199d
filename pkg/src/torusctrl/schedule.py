"""Piecewise-constant vector control laws on a segmented time grid."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["ControlSchedule", "concatenate"]


@dataclass(frozen=True)
class ControlSchedule:
    """Ordered (duration, value) segments; evaluation is right-continuous."""

    segments: tuple[tuple[float, tuple[float, ...]], ...]

    def __post_init__(self):
        for dur, val in self.segments:
            if not dur > 0:
                raise ValueError("segment durations must be strictly positive")
            if self.segments and len(val) != len(self.segments[0][1]):
                raise ValueError("all segments must share the control dimension")

    @staticmethod
    def empty() -> "ControlSchedule":
        return ControlSchedule(())

    @staticmethod
    def constant(value, duration: float) -> "ControlSchedule":
        return ControlSchedule(((float(duration), tuple(float(v) for v in value)),))

    @property
    def total_duration(self) -> float:
        return float(sum(d for d, _ in self.segments))

    @property
    def dim(self) -> int:
        return len(self.segments[0][1]) if self.segments else 0

    def value_at(self, t: float) -> np.ndarray:
        if not self.segments:
            raise ValueError("empty schedule has no values")
        acc = 0.0
        for dur, val in self.segments:
            acc += dur
            if t < acc:
                return np.asarray(val)
        return np.asarray(self.segments[-1][1])

    def boundaries(self) -> list[float]:
        out, acc = [0.0], 0.0
        for dur, _ in self.segments:
            acc += dur
            out.append(acc)
        return out

    def concat(self, other: "ControlSchedule") -> "ControlSchedule":
        if self.segments and other.segments and self.dim != other.dim:
            raise ValueError("control dimensions differ")
        return ControlSchedule(self.segments + other.segments)

    def padded_to(self, m: int) -> "ControlSchedule":
        """Extend each segment value with zeros up to dimension m."""
        segs = tuple((d, tuple(v) + (0.0,) * (m - len(v))) for d, v in self.segments)
        return ControlSchedule(segs)

    def l2_norm(self) -> float:
        total = 0.0
        for dur, val in self.segments:
            total += dur * float(np.sum(np.asarray(val) ** 2))
        return float(np.sqrt(total))


def concatenate(p: ControlSchedule, q: ControlSchedule) -> ControlSchedule:
    """(p * q): q shifted after p; associative, with the empty schedule neutral."""
    return p.concat(q)
