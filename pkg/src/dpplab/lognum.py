"""Log-domain nonnegative numbers for the explicit constants pipeline.

The closed-form constants compose powers like ``(2^(1+2L) C)^(2L/g)`` whose
float64 values overflow long before the formulas become meaningless, so the
pipeline carries them as logarithms.  Only nonnegative quantities appear.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["LogFloat"]


@dataclass(frozen=True, order=False)
class LogFloat:
    """A nonnegative real stored as its natural log (-inf encodes 0)."""

    log: float

    @classmethod
    def of(cls, x) -> "LogFloat":
        if isinstance(x, LogFloat):
            return x
        x = float(x)
        if x < 0:
            raise ValueError(f"LogFloat holds nonnegative values, got {x}")
        return cls(np.log(x) if x > 0 else -np.inf)

    @classmethod
    def from_log(cls, log: float) -> "LogFloat":
        return cls(float(log))

    def __float__(self) -> float:
        if self.log == -np.inf:
            return 0.0
        return float(np.exp(self.log)) if self.log < 709.0 else np.inf

    @property
    def log10(self) -> float:
        return self.log / np.log(10.0)

    def __mul__(self, other) -> "LogFloat":
        other = LogFloat.of(other)
        return LogFloat(self.log + other.log)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "LogFloat":
        other = LogFloat.of(other)
        return LogFloat(self.log - other.log)

    def __rtruediv__(self, other) -> "LogFloat":
        return LogFloat.of(other) / self

    def __pow__(self, p: float) -> "LogFloat":
        return LogFloat(self.log * float(p))

    def __add__(self, other) -> "LogFloat":
        other = LogFloat.of(other)
        return LogFloat(float(np.logaddexp(self.log, other.log)))

    __radd__ = __add__

    def __le__(self, other) -> bool:
        return self.log <= LogFloat.of(other).log

    def __lt__(self, other) -> bool:
        return self.log < LogFloat.of(other).log

    def __ge__(self, other) -> bool:
        return self.log >= LogFloat.of(other).log

    def __gt__(self, other) -> bool:
        return self.log > LogFloat.of(other).log

    def max(self, other) -> "LogFloat":
        other = LogFloat.of(other)
        return self if self.log >= other.log else other

    def close_to(self, other, rel: float = 1e-12) -> bool:
        a, b = self.log, LogFloat.of(other).log
        if a == b:
            return True
        return abs(a - b) <= rel * max(1.0, abs(a), abs(b))

    def __repr__(self):
        return f"LogFloat(log10={self.log10:.6g})"
