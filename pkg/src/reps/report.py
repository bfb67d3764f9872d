"""Pass/fail records produced by the inequality checks."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any


@dataclass(frozen=True)
class GapReport:
    """``passed`` is true iff ``gap <= bound + slack``."""

    check: str
    gap: float
    bound: float
    slack: float = 0.0
    context: dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.gap <= self.bound + self.slack)

    def as_record(self) -> dict[str, Any]:
        return {
            "check": self.check,
            "gap": float(self.gap),
            "bound": float(self.bound),
            "passed": self.passed,
            "context": dict(self.context, slack=self.slack),
        }
