"""Per-iteration CSV run logs."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import List


@dataclass
class RunLog:
    columns: tuple = ("iteration", "value", "functional", "wall_time")
    rows: List[tuple] = field(default_factory=list)
    start: float = field(default_factory=time.perf_counter)

    def record(self, iteration: int, value: float, functional: float) -> None:
        self.rows.append((iteration, float(value), float(functional), time.perf_counter() - self.start))

    def to_csv(self) -> str:
        lines = [",".join(self.columns)]
        for it, v, f, t in self.rows:
            lines.append(f"{it},{v:.17g},{f:.17g},{t:.17g}")
        return "\n".join(lines) + "\n"

    def write(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_csv())
