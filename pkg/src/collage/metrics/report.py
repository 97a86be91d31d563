"""Aggregated metric values with confidence intervals, and report output."""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError


@dataclass(frozen=True)
class MetricValue:
    name: str
    mean: float
    ci95: float
    repeats: int

    @classmethod
    def from_values(cls, name: str, values: list[float]) -> "MetricValue":
        if not values:
            raise ConfigurationError(f"no values for metric {name!r}")
        arr = np.asarray(values, dtype=np.float64)
        if arr.shape[0] == 1:
            return cls(name=name, mean=float(arr[0]), ci95=0.0, repeats=1)
        sem = float(arr.std(ddof=1) / np.sqrt(arr.shape[0]))
        return cls(name=name, mean=float(arr.mean()), ci95=1.96 * sem, repeats=arr.shape[0])

    def to_dict(self) -> dict:
        return {"mean": self.mean, "ci95": self.ci95, "repeats": self.repeats}


@dataclass
class MetricReport:
    values: dict[str, MetricValue] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def add(self, value: MetricValue) -> None:
        self.values[value.name] = value

    def add_values(self, name: str, values: list[float]) -> None:
        self.add(MetricValue.from_values(name, values))

    def to_dict(self) -> dict:
        return {
            "metrics": {name: v.to_dict() for name, v in sorted(self.values.items())},
            "metadata": self.metadata,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("metric,mean,ci95,repeats\n")
        for name, v in sorted(self.values.items()):
            out.write(f"{name},{v.mean:.10g},{v.ci95:.10g},{v.repeats}\n")
        return out.getvalue()

    def format_table(self) -> str:
        if not self.values:
            return "(no metrics)"
        name_w = max(len(n) for n in self.values) + 2
        lines = [f"{'metric'.ljust(name_w)}{'mean':>14}{'ci95':>12}{'n':>5}"]
        for name, v in sorted(self.values.items()):
            lines.append(f"{name.ljust(name_w)}{v.mean:>14.6g}{v.ci95:>12.4g}{v.repeats:>5d}")
        return "\n".join(lines)
