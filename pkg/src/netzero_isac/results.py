"""Long-format experiment tables and their CSV form."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import astuple, dataclass, field, fields

PROVENANCES = ("analytic", "bound", "monte-carlo")


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    variable: str
    x: float
    series: str
    metric: str
    value: float
    provenance: str
    se: float | None = None
    seed: int | None = None

    def __post_init__(self):
        # numpy scalars would otherwise leak their repr into the CSV
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "value", float(self.value))
        if self.se is not None:
            object.__setattr__(self, "se", float(self.se))
        if self.seed is not None:
            object.__setattr__(self, "seed", int(self.seed))
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        if self.provenance == "monte-carlo" and (self.se is None or self.seed is None):
            raise ValueError("monte-carlo rows need a standard error and a seed")


COLUMNS = tuple(f.name for f in fields(ResultRow))


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "undefined" if math.isnan(v) else repr(v)
    return str(v)


@dataclass
class ExperimentResult:
    rows: list[ResultRow] = field(default_factory=list)

    def add(self, *args, **kwargs) -> None:
        self.rows.append(ResultRow(*args, **kwargs))

    def extend(self, other: "ExperimentResult") -> None:
        self.rows.extend(other.rows)

    def select(self, **match) -> list[ResultRow]:
        return [r for r in self.rows if all(getattr(r, k) == v for k, v in match.items())]

    def values(self, **match) -> list[float]:
        return [r.value for r in self.select(**match)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(COLUMNS)
        for r in self.rows:
            w.writerow([_fmt(v) for v in astuple(r)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ExperimentResult":
        reader = csv.DictReader(io.StringIO(text))
        if reader.fieldnames is None or tuple(reader.fieldnames) != COLUMNS:
            raise ValueError(f"expected columns {COLUMNS}, got {reader.fieldnames}")
        out = cls()
        for rec in reader:
            out.add(rec["experiment"], rec["variable"], float(rec["x"]), rec["series"],
                    rec["metric"], _parse_float(rec["value"]), rec["provenance"],
                    _parse_float(rec["se"]) if rec["se"] else None,
                    int(rec["seed"]) if rec["seed"] else None)
        return out


def _parse_float(text: str) -> float:
    return math.nan if text == "undefined" else float(text)
