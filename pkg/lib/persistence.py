"""On-disk state: the JSON-lines field cache and the bundled table fixtures."""

import json
import logging
from dataclasses import dataclass
from pathlib import Path

from .tower import FieldSummary, field_summary

logger = logging.getLogger(__name__)

FIXTURES_DIR = Path(__file__).parent / "fixtures"
TABLES = {
    "nonprincipal": FIXTURES_DIR / "nonprincipal.json",
    "principal": FIXTURES_DIR / "principal.json",
}


class FieldCache:
    """Append-only JSON-lines cache of FieldSummary records keyed by radicand.

    One writer at a time; any number of readers. Lines that fail to parse
    are skipped."""

    def __init__(self, filepath: str | Path):
        self.path = Path(filepath)
        if not self.path.parent.exists():
            raise FileNotFoundError(f"Parent directory {self.path.parent} does not exist.")
        self.entries: dict[int, FieldSummary] = {}
        self.hits = 0
        self.misses = 0
        self._load()

    def _load(self):
        if not self.path.exists():
            return
        with self.path.open("r") as f:
            for lineno, line in enumerate(f, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    summary = FieldSummary.from_dict(json.loads(line))
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                    logger.warning("%s:%d: skipping corrupt cache line (%s)", self.path, lineno, e)
                    continue
                self.entries[summary.d] = summary
        logger.debug("loaded %d cached fields from %s", len(self.entries), self.path)

    def __contains__(self, d: int) -> bool:
        return d in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def get(self, d: int) -> FieldSummary | None:
        summary = self.entries.get(d)
        if summary is None:
            self.misses += 1
        else:
            self.hits += 1
        return summary

    def lookup(self, d: int) -> FieldSummary:
        """Cached summary of Q(sqrt(d)), computed and appended on a miss."""
        summary = self.get(d)
        if summary is None:
            summary = field_summary(d)
            self.add(summary)
        return summary

    def add(self, summary: FieldSummary):
        if summary.d in self.entries:
            return
        self.entries[summary.d] = summary
        with self.path.open("a") as f:
            f.write(json.dumps(summary.to_dict(), sort_keys=True) + "\n")


@dataclass(frozen=True)
class Correction:
    """Recomputed values for a published row that does not hold up."""

    principal: int
    A0: int
    A1: int
    note: str

    @classmethod
    def from_dict(cls, data: dict) -> "Correction":
        return cls(int(data["principal"]), int(data["A0"]), int(data["A1"]), str(data["note"]))


@dataclass(frozen=True)
class TableRow:
    p1: int
    q1: int
    q2: int
    principal: int
    A0: int
    A1: int
    erratum: Correction | None = None

    @classmethod
    def from_dict(cls, data: dict) -> "TableRow":
        values = {k: int(data[k]) for k in ("p1", "q1", "q2", "principal", "A0", "A1")}
        if "erratum" in data:
            values["erratum"] = Correction.from_dict(data["erratum"])
        return cls(**values)

    @property
    def expected(self) -> tuple[int, int, int]:
        """(principal, A0, A1) a recomputation should reproduce."""
        if self.erratum is not None:
            return self.erratum.principal, self.erratum.A0, self.erratum.A1
        return self.principal, self.A0, self.A1


def load_table(name: str) -> list[TableRow]:
    """Load bundled table rows by name ("nonprincipal" or "principal")."""
    if name not in TABLES:
        raise ValueError(f"unknown table {name!r}, expected one of {sorted(TABLES)}")
    with TABLES[name].open("r") as f:
        data = json.load(f)
    return [TableRow.from_dict(row) for row in data["rows"]]
