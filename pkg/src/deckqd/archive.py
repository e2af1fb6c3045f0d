"""Grid-tessellated elite archive and quality-diversity metrics.

The archive pre-tessellates a two-dimensional measure space into a uniform
grid and keeps at most one elite (the highest-objective solution seen so
far) per cell.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cards import DeckGenome

CellIndex = tuple[int, int]


class EmptyArchiveError(RuntimeError):
    """Raised when a query requires at least one stored elite."""


class EliteSource(enum.Enum):
    GROUND_TRUTH = "ground_truth"
    SURROGATE = "surrogate"


class InsertOutcome(enum.Enum):
    NEW_CELL = "new_cell"
    IMPROVED = "improved"
    REJECTED = "rejected"


@dataclass(frozen=True)
class MeasureSpace:
    """Axis-aligned bounds and grid resolution of the 2-D measure space."""

    low: tuple[float, float]
    high: tuple[float, float]
    resolution: tuple[int, int]

    def __post_init__(self) -> None:
        for d in range(2):
            if not self.low[d] < self.high[d]:
                raise ValueError("lower bound must be below upper bound")
            if self.resolution[d] < 1:
                raise ValueError("resolution must be >= 1")

    @property
    def cell_count(self) -> int:
        return self.resolution[0] * self.resolution[1]

    def cell_of(self, measures: tuple[float, float]) -> CellIndex:
        """Map a measure pair to its grid cell.

        Uniform binning with clamping: values at or beyond a bound land in
        the nearest edge cell, so every finite measurement is usable.
        """
        idx = []
        for d in range(2):
            m = measures[d]
            if not math.isfinite(m):
                raise ValueError(f"measure {d} is not finite: {m!r}")
            span = self.high[d] - self.low[d]
            i = math.floor((m - self.low[d]) / span * self.resolution[d])
            idx.append(min(max(i, 0), self.resolution[d] - 1))
        return (idx[0], idx[1])


def cell_manhattan_distance(a: CellIndex, b: CellIndex) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


@dataclass
class Elite:
    """A stored solution together with its evaluated outcome."""

    genome: DeckGenome
    objective: float
    measures: tuple[float, float]
    ancillary: object | None = None
    source: EliteSource = EliteSource.GROUND_TRUTH
    eval_seed: int = 0

    def __post_init__(self) -> None:
        if not math.isfinite(self.objective):
            raise ValueError("objective must be finite")
        if not all(math.isfinite(m) for m in self.measures):
            raise ValueError("measures must be finite")


@dataclass
class InsertLog:
    new_cell: int = 0
    improved: int = 0
    rejected: int = 0


class Archive:
    """At most one elite per cell; replacement requires strict improvement."""

    def __init__(self, space: MeasureSpace):
        self.space = space
        self.cells: dict[CellIndex, Elite] = {}
        self.insert_log = InsertLog()
        self._keys: list[CellIndex] = []  # insertion-ordered, for O(1) sampling

    def __len__(self) -> int:
        return len(self.cells)

    def elites(self) -> list[Elite]:
        return list(self.cells.values())

    def try_insert(self, candidate: Elite) -> InsertOutcome:
        """Insert unless the cell's incumbent is at least as good (ties keep
        the incumbent, which makes runs deterministic)."""
        cell = self.space.cell_of(candidate.measures)
        incumbent = self.cells.get(cell)
        if incumbent is None:
            self.cells[cell] = candidate
            self._keys.append(cell)
            self.insert_log.new_cell += 1
            return InsertOutcome.NEW_CELL
        if candidate.objective > incumbent.objective:
            self.cells[cell] = candidate
            self.insert_log.improved += 1
            return InsertOutcome.IMPROVED
        self.insert_log.rejected += 1
        return InsertOutcome.REJECTED

    def sample_cell(self, rng: np.random.Generator) -> CellIndex:
        """Pick a filled cell uniformly at random."""
        if not self._keys:
            raise EmptyArchiveError("archive holds no elites")
        return self._keys[int(rng.integers(len(self._keys)))]

    def coverage(self) -> float:
        return len(self.cells) / self.space.cell_count

    def qd_score(self, floor: float = 0.0, normalizer: float = 1.0) -> float:
        """Sum of elite objectives, floored: sum of max(f - floor, 0).

        With floor set to the objective's lower bound the score is monotone
        non-decreasing over any insertion sequence.
        """
        total = 0.0
        for elite in self.cells.values():
            total += max(elite.objective - floor, 0.0)
        return total / normalizer

    def ccdf(self, thresholds: list[float]) -> list[tuple[float, float]]:
        """Fraction of all cells whose elite objective strictly exceeds each
        threshold. Thresholds must be sorted ascending."""
        if any(b < a for a, b in zip(thresholds, thresholds[1:])):
            raise ValueError("thresholds must be sorted ascending")
        objectives = sorted(e.objective for e in self.cells.values())
        total = self.space.cell_count
        out = []
        lo = 0
        for t in thresholds:
            # advance past objectives <= t; remaining ones exceed t
            while lo < len(objectives) and objectives[lo] <= t:
                lo += 1
            out.append((t, (len(objectives) - lo) / total))
        return out

    def max_objective(self) -> float:
        return self.best_elite().objective

    def best_elite(self) -> Elite:
        if not self.cells:
            raise EmptyArchiveError("archive holds no elites")
        return max(self.cells.values(), key=lambda e: e.objective)

    def heatmap(self) -> np.ndarray:
        """Objective grid of shape (resolution0, resolution1); empty cells
        hold NaN."""
        grid = np.full(self.space.resolution, np.nan)
        for (i, j), elite in self.cells.items():
            grid[i, j] = elite.objective
        return grid


ARCHIVE_CSV_HEADER = ["i", "j", "objective", "measure0", "measure1", "genome"]


def save_archive(archive: Archive, path: str | Path) -> None:
    """Dump the archive as CSV, one row per elite, sorted by cell."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ARCHIVE_CSV_HEADER)
        for (i, j) in sorted(archive.cells):
            e = archive.cells[(i, j)]
            writer.writerow(
                [
                    i,
                    j,
                    repr(float(e.objective)),
                    repr(float(e.measures[0])),
                    repr(float(e.measures[1])),
                    ";".join(str(c) for c in e.genome.counts),
                ]
            )


def load_archive(path: str | Path, space: MeasureSpace) -> Archive:
    """Rebuild an archive from its CSV dump (ancillary data is not stored)."""
    archive = Archive(space)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ARCHIVE_CSV_HEADER:
            raise ValueError(f"unexpected archive header: {header}")
        for row in reader:
            genome = DeckGenome(tuple(int(tok) for tok in row[5].split(";")))
            elite = Elite(
                genome=genome,
                objective=float(row[2]),
                measures=(float(row[3]), float(row[4])),
            )
            outcome = archive.try_insert(elite)
            if outcome is InsertOutcome.REJECTED:
                raise ValueError(f"archive file has conflicting elites in cell {row[:2]}")
    return archive


def save_heatmap(archive: Archive, path: str | Path) -> None:
    """Write the objective grid as CSV: resolution0 rows x resolution1
    columns, 6 decimal places, empty cells as the literal ``NaN``."""
    grid = archive.heatmap()
    with open(path, "w", newline="") as fh:
        for i in range(grid.shape[0]):
            row = ["NaN" if math.isnan(v) else f"{v:.6f}" for v in grid[i]]
            fh.write(",".join(row) + "\n")


def load_heatmap(path: str | Path) -> np.ndarray:
    rows = []
    with open(path, newline="") as fh:
        for line in fh:
            rows.append([float("nan") if tok == "NaN" else float(tok) for tok in line.strip().split(",")])
    return np.asarray(rows)
