"""Generic MAP-Elites loop over any evaluator (simulator or surrogate).

Candidates are generated in batches: the first ``initial_population``
iterations emit uniform random decks, later ones perturb a uniformly chosen
elite.  Each candidate is evaluated with a seed derived from (run seed,
iteration index), and insertions happen in iteration order, so the run is a
pure function of (seed, config, evaluator).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .archive import Archive, Elite, EliteSource, EmptyArchiveError
from .cards import CardSet, DeckConstraints, DeckGenome, perturb_deck, random_deck
from .rng import derive_rng, derive_seed_array
from .surrogate import AncillaryData


@dataclass(frozen=True)
class EvaluationResult:
    f: float
    m: tuple[float, float]
    alpha: AncillaryData | None = None


class EvaluationError(RuntimeError):
    """An evaluator failed; carries the offending genome."""

    def __init__(self, genome: DeckGenome, seed: int, cause: BaseException):
        super().__init__(f"evaluation failed for genome {genome.to_line()} (seed {seed}): {cause}")
        self.genome = genome
        self.seed = seed


class Evaluator:
    """Maps (genome, seed) to an EvaluationResult, deterministically.

    ``elite_source`` tags elites produced from this evaluator's results;
    ``has_ancillary`` says whether results carry ancillary data.
    """

    elite_source: EliteSource = EliteSource.GROUND_TRUTH
    has_ancillary: bool = False

    def evaluate(self, genome: DeckGenome, seed: int) -> EvaluationResult:
        raise NotImplementedError

    def evaluate_batch(
        self, genomes: list[DeckGenome], seeds: list[int]
    ) -> list[EvaluationResult]:
        results = []
        for genome, seed in zip(genomes, seeds):
            try:
                results.append(self.evaluate(genome, seed))
            except EvaluationError:
                raise
            except Exception as exc:
                raise EvaluationError(genome, seed, exc) from exc
        return results


@dataclass(frozen=True)
class MapElitesConfig:
    iterations: int
    initial_population: int = 100
    batch_size: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.initial_population < 1 or self.batch_size < 1:
            raise ValueError("initial_population and batch_size must be >= 1")


def select_parent(archive: Archive, rng: np.random.Generator) -> Elite:
    """Pick an elite uniformly at random from the archive."""
    if len(archive) == 0:
        raise EmptyArchiveError("cannot select a parent from an empty archive")
    return archive.cells[archive.sample_cell(rng)]


def map_elites_run(
    evaluator: Evaluator,
    archive: Archive,
    cardset: CardSet,
    constraints: DeckConstraints,
    config: MapElitesConfig,
    k_probability: float = 0.5,
    metrics_path: str | Path | None = None,
    metrics_stride: int = 1000,
    qd_floor: float = 0.0,
) -> Archive:
    """Run MAP-Elites for ``config.iterations`` candidate evaluations.

    Candidates are generated and evaluated in batches of
    ``config.batch_size`` but inserted in iteration order; parents for a
    batch are selected before any of the batch's insertions.  A batch never
    straddles the random/perturbation phase boundary, so the first
    perturbation batch always has elites to select from.  The archive is
    mutated in place and returned.  When ``metrics_path`` is set, a
    ``iteration,coverage,qd_score,max_objective`` CSV row is appended every
    ``metrics_stride`` iterations and at the end of the run.
    """
    search_rng = derive_rng(config.seed, "search")
    # Candidate i's evaluation seed: a pure function of (config.seed, i).
    candidate_seeds = derive_seed_array(config.iterations, config.seed, "candidate")
    metrics_fh = open(metrics_path, "w", newline="") if metrics_path is not None else None
    if metrics_fh is not None:
        metrics_fh.write("iteration,coverage,qd_score,max_objective\n")
    try:
        iteration = 0
        next_log = metrics_stride
        while iteration < config.iterations:
            batch = min(config.batch_size, config.iterations - iteration)
            if iteration < config.initial_population:
                batch = min(batch, config.initial_population - iteration)
            genomes = []
            seeds = []
            for j in range(batch):
                idx = iteration + j
                if idx < config.initial_population:
                    genome = random_deck(cardset, constraints, search_rng)
                else:
                    parent = select_parent(archive, search_rng)
                    genome = perturb_deck(
                        parent.genome, cardset, constraints, search_rng, k_probability
                    )
                genomes.append(genome)
                seeds.append(int(candidate_seeds[idx]))
            results = evaluator.evaluate_batch(genomes, seeds)
            for genome, seed, result in zip(genomes, seeds, results):
                archive.try_insert(
                    Elite(
                        genome=genome,
                        objective=result.f,
                        measures=result.m,
                        ancillary=result.alpha,
                        source=evaluator.elite_source,
                        eval_seed=seed,
                    )
                )
            iteration += batch
            if metrics_fh is not None and (iteration >= next_log or iteration == config.iterations):
                _write_metrics_row(metrics_fh, archive, iteration, qd_floor)
                while next_log <= iteration:
                    next_log += metrics_stride
    finally:
        if metrics_fh is not None:
            metrics_fh.close()
    return archive


def _write_metrics_row(fh, archive: Archive, iteration: int, qd_floor: float) -> None:
    best = float(archive.max_objective()) if len(archive) else float("nan")
    fh.write(
        f"{iteration},{archive.coverage()!r},{archive.qd_score(floor=qd_floor)!r},{best!r}\n"
    )
