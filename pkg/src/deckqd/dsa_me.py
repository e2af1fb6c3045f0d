"""Surrogate-assisted outer loop and its experiment variants.

One outer iteration trains the surrogate on the data buffer, runs a full
MAP-Elites search against the surrogate (the inner loop), then evaluates
every elite of the resulting surrogate archive on the ground-truth
simulator, growing both the buffer and the ground-truth archive.  Variants
differ in the surrogate kind (MLP / linear / none) and in how the model is
trained (online, pretrained on random decks, frozen checkpoint, or
re-initialized each outer iteration).
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from .archive import (
    Archive,
    Elite,
    EliteSource,
    MeasureSpace,
    cell_manhattan_distance,
    save_archive,
)
from .cards import CardSet, DeckConstraints, DeckGenome, encode_bag_of_cards, random_deck
from .map_elites import EvaluationResult, Evaluator, MapElitesConfig, map_elites_run
from .rng import derive_rng, derive_seed
from .surrogate import (
    ANCILLARY_FIELDS,
    AncillaryData,
    BASE_OUTPUT_DIM,
    DataBuffer,
    FULL_OUTPUT_DIM,
    LabeledSample,
    ModelKind,
    SurrogateModel,
    TrainConfig,
    initialize_model,
    load_checkpoint,
    save_checkpoint,
    train,
)


class TrainingMode(enum.Enum):
    ONLINE = "online"
    OFFLINE_RANDOM_PRETRAIN = "offline_random"
    FROZEN_CHECKPOINT = "frozen_checkpoint"
    FROM_SCRATCH_EACH_OUTER = "from_scratch"


class SurrogateEvaluator(Evaluator):
    """Evaluator backed by model predictions; never touches the simulator."""

    elite_source = EliteSource.SURROGATE

    def __init__(self, model: SurrogateModel):
        self.model = model
        self.has_ancillary = model.has_ancillary

    def evaluate(self, genome: DeckGenome, seed: int) -> EvaluationResult:
        pred = self.model.predict(encode_bag_of_cards(genome))
        return EvaluationResult(f=pred.f_hat, m=pred.m_hat, alpha=pred.alpha_hat)

    def evaluate_batch(
        self, genomes: list[DeckGenome], seeds: list[int]
    ) -> list[EvaluationResult]:
        x = np.asarray([g.counts for g in genomes], dtype=np.float64)
        y = self.model.predict_batch(x)
        out = []
        for row in y:
            alpha = AncillaryData.from_vector(row[BASE_OUTPUT_DIM:]) if self.has_ancillary else None
            out.append(
                EvaluationResult(f=float(row[0]), m=(float(row[1]), float(row[2])), alpha=alpha)
            )
        return out


@dataclass(frozen=True)
class DsaMeConfig:
    """Configuration of one run.

    ``evaluation_budget`` is the ground-truth budget N; the final outer
    iteration always evaluates its whole surrogate archive, so actual usage
    can overshoot N by up to that archive's size.  Offline pretraining
    evaluations are accounted separately and do not count against N.
    """

    evaluation_budget: int = 1000
    inner_iterations: int = 20_000
    initial_population: int = 100
    inner_batch_size: int = 10
    surrogate_kind: ModelKind | None = ModelKind.MLP
    training_mode: TrainingMode = TrainingMode.ONLINE
    reset_inner_archive: bool = True
    use_ancillary: bool = False
    offline_pretrain_count: int = 10_000
    offline_train_rounds: int = 5
    checkpoint_path: str | None = None
    k_probability: float = 0.5
    qd_floor: float = -30.0
    seed: int = 0
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self) -> None:
        if self.evaluation_budget < self.initial_population:
            raise ValueError("evaluation_budget must be >= initial_population")
        if self.inner_iterations < self.initial_population:
            raise ValueError("inner_iterations must be >= initial_population")
        if self.training_mode is TrainingMode.FROZEN_CHECKPOINT and not self.checkpoint_path:
            raise ValueError("frozen_checkpoint mode requires checkpoint_path")

    @property
    def output_dim(self) -> int:
        return FULL_OUTPUT_DIM if self.use_ancillary else BASE_OUTPUT_DIM


@dataclass(frozen=True)
class OuterMetrics:
    outer_iteration: int
    evaluations_used: int
    coverage: float
    qd_score: float
    max_objective: float
    max_win_percentage: float
    surrogate_train_loss: float | None


@dataclass
class RunResult:
    archive: Archive
    buffer: DataBuffer
    metrics_history: list[OuterMetrics]
    model: SurrogateModel | None
    last_surrogate_archive: Archive | None
    evaluations_used: int


@dataclass(frozen=True)
class RetentionReport:
    retained_fraction: float
    exact_cell_fraction: float
    mean_manhattan_distance: float


def max_win_percentage(archive: Archive) -> float:
    """Best win rate among stored elites; 0.0 for an empty archive or when
    elites carry no ancillary data."""
    best = 0.0
    for elite in archive.cells.values():
        alpha = elite.ancillary
        if alpha is not None:
            best = max(best, alpha.win_percentage)
    return best


def _metrics_snapshot(
    outer: int, evals: int, archive: Archive, qd_floor: float, loss: float | None
) -> OuterMetrics:
    return OuterMetrics(
        outer_iteration=outer,
        evaluations_used=evals,
        coverage=archive.coverage(),
        qd_score=archive.qd_score(floor=qd_floor),
        max_objective=archive.max_objective() if len(archive) else float("nan"),
        max_win_percentage=max_win_percentage(archive),
        surrogate_train_loss=loss,
    )


def _ground_truth_eval(
    gt: Evaluator,
    genome: DeckGenome,
    seed: int,
    buffer: DataBuffer,
    archive: Archive,
) -> None:
    result = gt.evaluate(genome, seed)
    buffer.append(
        LabeledSample(x=encode_bag_of_cards(genome), f=result.f, m=result.m, alpha=result.alpha)
    )
    archive.try_insert(
        Elite(
            genome=genome,
            objective=result.f,
            measures=result.m,
            ancillary=result.alpha,
            source=EliteSource.GROUND_TRUTH,
            eval_seed=seed,
        )
    )


def dsa_me_run(
    config: DsaMeConfig,
    ground_truth: Evaluator,
    cardset: CardSet,
    constraints: DeckConstraints,
    space: MeasureSpace,
    outer_callback: Callable[[int, SurrogateModel, Archive, Archive], None] | None = None,
) -> RunResult:
    """Run the surrogate-assisted loop until the ground-truth budget is spent.

    Phase one evaluates ``initial_population`` random decks on the ground
    truth, filling the buffer and the ground-truth archive.  Each subsequent
    outer iteration (re)trains the surrogate according to ``training_mode``,
    runs the inner MAP-Elites against it, then evaluates every surrogate
    elite on the ground truth (in cell order).  With ``surrogate_kind``
    None the run degenerates to plain MAP-Elites on the ground-truth
    evaluator with ``inner_iterations`` forced to the budget N.

    ``outer_callback(outer_index, model, ground_truth_archive,
    surrogate_archive)`` fires after each completed outer iteration.
    """
    archive = Archive(space)
    buffer = DataBuffer()
    history: list[OuterMetrics] = []

    if config.surrogate_kind is None:
        me_config = MapElitesConfig(
            iterations=config.evaluation_budget,
            initial_population=config.initial_population,
            batch_size=config.inner_batch_size,
            seed=config.seed,
        )
        map_elites_run(
            ground_truth, archive, cardset, constraints, me_config, config.k_probability
        )
        evals = config.evaluation_budget
        history.append(_metrics_snapshot(0, evals, archive, config.qd_floor, None))
        return RunResult(archive, buffer, history, None, None, evals)

    init_rng = derive_rng(config.seed, "init")
    evals = 0
    for idx in range(config.initial_population):
        genome = random_deck(cardset, constraints, init_rng)
        seed = derive_seed(config.seed, "gt", 0, idx)
        _ground_truth_eval(ground_truth, genome, seed, buffer, archive)
        evals += 1
    history.append(_metrics_snapshot(0, evals, archive, config.qd_floor, None))

    model = _prepare_model(config, ground_truth, cardset, constraints)

    surrogate_archive: Archive | None = None
    outer = 0
    while evals < config.evaluation_budget:
        outer += 1
        loss: float | None = None
        if config.training_mode is TrainingMode.ONLINE:
            loss = _train_round(model, buffer, config, outer)
        elif config.training_mode is TrainingMode.FROM_SCRATCH_EACH_OUTER:
            model = initialize_model(
                config.surrogate_kind,
                len(cardset),
                config.output_dim,
                derive_seed(config.seed, "model", outer),
            )
            loss = _train_round(model, buffer, config, outer)

        if config.reset_inner_archive or surrogate_archive is None:
            surrogate_archive = Archive(space)
        inner_config = MapElitesConfig(
            iterations=config.inner_iterations,
            initial_population=config.initial_population,
            batch_size=config.inner_batch_size,
            seed=derive_seed(config.seed, "inner", outer),
        )
        map_elites_run(
            SurrogateEvaluator(model),
            surrogate_archive,
            cardset,
            constraints,
            inner_config,
            config.k_probability,
        )

        for position, cell in enumerate(sorted(surrogate_archive.cells)):
            elite = surrogate_archive.cells[cell]
            seed = derive_seed(config.seed, "gt", outer, position)
            _ground_truth_eval(ground_truth, elite.genome, seed, buffer, archive)
            evals += 1
        history.append(_metrics_snapshot(outer, evals, archive, config.qd_floor, loss))
        if outer_callback is not None:
            outer_callback(outer, model, archive, surrogate_archive)

    return RunResult(archive, buffer, history, model, surrogate_archive, evals)


def _train_round(
    model: SurrogateModel, buffer: DataBuffer, config: DsaMeConfig, outer: int
) -> float:
    """Train for one outer iteration; returns the final epoch's mean loss."""
    train_config = replace(
        config.train, shuffle_seed=derive_seed(config.seed, "shuffle", outer)
    )
    return train(model, buffer, train_config)[-1]


def _prepare_model(
    config: DsaMeConfig,
    ground_truth: Evaluator,
    cardset: CardSet,
    constraints: DeckConstraints,
) -> SurrogateModel:
    if config.training_mode is TrainingMode.FROZEN_CHECKPOINT:
        model = load_checkpoint(config.checkpoint_path)
        if model.input_dim != len(cardset):
            raise ValueError("checkpoint input width does not match the cardset")
        return model
    if config.training_mode is TrainingMode.OFFLINE_RANDOM_PRETRAIN:
        model, _ = offline_pretrain(
            ground_truth, config.offline_pretrain_count, config, cardset, constraints
        )
        return model
    return initialize_model(
        config.surrogate_kind,
        len(cardset),
        config.output_dim,
        derive_seed(config.seed, "model"),
    )


def offline_pretrain(
    ground_truth: Evaluator,
    count: int,
    config: DsaMeConfig,
    cardset: CardSet,
    constraints: DeckConstraints,
) -> tuple[SurrogateModel, DataBuffer]:
    """Evaluate ``count`` random decks and fit a model on that buffer.

    The model trains for ``offline_train_rounds`` rounds of the configured
    epoch budget.  These ground-truth evaluations are a separate data
    collection phase and do not count against the online budget.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = derive_rng(config.seed, "pretrain")
    buffer = DataBuffer()
    for idx in range(count):
        genome = random_deck(cardset, constraints, rng)
        result = ground_truth.evaluate(genome, derive_seed(config.seed, "pretrain-eval", idx))
        buffer.append(
            LabeledSample(
                x=encode_bag_of_cards(genome), f=result.f, m=result.m, alpha=result.alpha
            )
        )
    model = initialize_model(
        config.surrogate_kind or ModelKind.MLP,
        len(cardset),
        config.output_dim,
        derive_seed(config.seed, "pretrain-model"),
    )
    for round_no in range(config.offline_train_rounds):
        train_config = replace(
            config.train, shuffle_seed=derive_seed(config.seed, "pretrain-shuffle", round_no)
        )
        train(model, buffer, train_config)
    return model, buffer


def elite_data_retrain(buffer: DataBuffer, config: DsaMeConfig, seed: int) -> SurrogateModel:
    """Train a fresh model from scratch on a completed run's buffer."""
    if len(buffer) == 0:
        raise ValueError("buffer must be non-empty")
    sample_width = len(buffer.samples[0].x)
    model = initialize_model(
        config.surrogate_kind or ModelKind.MLP,
        sample_width,
        config.output_dim,
        derive_seed(seed, "elite-data-model"),
    )
    for round_no in range(config.offline_train_rounds):
        train_config = replace(
            config.train, shuffle_seed=derive_seed(seed, "elite-data-shuffle", round_no)
        )
        train(model, buffer, train_config)
    return model


def retention_analysis(
    surrogate_archive: Archive,
    ground_truth: Evaluator,
    target_space: MeasureSpace,
    seed: int = 0,
) -> tuple[Archive, RetentionReport]:
    """Re-evaluate every surrogate elite on the ground truth and measure how
    well surrogate cell placement survives.

    retained_fraction is filled cells of the re-evaluated archive divided by
    elites evaluated; exact_cell_fraction is the share whose ground-truth cell
    matches the surrogate cell; the mean Manhattan distance is taken between
    the two cells over all evaluated elites.
    """
    if len(surrogate_archive) == 0:
        raise ValueError("surrogate archive is empty")
    fresh = Archive(target_space)
    exact = 0
    distance_sum = 0
    cells = sorted(surrogate_archive.cells)
    for position, cell in enumerate(cells):
        elite = surrogate_archive.cells[cell]
        result = ground_truth.evaluate(elite.genome, derive_seed(seed, "retention", position))
        true_cell = target_space.cell_of(result.m)
        exact += true_cell == cell
        distance_sum += cell_manhattan_distance(cell, true_cell)
        fresh.try_insert(
            Elite(
                genome=elite.genome,
                objective=result.f,
                measures=result.m,
                ancillary=result.alpha,
                source=EliteSource.GROUND_TRUTH,
                eval_seed=derive_seed(seed, "retention", position),
            )
        )
    n = len(cells)
    report = RetentionReport(
        retained_fraction=len(fresh) / n,
        exact_cell_fraction=exact / n,
        mean_manhattan_distance=distance_sum / n,
    )
    return fresh, report


METRICS_CSV_HEADER = [
    "outer_iteration",
    "evaluations_used",
    "coverage",
    "qd_score",
    "max_objective",
    "max_win_percentage",
    "surrogate_train_loss",
]

BUFFER_CSV_HEADER = ["f", "measure0", "measure1", *ANCILLARY_FIELDS, "genome"]


def save_metrics(history: list[OuterMetrics], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRICS_CSV_HEADER)
        for row in history:
            writer.writerow(
                [
                    row.outer_iteration,
                    row.evaluations_used,
                    repr(float(row.coverage)),
                    repr(float(row.qd_score)),
                    repr(float(row.max_objective)),
                    repr(float(row.max_win_percentage)),
                    "" if row.surrogate_train_loss is None else repr(float(row.surrogate_train_loss)),
                ]
            )


def load_metrics(path: str | Path) -> list[OuterMetrics]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != METRICS_CSV_HEADER:
            raise ValueError(f"unexpected metrics header: {header}")
        for row in reader:
            out.append(
                OuterMetrics(
                    outer_iteration=int(row[0]),
                    evaluations_used=int(row[1]),
                    coverage=float(row[2]),
                    qd_score=float(row[3]),
                    max_objective=float(row[4]),
                    max_win_percentage=float(row[5]),
                    surrogate_train_loss=float(row[6]) if row[6] else None,
                )
            )
    return out


def save_buffer(buffer: DataBuffer, path: str | Path) -> None:
    """Write the labeled dataset as CSV; the genome column holds the count
    vector joined by ';' (ancillary columns empty when absent)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(BUFFER_CSV_HEADER)
        for s in buffer.samples:
            alpha = [""] * len(ANCILLARY_FIELDS) if s.alpha is None else [repr(float(v)) for v in s.alpha.to_vector()]
            genome = ";".join(str(int(v)) for v in s.x)
            writer.writerow([repr(float(s.f)), repr(float(s.m[0])), repr(float(s.m[1])), *alpha, genome])


def load_buffer(path: str | Path) -> DataBuffer:
    buffer = DataBuffer()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != BUFFER_CSV_HEADER:
            raise ValueError(f"unexpected buffer header: {header}")
        for row in reader:
            counts = tuple(int(tok) for tok in row[-1].split(";"))
            alpha = None
            if row[3]:
                alpha = AncillaryData.from_vector([float(v) for v in row[3:-1]])
            buffer.append(
                LabeledSample(
                    x=np.asarray(counts, dtype=np.float64),
                    f=float(row[0]),
                    m=(float(row[1]), float(row[2])),
                    alpha=alpha,
                )
            )
    return buffer


def save_run(
    result: RunResult, out_dir: str | Path, config_lines: dict[str, str] | None = None
) -> None:
    """Persist a run: archive.csv, buffer.csv, metrics.csv, model.ckpt and
    config.txt (flat ``key = value`` lines) under ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_archive(result.archive, out / "archive.csv")
    save_buffer(result.buffer, out / "buffer.csv")
    save_metrics(result.metrics_history, out / "metrics.csv")
    if result.model is not None:
        save_checkpoint(result.model, out / "model.ckpt")
    if config_lines is not None:
        text = "".join(f"{key} = {value}\n" for key, value in sorted(config_lines.items()))
        (out / "config.txt").write_text(text)
