"""Experiment suites: run algorithm variants over paired trial seeds and
summarize the comparison.

Each (variant, trial) cell is an independent run persisted under
``out_dir/<variant>/<trial>/``.  Trials are paired: trial t uses the same
derived seed for every variant, so per-seed ordering counts are meaningful
with few trials.  The suite emits ``summary.csv`` (mean and standard error
per metric), ``ccdf.csv`` (pooled threshold curves) and ``pairings.csv``
(per-seed ordering counts).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

from .archive import Archive, MeasureSpace, load_archive
from .cards import CardSet, DeckConstraints, generate_cardset
from .config import ConfigError, format_config
from .dsa_me import (
    DsaMeConfig,
    RunResult,
    TrainingMode,
    dsa_me_run,
    elite_data_retrain,
    load_buffer,
    max_win_percentage,
    save_run,
)
from .minicard import GameRules, MiniCardEvaluator, OpponentSuite, build_opponent_suite
from .rng import derive_seed
from .surrogate import ModelKind, TrainConfig, save_checkpoint

VARIANT_NAMES = (
    "map_elites",
    "offline_dsa_me",
    "lsa_me",
    "dsa_me",
    "offline_dsa_me_ad",
    "dsa_me_ad",
    "dsa_me_no_reset",
    "offline_frozen",
    "offline_elite_data",
)

METRIC_NAMES = ("max_objective", "max_win_percentage", "coverage", "qd_score")

CCDF_THRESHOLDS = [float(t) for t in range(-30, 31)]

SUMMARY_CSV_HEADER = ["variant", "metric", "mean", "stderr", "trials"]
CCDF_CSV_HEADER = ["variant", "threshold", "fraction"]


def variant_config(name: str, base: DsaMeConfig) -> DsaMeConfig:
    """Specialize the base configuration for a named algorithm variant."""
    if name == "map_elites":
        return replace(base, surrogate_kind=None)
    if name == "dsa_me":
        return replace(base, surrogate_kind=ModelKind.MLP, training_mode=TrainingMode.ONLINE)
    if name == "lsa_me":
        return replace(base, surrogate_kind=ModelKind.LINEAR, training_mode=TrainingMode.ONLINE)
    if name == "offline_dsa_me":
        return replace(
            base,
            surrogate_kind=ModelKind.MLP,
            training_mode=TrainingMode.OFFLINE_RANDOM_PRETRAIN,
        )
    if name == "offline_dsa_me_ad":
        return replace(
            base,
            surrogate_kind=ModelKind.MLP,
            training_mode=TrainingMode.OFFLINE_RANDOM_PRETRAIN,
            use_ancillary=True,
        )
    if name == "dsa_me_ad":
        return replace(
            base,
            surrogate_kind=ModelKind.MLP,
            training_mode=TrainingMode.ONLINE,
            use_ancillary=True,
        )
    if name == "dsa_me_no_reset":
        return replace(
            base,
            surrogate_kind=ModelKind.MLP,
            training_mode=TrainingMode.ONLINE,
            reset_inner_archive=False,
        )
    if name in ("offline_frozen", "offline_elite_data"):
        # run_suite wires checkpoint_path to the same-trial dsa_me artifacts;
        # standalone use requires dsa_me.checkpoint_path in the config
        if not base.checkpoint_path:
            raise ConfigError(
                f"{name} needs dsa_me.checkpoint_path or a dsa_me run in the same suite"
            )
        return replace(
            base,
            surrogate_kind=ModelKind.MLP,
            training_mode=TrainingMode.FROZEN_CHECKPOINT,
        )
    raise ConfigError(f"unknown variant {name!r}; valid: {', '.join(VARIANT_NAMES)}")


@dataclass(frozen=True)
class ExperimentSuite:
    variants: tuple[str, ...]
    trials: int = 5
    base_seed: int = 0

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if len(set(self.variants)) != len(self.variants):
            raise ValueError("variant names must be unique")
        for name in self.variants:
            if name not in VARIANT_NAMES:
                raise ConfigError(f"unknown variant {name!r}; valid: {', '.join(VARIANT_NAMES)}")

    def trial_seed(self, trial: int) -> int:
        return derive_seed(self.base_seed, "trial", trial)


@dataclass(frozen=True)
class ExperimentContext:
    """Everything a run needs besides its DsaMeConfig: the card domain, the
    archive measure space and the ground-truth evaluator settings."""

    cardset: CardSet
    constraints: DeckConstraints
    space: MeasureSpace
    opponents: OpponentSuite
    games_per_opponent: int
    rules: GameRules
    base_config: DsaMeConfig
    resolved: dict[str, object]

    def evaluator(self) -> MiniCardEvaluator:
        return MiniCardEvaluator(self.opponents, self.games_per_opponent, self.rules)


def context_from_config(resolved: dict[str, object]) -> ExperimentContext:
    cardset = generate_cardset(resolved["deck.cardset_seed"], resolved["deck.cardset_size"])
    constraints = DeckConstraints(
        deck_size=resolved["deck.deck_size"], max_copies=resolved["deck.max_copies"]
    )
    constraints.check_cardset(cardset)
    space = MeasureSpace(
        low=(resolved["archive.turns_low"], resolved["archive.hand_low"]),
        high=(resolved["archive.turns_high"], resolved["archive.hand_high"]),
        resolution=(resolved["archive.turns_cells"], resolved["archive.hand_cells"]),
    )
    opponents = build_opponent_suite(cardset, constraints, resolved["game.opponent_suite_seed"])
    kind_name = resolved["dsa_me.surrogate"]
    if kind_name not in ("mlp", "linear", "none"):
        raise ConfigError("dsa_me.surrogate must be one of: mlp, linear, none")
    try:
        mode = TrainingMode(resolved["dsa_me.training_mode"])
    except ValueError:
        valid = ", ".join(m.value for m in TrainingMode)
        raise ConfigError(f"dsa_me.training_mode must be one of: {valid}") from None
    base_config = DsaMeConfig(
        evaluation_budget=resolved["dsa_me.evaluation_budget"],
        inner_iterations=resolved["dsa_me.inner_iterations"],
        initial_population=resolved["dsa_me.initial_population"],
        inner_batch_size=resolved["dsa_me.inner_batch_size"],
        surrogate_kind=None if kind_name == "none" else ModelKind(kind_name),
        training_mode=mode if mode is not TrainingMode.FROZEN_CHECKPOINT else TrainingMode.ONLINE,
        reset_inner_archive=resolved["dsa_me.reset_inner_archive"],
        use_ancillary=resolved["dsa_me.use_ancillary"],
        offline_pretrain_count=resolved["dsa_me.offline_pretrain_count"],
        offline_train_rounds=resolved["dsa_me.offline_train_rounds"],
        checkpoint_path=resolved["dsa_me.checkpoint_path"] or None,
        k_probability=resolved["deck.k_probability"],
        qd_floor=resolved["dsa_me.qd_floor"],
        seed=resolved["run.seed"],
        train=TrainConfig(
            learning_rate=resolved["surrogate.learning_rate"],
            batch_size=resolved["surrogate.batch_size"],
            epochs=resolved["surrogate.epochs"],
            beta1=resolved["surrogate.beta1"],
            beta2=resolved["surrogate.beta2"],
            epsilon=resolved["surrogate.epsilon"],
        ),
    )
    return ExperimentContext(
        cardset=cardset,
        constraints=constraints,
        space=space,
        opponents=opponents,
        games_per_opponent=resolved["game.games_per_opponent"],
        rules=GameRules(),
        base_config=base_config,
        resolved=resolved,
    )


def run_metrics(result: RunResult, qd_floor: float) -> dict[str, float]:
    return {
        "max_objective": result.archive.max_objective(),
        "max_win_percentage": max_win_percentage(result.archive),
        "coverage": result.archive.coverage(),
        "qd_score": result.archive.qd_score(floor=qd_floor),
    }


@dataclass(frozen=True)
class SummaryRow:
    variant: str
    metric: str
    mean: float | None
    stderr: float | None
    trials: int


@dataclass
class SummaryTable:
    rows: list[SummaryRow]
    failures: list[tuple[str, int, str]]  # (variant, trial, message)

    def value(self, variant: str, metric: str) -> float:
        for row in self.rows:
            if row.variant == variant and row.metric == metric:
                if row.mean is None:
                    raise ValueError(f"no successful trials for {variant}")
                return row.mean
        raise KeyError((variant, metric))


def _mean_stderr(values: list[float]) -> tuple[float, float]:
    n = len(values)
    mean = sum(values) / n
    if n < 2:
        return mean, 0.0
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var) / math.sqrt(n)


def _execute_cell(
    variant: str,
    trial: int,
    suite: ExperimentSuite,
    context: ExperimentContext,
    out_dir: Path,
) -> RunResult:
    seed = suite.trial_seed(trial)
    base = replace(context.base_config, seed=seed)
    cell_dir = out_dir / variant / str(trial)

    if variant == "offline_frozen":
        source = out_dir / "dsa_me" / str(trial) / "model.ckpt"
        if source.exists():
            base = replace(base, checkpoint_path=str(source))
    elif variant == "offline_elite_data":
        source = out_dir / "dsa_me" / str(trial) / "buffer.csv"
        if not source.exists():
            raise ConfigError("offline_elite_data requires a dsa_me run in the same suite")
        buffer = load_buffer(source)
        model = elite_data_retrain(buffer, base, seed)
        cell_dir.mkdir(parents=True, exist_ok=True)
        retrained = cell_dir / "retrained.ckpt"
        save_checkpoint(model, retrained)
        base = replace(base, checkpoint_path=str(retrained))

    config = variant_config(variant, base)
    result = dsa_me_run(
        config, context.evaluator(), context.cardset, context.constraints, context.space
    )
    config_lines = format_config(
        {**context.resolved, "run.seed": seed, "run.variant": variant}
    )
    save_run(result, cell_dir, config_lines)
    _save_trial_ccdf(result.archive, variant, cell_dir / "ccdf.csv")
    return result


def _save_trial_ccdf(archive: Archive, variant: str, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CCDF_CSV_HEADER)
        for threshold, fraction in archive.ccdf(CCDF_THRESHOLDS):
            writer.writerow([variant, repr(float(threshold)), repr(float(fraction))])


def run_suite(
    suite: ExperimentSuite, context: ExperimentContext, out_dir: str | Path
) -> SummaryTable:
    """Run every (variant, trial) cell and summarize.

    Failed cells are recorded and skipped in the aggregation; the suite
    carries on.  ``dsa_me`` runs before the frozen-model variants of the
    same trial because they consume its artifacts.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ordered = sorted(
        suite.variants, key=lambda name: 0 if name == "dsa_me" else 1
    )
    per_metric: dict[tuple[str, str], list[float]] = {}
    per_trial: dict[tuple[str, int], dict[str, float]] = {}
    archives: dict[str, list[Archive]] = {name: [] for name in suite.variants}
    failures: list[tuple[str, int, str]] = []

    for trial in range(suite.trials):
        for variant in ordered:
            try:
                result = _execute_cell(variant, trial, suite, context, out)
            except Exception as exc:  # noqa: BLE001 - cell isolation is the point
                failures.append((variant, trial, f"{type(exc).__name__}: {exc}"))
                continue
            metrics = run_metrics(result, context.base_config.qd_floor)
            per_trial[(variant, trial)] = metrics
            for metric, value in metrics.items():
                per_metric.setdefault((variant, metric), []).append(value)
            archives[variant].append(result.archive)

    rows = []
    for variant in suite.variants:
        for metric in METRIC_NAMES:
            values = per_metric.get((variant, metric), [])
            if values:
                mean, stderr = _mean_stderr(values)
                rows.append(SummaryRow(variant, metric, mean, stderr, len(values)))
            else:
                rows.append(SummaryRow(variant, metric, None, None, 0))
    table = SummaryTable(rows=rows, failures=failures)

    _save_summary(table, out / "summary.csv")
    _save_pooled_ccdf(archives, out / "ccdf.csv")
    _save_pairings(suite, per_trial, out / "pairings.csv")
    if failures:
        (out / "failures.txt").write_text(
            "".join(f"{v}/{t}: {msg}\n" for v, t, msg in failures)
        )
    return table


def _save_summary(table: SummaryTable, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_CSV_HEADER)
        for row in table.rows:
            writer.writerow(
                [
                    row.variant,
                    row.metric,
                    "" if row.mean is None else repr(float(row.mean)),
                    "" if row.stderr is None else repr(float(row.stderr)),
                    row.trials,
                ]
            )


def load_summary(path: str | Path) -> SummaryTable:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != SUMMARY_CSV_HEADER:
            raise ValueError(f"unexpected summary header: {header}")
        for row in reader:
            rows.append(
                SummaryRow(
                    variant=row[0],
                    metric=row[1],
                    mean=float(row[2]) if row[2] else None,
                    stderr=float(row[3]) if row[3] else None,
                    trials=int(row[4]),
                )
            )
    return SummaryTable(rows=rows, failures=[])


def _save_pooled_ccdf(archives: dict[str, list[Archive]], path: Path) -> None:
    """Pooled curve per variant: mean over trials of the per-trial fraction."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CCDF_CSV_HEADER)
        for variant, archive_list in archives.items():
            if not archive_list:
                continue
            curves = [dict(a.ccdf(CCDF_THRESHOLDS)) for a in archive_list]
            for threshold in CCDF_THRESHOLDS:
                fraction = sum(c[threshold] for c in curves) / len(curves)
                writer.writerow([variant, repr(float(threshold)), repr(float(fraction))])


def _save_pairings(
    suite: ExperimentSuite,
    per_trial: dict[tuple[str, int], dict[str, float]],
    path: Path,
) -> None:
    """Per-seed ordering counts for every variant pair and metric."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["variant_a", "variant_b", "metric", "wins_a", "wins_b", "ties"])
        names = list(suite.variants)
        for i, a in enumerate(names):
            for b in names[i + 1 :]:
                for metric in METRIC_NAMES:
                    wins_a = wins_b = ties = 0
                    for trial in range(suite.trials):
                        ma = per_trial.get((a, trial))
                        mb = per_trial.get((b, trial))
                        if ma is None or mb is None:
                            continue
                        if ma[metric] > mb[metric]:
                            wins_a += 1
                        elif mb[metric] > ma[metric]:
                            wins_b += 1
                        else:
                            ties += 1
                    writer.writerow([a, b, metric, wins_a, wins_b, ties])


def recompute_archive_metrics(
    run_dir: str | Path, space: MeasureSpace, qd_floor: float
) -> dict[str, float]:
    """Metrics recomputed from a persisted archive.csv (win percentage is not
    stored there, so it is not included)."""
    archive = load_archive(Path(run_dir) / "archive.csv", space)
    return {
        "max_objective": archive.max_objective(),
        "coverage": archive.coverage(),
        "qd_score": archive.qd_score(floor=qd_floor),
    }
