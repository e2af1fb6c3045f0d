"""Experiment suite: presets, aggregation, persistence, failure handling."""

import csv

import pytest

from deckqd.config import ConfigError, resolve_config
from deckqd.dsa_me import TrainingMode
from deckqd.experiments import (
    ExperimentSuite,
    VARIANT_NAMES,
    _mean_stderr,
    context_from_config,
    load_summary,
    recompute_archive_metrics,
    run_suite,
    variant_config,
)
from deckqd.surrogate import ModelKind


SMOKE_OVERRIDES = {
    "deck.cardset_size": 30,
    "deck.deck_size": 12,
    "game.games_per_opponent": 2,
    "dsa_me.evaluation_budget": 60,
    "dsa_me.inner_iterations": 150,
    "dsa_me.initial_population": 30,
    "surrogate.epochs": 2,
    "suite.trials": 2,
}


@pytest.fixture(scope="module")
def smoke_context():
    return context_from_config(resolve_config(overrides=SMOKE_OVERRIDES))


def test_mean_stderr_hand_arithmetic():
    mean, stderr = _mean_stderr([2.0, 4.0, 6.0])
    assert mean == pytest.approx(4.0)
    assert stderr == pytest.approx(1.1547, abs=1e-4)


def test_mean_stderr_single_trial():
    assert _mean_stderr([3.0]) == (3.0, 0.0)


def test_variant_presets():
    base = context_from_config(resolve_config()).base_config
    assert variant_config("map_elites", base).surrogate_kind is None
    assert variant_config("dsa_me", base).surrogate_kind is ModelKind.MLP
    assert variant_config("lsa_me", base).surrogate_kind is ModelKind.LINEAR
    assert variant_config("dsa_me_ad", base).use_ancillary
    assert not variant_config("dsa_me", base).use_ancillary
    assert variant_config("dsa_me_no_reset", base).reset_inner_archive is False
    offline = variant_config("offline_dsa_me", base)
    assert offline.training_mode is TrainingMode.OFFLINE_RANDOM_PRETRAIN
    with pytest.raises(ConfigError):
        variant_config("nope", base)


def test_suite_validation():
    with pytest.raises(ConfigError):
        ExperimentSuite(variants=("bogus",))
    with pytest.raises(ValueError):
        ExperimentSuite(variants=("dsa_me", "dsa_me"))
    with pytest.raises(ValueError):
        ExperimentSuite(variants=("dsa_me",), trials=0)


def test_trial_seeds_are_paired():
    suite = ExperimentSuite(variants=("map_elites", "dsa_me"), trials=3, base_seed=5)
    assert suite.trial_seed(0) != suite.trial_seed(1)
    assert suite.trial_seed(2) == ExperimentSuite(
        variants=("lsa_me",), trials=3, base_seed=5
    ).trial_seed(2)


def test_run_suite_smoke(tmp_path, smoke_context):
    suite = ExperimentSuite(variants=("map_elites", "dsa_me"), trials=2, base_seed=9)
    out = tmp_path / "suite"
    table = run_suite(suite, smoke_context, out)
    assert not table.failures

    for variant in suite.variants:
        for trial in range(2):
            cell = out / variant / str(trial)
            assert (cell / "archive.csv").exists()
            assert (cell / "metrics.csv").exists()
            assert (cell / "config.txt").exists()
            assert (cell / "ccdf.csv").exists()
    assert (out / "summary.csv").exists()
    assert (out / "ccdf.csv").exists()
    assert (out / "pairings.csv").exists()

    loaded = load_summary(out / "summary.csv")
    assert {r.variant for r in loaded.rows} == set(suite.variants)
    for row in loaded.rows:
        assert row.trials == 2

    # no drift between live summary and persisted archives
    for variant in suite.variants:
        per_trial = [
            recompute_archive_metrics(
                out / variant / str(trial),
                smoke_context.space,
                smoke_context.base_config.qd_floor,
            )
            for trial in range(2)
        ]
        for metric in ("max_objective", "coverage", "qd_score"):
            mean = sum(m[metric] for m in per_trial) / 2
            assert loaded.value(variant, metric) == pytest.approx(mean, abs=1e-12)

    # max win percentage is not derivable from archive.csv; cross-check it
    # against the final row of each trial's metrics.csv instead
    from deckqd.dsa_me import load_metrics

    for variant in suite.variants:
        wins = [
            load_metrics(out / variant / str(trial) / "metrics.csv")[-1].max_win_percentage
            for trial in range(2)
        ]
        assert loaded.value(variant, "max_win_percentage") == pytest.approx(sum(wins) / 2)


def test_run_suite_reruns_byte_identical(tmp_path, smoke_context):
    suite = ExperimentSuite(variants=("map_elites",), trials=1, base_seed=4)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    run_suite(suite, smoke_context, out_a)
    run_suite(suite, smoke_context, out_b)
    assert (out_a / "summary.csv").read_bytes() == (out_b / "summary.csv").read_bytes()
    assert (out_a / "ccdf.csv").read_bytes() == (out_b / "ccdf.csv").read_bytes()
    assert (out_a / "map_elites" / "0" / "archive.csv").read_bytes() == (
        out_b / "map_elites" / "0" / "archive.csv"
    ).read_bytes()


def test_run_suite_records_partial_failures(tmp_path, smoke_context):
    """offline_frozen without a dsa_me source fails its cells but the suite
    completes and reports them."""
    suite = ExperimentSuite(variants=("map_elites", "offline_frozen"), trials=1, base_seed=2)
    out = tmp_path / "suite"
    table = run_suite(suite, smoke_context, out)
    assert len(table.failures) == 1
    assert table.failures[0][0] == "offline_frozen"
    assert (out / "failures.txt").exists()
    loaded = load_summary(out / "summary.csv")
    row = next(r for r in loaded.rows if r.variant == "offline_frozen")
    assert row.trials == 0 and row.mean is None
    # the healthy variant still aggregated
    assert loaded.value("map_elites", "coverage") > 0


def test_run_suite_frozen_consumes_dsa_me_artifacts(tmp_path, smoke_context):
    suite = ExperimentSuite(
        variants=("offline_frozen", "dsa_me", "offline_elite_data"), trials=1, base_seed=6
    )
    out = tmp_path / "suite"
    table = run_suite(suite, smoke_context, out)
    assert not table.failures
    assert (out / "offline_elite_data" / "0" / "retrained.ckpt").exists()
    for variant in suite.variants:
        assert (out / variant / "0" / "archive.csv").exists()


def test_pooled_ccdf_is_mean_of_trials(tmp_path, smoke_context):
    suite = ExperimentSuite(variants=("map_elites",), trials=2, base_seed=9)
    out = tmp_path / "suite"
    run_suite(suite, smoke_context, out)
    with open(out / "ccdf.csv", newline="") as fh:
        pooled = {float(r["threshold"]): float(r["fraction"]) for r in csv.DictReader(fh)}
    trials = []
    for trial in range(2):
        with open(out / "map_elites" / str(trial) / "ccdf.csv", newline="") as fh:
            trials.append({float(r["threshold"]): float(r["fraction"]) for r in csv.DictReader(fh)})
    for threshold, fraction in pooled.items():
        assert fraction == pytest.approx((trials[0][threshold] + trials[1][threshold]) / 2)
    # curves are non-increasing and cover [-30, 30] at integer thresholds
    values = [pooled[t] for t in sorted(pooled)]
    assert values == sorted(values, reverse=True)
    assert sorted(pooled) == [float(t) for t in range(-30, 31)]


def test_pairings_counts(tmp_path, smoke_context):
    suite = ExperimentSuite(variants=("map_elites", "dsa_me"), trials=2, base_seed=9)
    out = tmp_path / "suite"
    run_suite(suite, smoke_context, out)
    with open(out / "pairings.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 4  # one variant pair x four metrics
    for row in rows:
        assert int(row["wins_a"]) + int(row["wins_b"]) + int(row["ties"]) == 2


def test_all_variant_names_resolvable():
    from dataclasses import replace

    base = context_from_config(resolve_config()).base_config
    wired = replace(base, checkpoint_path="some.ckpt")  # frozen variants need one
    for name in VARIANT_NAMES:
        config = variant_config(name, wired)
        assert config.evaluation_budget == base.evaluation_budget
    with pytest.raises(ConfigError):
        variant_config("offline_frozen", base)
