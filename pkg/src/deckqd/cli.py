"""Command-line front end.

Subcommands: ``run`` (one variant, one seed), ``suite`` (full comparison),
``retention`` (surrogate-vs-ground-truth cell analysis of a saved run),
``heatmap`` and ``ccdf`` (exports from a saved archive), ``pretrain``
(offline model on random decks) and ``replay`` (re-evaluate a saved deck).
Every subcommand accepts ``--config`` (flat key = value file), ``--seed``
and ``--out``.  Exit codes: 0 success, 1 configuration error, 2 partial
suite failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .archive import Archive, load_archive, save_heatmap
from .config import ConfigError, format_config, resolve_config
from .dsa_me import (
    SurrogateEvaluator,
    TrainingMode,
    dsa_me_run,
    offline_pretrain,
    retention_analysis,
    save_buffer,
    save_run,
)
from .experiments import (
    CCDF_CSV_HEADER,
    CCDF_THRESHOLDS,
    ExperimentSuite,
    context_from_config,
    run_metrics,
    run_suite,
    variant_config,
)
from .map_elites import MapElitesConfig, map_elites_run
from .cards import load_deck
from .rng import derive_seed
from .surrogate import ANCILLARY_FIELDS, load_checkpoint, save_checkpoint


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="deckqd",
        description="Surrogate-assisted MAP-Elites deckbuilding experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", type=Path, default=None, help="flat key = value config file")
        p.add_argument("--seed", type=int, default=None, help="override run.seed")
        p.add_argument("--out", type=Path, default=None, help="output file or directory")

    p_run = sub.add_parser("run", help="run a single algorithm variant")
    add_common(p_run)
    p_run.add_argument("--variant", default=None, help="algorithm variant (default: run.variant)")

    p_suite = sub.add_parser("suite", help="run the full variant comparison")
    add_common(p_suite)
    p_suite.add_argument("--trials", type=int, default=None, help="override suite.trials")

    p_ret = sub.add_parser("retention", help="surrogate archive retention analysis of a saved run")
    add_common(p_ret)
    p_ret.add_argument("--run-dir", type=Path, required=True)

    p_heat = sub.add_parser("heatmap", help="export a saved archive as an objective grid")
    add_common(p_heat)
    p_heat.add_argument("--run-dir", type=Path, required=True)

    p_ccdf = sub.add_parser("ccdf", help="export threshold curves of a saved archive")
    add_common(p_ccdf)
    p_ccdf.add_argument("--run-dir", type=Path, required=True)

    p_pre = sub.add_parser("pretrain", help="train an offline model on random decks")
    add_common(p_pre)
    p_pre.add_argument("--count", type=int, default=None, help="override offline_pretrain_count")

    p_replay = sub.add_parser("replay", help="re-evaluate a saved deck on the simulator")
    add_common(p_replay)
    p_replay.add_argument("--deck", type=Path, required=True, help="one-line count vector file")

    return parser


def _resolved(args: argparse.Namespace, extra: dict[str, object] | None = None):
    overrides: dict[str, object] = dict(extra or {})
    if args.seed is not None:
        overrides["run.seed"] = args.seed
    return resolve_config(args.config, overrides)


def _require_out(args: argparse.Namespace) -> Path:
    if args.out is None:
        raise ConfigError("--out is required for this command")
    return args.out


def _cmd_run(args: argparse.Namespace) -> int:
    resolved = _resolved(args)
    if args.variant is not None:
        resolved["run.variant"] = args.variant
    context = context_from_config(resolved)
    variant = resolved["run.variant"]
    config = variant_config(variant, context.base_config)
    result = dsa_me_run(
        config, context.evaluator(), context.cardset, context.constraints, context.space
    )
    out = _require_out(args)
    save_run(result, out, format_config({**resolved, "run.variant": variant}))
    metrics = run_metrics(result, config.qd_floor)
    print(f"variant={variant} evaluations={result.evaluations_used}")
    for name, value in metrics.items():
        print(f"{name} = {value!r}")
    return 0


def _cmd_suite(args: argparse.Namespace) -> int:
    extra: dict[str, object] = {}
    if args.trials is not None:
        extra["suite.trials"] = args.trials
    resolved = _resolved(args, extra)
    context = context_from_config(resolved)
    suite = ExperimentSuite(
        variants=tuple(v.strip() for v in str(resolved["suite.variants"]).split(",") if v.strip()),
        trials=resolved["suite.trials"],
        base_seed=resolved["run.seed"],
    )
    out = _require_out(args)
    table = run_suite(suite, context, out)
    for row in table.rows:
        mean = "failed" if row.mean is None else f"{row.mean:.4f} +/- {row.stderr:.4f}"
        print(f"{row.variant:>20} {row.metric:<20} {mean} (trials={row.trials})")
    if table.failures:
        for variant, trial, message in table.failures:
            print(f"FAILED {variant}/{trial}: {message}", file=sys.stderr)
        return 2
    return 0


def _context_for_run_dir(args: argparse.Namespace, run_dir: Path):
    config_path = run_dir / "config.txt"
    if not config_path.exists():
        raise ConfigError(f"{config_path} not found; is this a run directory?")
    overrides: dict[str, object] = {}
    if args.seed is not None:
        overrides["run.seed"] = args.seed
    resolved = resolve_config(config_path, overrides)
    return resolved, context_from_config(resolved)


def _cmd_retention(args: argparse.Namespace) -> int:
    resolved, context = _context_for_run_dir(args, args.run_dir)
    model = load_checkpoint(args.run_dir / "model.ckpt")
    seed = resolved["run.seed"]
    surrogate_archive = Archive(context.space)
    inner = MapElitesConfig(
        iterations=resolved["dsa_me.inner_iterations"],
        initial_population=resolved["dsa_me.initial_population"],
        batch_size=resolved["dsa_me.inner_batch_size"],
        seed=derive_seed(seed, "retention-inner"),
    )
    map_elites_run(
        SurrogateEvaluator(model),
        surrogate_archive,
        context.cardset,
        context.constraints,
        inner,
        context.base_config.k_probability,
    )
    _, report = retention_analysis(
        surrogate_archive, context.evaluator(), context.space, seed
    )
    lines = (
        f"retained_fraction = {report.retained_fraction!r}\n"
        f"exact_cell_fraction = {report.exact_cell_fraction!r}\n"
        f"mean_manhattan_distance = {report.mean_manhattan_distance!r}\n"
    )
    print(lines, end="")
    out = args.out if args.out is not None else args.run_dir / "retention.txt"
    Path(out).write_text(lines)
    return 0


def _cmd_heatmap(args: argparse.Namespace) -> int:
    _, context = _context_for_run_dir(args, args.run_dir)
    archive = load_archive(args.run_dir / "archive.csv", context.space)
    out = args.out if args.out is not None else args.run_dir / "heatmap.csv"
    save_heatmap(archive, out)
    print(f"wrote {out}")
    return 0


def _cmd_ccdf(args: argparse.Namespace) -> int:
    resolved, context = _context_for_run_dir(args, args.run_dir)
    archive = load_archive(args.run_dir / "archive.csv", context.space)
    out = args.out if args.out is not None else args.run_dir / "ccdf.csv"
    with open(out, "w", newline="") as fh:
        fh.write(",".join(CCDF_CSV_HEADER) + "\n")
        for threshold, fraction in archive.ccdf(CCDF_THRESHOLDS):
            fh.write(f"{resolved['run.variant']},{threshold!r},{fraction!r}\n")
    print(f"wrote {out}")
    return 0


def _cmd_pretrain(args: argparse.Namespace) -> int:
    extra: dict[str, object] = {}
    if args.count is not None:
        extra["dsa_me.offline_pretrain_count"] = args.count
    resolved = _resolved(args, extra)
    context = context_from_config(resolved)
    config = replace(context.base_config, training_mode=TrainingMode.ONLINE)
    model, buffer = offline_pretrain(
        context.evaluator(),
        resolved["dsa_me.offline_pretrain_count"],
        config,
        context.cardset,
        context.constraints,
    )
    out = _require_out(args)
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(model, out / "model.ckpt")
    save_buffer(buffer, out / "buffer.csv")
    (out / "config.txt").write_text(
        "".join(f"{k} = {v}\n" for k, v in sorted(format_config(resolved).items()))
    )
    print(f"pretrained on {len(buffer)} decks -> {out}")
    return 0


def _cmd_replay(args: argparse.Namespace) -> int:
    resolved = _resolved(args)
    context = context_from_config(resolved)
    deck = load_deck(args.deck)
    try:
        deck.validate(context.constraints, len(context.cardset))
    except ValueError as exc:
        raise ConfigError(f"deck file {args.deck} is not valid here: {exc}") from exc
    result = context.evaluator().evaluate(deck, resolved["run.seed"])
    print(f"f = {result.f!r}")
    print(f"m0 = {result.m[0]!r}")
    print(f"m1 = {result.m[1]!r}")
    for name in ANCILLARY_FIELDS:
        print(f"{name} = {getattr(result.alpha, name)!r}")
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "suite": _cmd_suite,
    "retention": _cmd_retention,
    "heatmap": _cmd_heatmap,
    "ccdf": _cmd_ccdf,
    "pretrain": _cmd_pretrain,
    "replay": _cmd_replay,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1


def console_main() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    console_main()
