"""Compare algorithm variants over paired trial seeds (reduced scale).

Runs vanilla MAP-Elites against the deep and linear surrogate variants,
persists every run under ./out_demo_suite/, and prints the summary table.
The full-scale protocol lives in tests/test_acceptance.py and the `suite`
CLI subcommand.
"""

from pathlib import Path

from deckqd.config import resolve_config
from deckqd.experiments import ExperimentSuite, context_from_config, run_suite

resolved = resolve_config(
    overrides={
        "dsa_me.evaluation_budget": 300,
        "dsa_me.inner_iterations": 2000,
        "game.games_per_opponent": 5,
        "suite.trials": 2,
    }
)
context = context_from_config(resolved)
suite = ExperimentSuite(variants=("map_elites", "lsa_me", "dsa_me"), trials=2, base_seed=77)

out = Path("out_demo_suite")
table = run_suite(suite, context, out)

print(f"per-run artifacts under {out}/<variant>/<trial>/\n")
print(f"{'variant':>12} {'metric':<20} {'mean':>10} {'stderr':>10}")
for row in table.rows:
    print(f"{row.variant:>12} {row.metric:<20} {row.mean:10.3f} {row.stderr:10.3f}")

print("\npaired ordering counts are in", out / "pairings.csv")
print("pooled threshold curves are in", out / "ccdf.csv")
