"""Vanilla MAP-Elites straight on the simulator (no surrogate).

Every candidate evaluation plays real games, so this demo uses a small
budget.  The archive tessellates (mean game turns) x (mean hand size); each
cell keeps the deck with the best mean health difference seen so far.
"""

import numpy as np

from deckqd import (
    Archive,
    DeckConstraints,
    MapElitesConfig,
    MiniCardEvaluator,
    build_opponent_suite,
    default_measure_space,
    generate_cardset,
    map_elites_run,
)

cardset = generate_cardset(seed=1, size=80)
constraints = DeckConstraints()
suite = build_opponent_suite(cardset, constraints, seed=17)
evaluator = MiniCardEvaluator(suite, games_per_opponent=10)

archive = Archive(default_measure_space())
config = MapElitesConfig(iterations=400, initial_population=100, batch_size=10, seed=3)
map_elites_run(evaluator, archive, cardset, constraints, config)

print(f"evaluated {config.iterations} decks")
print(f"filled cells: {len(archive)} / {archive.space.cell_count} "
      f"(coverage {archive.coverage():.3f})")
print(f"qd score (floor -30): {archive.qd_score(floor=-30.0):.1f}")
best = archive.best_elite()
print(f"best objective {best.objective:.2f} at measures "
      f"({best.measures[0]:.1f} turns, {best.measures[1]:.1f} cards in hand)")

grid = archive.heatmap()
filled = np.argwhere(~np.isnan(grid))
print("\nobjective by cell (row = turns bin, col = hand bin):")
for i in range(filled[:, 0].min(), filled[:, 0].max() + 1):
    row = []
    for j in range(filled[:, 1].min(), filled[:, 1].max() + 1):
        row.append("   . " if np.isnan(grid[i, j]) else f"{grid[i, j]:5.1f}")
    print("  ", " ".join(row))
