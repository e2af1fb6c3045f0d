"""A small surrogate-assisted run: inner search on the model, outer
evaluation on the simulator.

Each outer iteration retrains the model on everything evaluated so far,
runs a full MAP-Elites against the model's predictions, then pays real
games only for the surrogate archive's elites.
"""

from dataclasses import replace

from deckqd import dsa_me_run
from deckqd.config import resolve_config
from deckqd.experiments import context_from_config

resolved = resolve_config(
    overrides={
        "dsa_me.evaluation_budget": 400,
        "dsa_me.inner_iterations": 4000,
        "game.games_per_opponent": 10,
    }
)
context = context_from_config(resolved)
config = replace(context.base_config, seed=11)

result = dsa_me_run(
    config, context.evaluator(), context.cardset, context.constraints, context.space
)

print(f"budget {config.evaluation_budget}, used {result.evaluations_used} evaluations "
      f"over {len(result.metrics_history) - 1} outer iterations\n")
print("outer  evals  coverage  qd(-30)   best f   train loss")
for m in result.metrics_history[:: max(1, len(result.metrics_history) // 12)]:
    loss = "     -" if m.surrogate_train_loss is None else f"{m.surrogate_train_loss:6.4f}"
    print(
        f"{m.outer_iteration:5d}  {m.evaluations_used:5d}  {m.coverage:8.4f}  "
        f"{m.qd_score:7.1f}  {m.max_objective:7.2f}   {loss}"
    )

final = result.metrics_history[-1]
print(f"\nfinal: coverage {final.coverage:.4f}, qd {final.qd_score:.1f}, "
      f"best win rate {final.max_win_percentage:.2f}")
print(f"buffer grew to {len(result.buffer)} labeled decks")
