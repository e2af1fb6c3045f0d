"""Play one MiniCard game with the action trace switched on.

Both sides follow the same greedy policy; the only randomness is the deck
shuffle, so re-running this script prints the identical game.
"""

from deckqd import DeckConstraints, build_opponent_suite, generate_cardset, play_game, random_deck
from deckqd.rng import derive_rng

cardset = generate_cardset(seed=1, size=80)
constraints = DeckConstraints()
suite = build_opponent_suite(cardset, constraints, seed=17)

candidate = random_deck(cardset, constraints, derive_rng(7))
opponent = suite.decks[0]  # the aggro opponent

trace: list[str] = []
record = play_game(candidate, opponent, cardset, seed=42, trace=trace)

print(f"winner: {record.winner.value}, {record.turns} turns, "
      f"final health difference {record.final_health_diff:+.0f}")
print(f"A drew {record.cards_drawn_a} cards, spent {record.mana_spent_a} mana, "
      f"wasted {record.mana_wasted_a}, dealt {record.damage_dealt_a} damage")
print(f"A's hand sizes at turn starts: {record.hand_sizes_a}")

print("\nfirst 25 actions:")
for line in trace[:25]:
    print("  ", line)
print(f"  ... ({len(trace)} actions total)")
