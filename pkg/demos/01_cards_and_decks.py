"""Build a cardset, draw random decks, and apply the perturbation operator.

The search space is a vector of per-card copy counts: every deck holds
exactly 30 cards with at most two copies of each.  Perturbation replaces a
geometrically distributed number of cards with uniform redraws.
"""

import numpy as np

from deckqd import (
    DeckConstraints,
    deck_static_stats,
    encode_bag_of_cards,
    generate_cardset,
    perturb_deck,
    random_deck,
)
from deckqd.rng import derive_rng

cardset = generate_cardset(seed=1, size=80)
constraints = DeckConstraints()
print(f"cardset: {len(cardset)} cards, first three:")
for card in cardset.cards[:3]:
    print("  ", card)

rng = derive_rng(2024)
deck = random_deck(cardset, constraints, rng)
stats = deck_static_stats(deck, cardset)
print(f"\nrandom deck: {sum(deck.counts)} cards, "
      f"mana sum {stats.mana_sum:.0f}, variance {stats.mana_variance:.2f}, "
      f"{stats.minion_count} minions / {stats.spell_count} spells")

encoding = encode_bag_of_cards(deck)
print(f"bag-of-cards encoding: length {len(encoding)}, values {sorted(set(encoding.tolist()))}")

child = perturb_deck(deck, cardset, constraints, rng)
moved = sum(abs(a - b) for a, b in zip(deck.counts, child.counts))
print(f"\nperturbed child differs by L1 distance {moved}")

l1s = []
for _ in range(2000):
    child = perturb_deck(deck, cardset, constraints, rng)
    l1s.append(sum(abs(a - b) for a, b in zip(deck.counts, child.counts)))
print(f"mean L1 over 2000 perturbations: {np.mean(l1s):.2f} (small edits dominate)")
