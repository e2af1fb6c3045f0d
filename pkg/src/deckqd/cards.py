"""Discrete deck search space: cards, genomes, constraints and operators.

A deck is represented as a copy-count vector over a generated cardset (the
"bag of cards" encoding).  All randomness flows through explicit
``numpy.random.Generator`` arguments so that every operator is a pure
function of its inputs.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class CardKind(enum.Enum):
    MINION = "minion"
    SPELL = "spell"


@dataclass(frozen=True)
class Card:
    """A single card. Minions carry attack/health, spells carry damage."""

    id: int
    kind: CardKind
    mana_cost: int
    attack: int | None = None
    health: int | None = None
    damage: int | None = None

    def __post_init__(self) -> None:
        if self.mana_cost < 0:
            raise ValueError(f"card {self.id}: mana_cost must be >= 0")
        if self.kind is CardKind.MINION:
            if self.attack is None or self.health is None or self.damage is not None:
                raise ValueError(f"card {self.id}: minions need attack/health and no damage")
            if self.attack < 0 or self.health < 1:
                raise ValueError(f"card {self.id}: attack >= 0 and health >= 1 required")
        else:
            if self.damage is None or self.attack is not None or self.health is not None:
                raise ValueError(f"card {self.id}: spells need damage and no attack/health")
            if self.damage < 0:
                raise ValueError(f"card {self.id}: damage must be >= 0")


@dataclass(frozen=True)
class CardSet:
    """An ordered, immutable collection of cards with ids 0..len-1.

    ``seed`` records the generator seed; loading from CSV sets it to -1
    because the file format does not store it.
    """

    cards: tuple[Card, ...]
    seed: int = -1

    def __post_init__(self) -> None:
        for i, card in enumerate(self.cards):
            if card.id != i:
                raise ValueError(f"card ids must be 0..{len(self.cards) - 1} in order")

    def __len__(self) -> int:
        return len(self.cards)

    @property
    def costs(self) -> tuple[int, ...]:
        return tuple(c.mana_cost for c in self.cards)


@dataclass(frozen=True)
class DeckConstraints:
    deck_size: int = 30
    max_copies: int = 2

    def __post_init__(self) -> None:
        if self.deck_size < 1 or self.max_copies < 1:
            raise ValueError("deck_size and max_copies must be >= 1")

    def check_cardset(self, cardset: CardSet) -> None:
        if self.deck_size > len(cardset) * self.max_copies:
            raise ValueError(
                f"deck_size {self.deck_size} exceeds capacity "
                f"{len(cardset)} cards x {self.max_copies} copies"
            )


@dataclass(frozen=True)
class DeckGenome:
    """Copy-count vector over a cardset; the point searched by MAP-Elites."""

    counts: tuple[int, ...]

    def validate(self, constraints: DeckConstraints, cardset_size: int) -> None:
        if len(self.counts) != cardset_size:
            raise ValueError("genome length does not match cardset size")
        if any(c < 0 or c > constraints.max_copies for c in self.counts):
            raise ValueError("a card count is outside [0, max_copies]")
        if sum(self.counts) != constraints.deck_size:
            raise ValueError("counts must sum to deck_size")

    def card_instances(self) -> list[int]:
        """Expand to the multiset of card ids, one entry per copy."""
        return [card_id for card_id, n in enumerate(self.counts) for _ in range(n)]

    def to_line(self) -> str:
        return ",".join(str(c) for c in self.counts)

    @classmethod
    def from_line(cls, line: str) -> "DeckGenome":
        return cls(tuple(int(tok) for tok in line.strip().split(",")))


@dataclass(frozen=True)
class DeckStats:
    """Static statistics of the deck's card multiset."""

    mana_sum: float
    mana_variance: float
    minion_count: int
    spell_count: int


def generate_cardset(seed: int, size: int, max_mana: int = 10) -> CardSet:
    """Generate a deterministic cardset from (seed, size).

    Draws come from numpy's PCG64 seeded with ``SeedSequence([seed, size])``.
    Per card, in order: kind (minion with probability 0.7), cost uniform in
    1..max_mana, then for minions attack = cost + u with u in {-1, 0, 1}
    (clamped at 0) and health = cost + v with v in {0, 1, 2}; for spells
    damage = cost + 1.  Costs scale stats so expensive cards are individually
    stronger, which is what makes cheap-vs-expensive deck building a real
    trade-off for the optimizer.
    """
    if size < 2:
        raise ValueError("cardset size must be >= 2")
    rng = np.random.default_rng(np.random.SeedSequence([seed & ((1 << 64) - 1), size]))
    cards = []
    for card_id in range(size):
        is_minion = rng.random() < 0.7
        cost = int(rng.integers(1, max_mana + 1))
        if is_minion:
            attack = max(cost + int(rng.integers(-1, 2)), 0)
            health = cost + int(rng.integers(0, 3))
            cards.append(Card(card_id, CardKind.MINION, cost, attack=attack, health=health))
        else:
            cards.append(Card(card_id, CardKind.SPELL, cost, damage=cost + 1))
    return CardSet(tuple(cards), seed=seed)


def random_deck(
    cardset: CardSet, constraints: DeckConstraints, rng: np.random.Generator
) -> DeckGenome:
    """Draw a uniform random valid deck.

    Card ids are drawn uniformly with replacement; draws that would exceed
    max_copies are discarded until deck_size copies are placed.
    """
    constraints.check_cardset(cardset)
    size = len(cardset)
    max_copies = constraints.max_copies
    counts = [0] * size
    placed = 0
    while placed < constraints.deck_size:
        card_id = int(rng.integers(size))
        if counts[card_id] < max_copies:
            counts[card_id] += 1
            placed += 1
    return DeckGenome(tuple(counts))


def sample_k_geometric(rng: np.random.Generator, p: float = 0.5, max_k: int = 1) -> int:
    """Sample k in [1, max_k] from a truncated geometric distribution.

    P(k) is proportional to (1-p)^(k-1) * p, renormalized over 1..max_k
    (truncation by renormalization, not censoring).  Sampled by inverse CDF.
    """
    if not 0.0 < p < 1.0:
        raise ValueError("p must be in (0, 1)")
    if max_k < 1:
        raise ValueError("max_k must be >= 1")
    if max_k == 1:
        return 1
    q = 1.0 - p
    u = rng.random()
    # CDF(k) = (1 - q^k) / (1 - q^max_k); invert for the smallest integer k.
    k = math.ceil(math.log1p(-u * (1.0 - q**max_k)) / math.log(q))
    return min(max(k, 1), max_k)


def perturb_deck(
    parent: DeckGenome,
    cardset: CardSet,
    constraints: DeckConstraints,
    rng: np.random.Generator,
    k_probability: float = 0.5,
) -> DeckGenome:
    """Replace k cards of the parent with uniformly drawn cards.

    k is drawn from the truncated geometric distribution with max_k equal to
    deck_size.  Removal picks k instances uniformly without replacement from
    the parent's card multiset; each insertion draws card ids uniformly,
    redrawing while the drawn id is already at max_copies.  Termination is
    guaranteed because removal frees capacity before insertion starts.
    """
    deck_size = constraints.deck_size
    max_copies = constraints.max_copies
    size = len(cardset)
    k = sample_k_geometric(rng, p=k_probability, max_k=deck_size)

    counts = list(parent.counts)
    # Uniform sampling without replacement via swap-and-shrink on the
    # expanded instance list.
    instances = parent.card_instances()
    remaining = deck_size
    for _ in range(k):
        idx = int(rng.integers(remaining))
        counts[instances[idx]] -= 1
        remaining -= 1
        instances[idx] = instances[remaining]
    inserted = 0
    while inserted < k:
        card_id = int(rng.integers(size))
        if counts[card_id] < max_copies:
            counts[card_id] += 1
            inserted += 1
    return DeckGenome(tuple(counts))


def encode_bag_of_cards(deck: DeckGenome) -> np.ndarray:
    """Encode a deck as a float vector of per-card copy counts."""
    return np.asarray(deck.counts, dtype=np.float64)


def deck_static_stats(deck: DeckGenome, cardset: CardSet) -> DeckStats:
    """Compute mana and composition statistics over the deck's multiset.

    mana_variance is the population variance (divide by deck_size).
    """
    deck_size = sum(deck.counts)
    mana_sum = 0
    minion_count = 0
    for card_id, n in enumerate(deck.counts):
        if n == 0:
            continue
        card = cardset.cards[card_id]
        mana_sum += n * card.mana_cost
        if card.kind is CardKind.MINION:
            minion_count += n
    mean = mana_sum / deck_size
    var = 0.0
    for card_id, n in enumerate(deck.counts):
        if n:
            var += n * (cardset.cards[card_id].mana_cost - mean) ** 2
    return DeckStats(
        mana_sum=float(mana_sum),
        mana_variance=var / deck_size,
        minion_count=minion_count,
        spell_count=deck_size - minion_count,
    )


CARDSET_CSV_HEADER = ["id", "kind", "cost", "attack", "health", "damage"]


def save_cardset(cardset: CardSet, path: str | Path) -> None:
    """Write the cardset as CSV with empty fields for non-applicable stats."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CARDSET_CSV_HEADER)
        for card in cardset.cards:
            writer.writerow(
                [
                    card.id,
                    card.kind.value,
                    card.mana_cost,
                    "" if card.attack is None else card.attack,
                    "" if card.health is None else card.health,
                    "" if card.damage is None else card.damage,
                ]
            )


def load_cardset(path: str | Path) -> CardSet:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != CARDSET_CSV_HEADER:
            raise ValueError(f"unexpected cardset header: {header}")
        cards = []
        for row in reader:
            kind = CardKind(row[1])
            cards.append(
                Card(
                    id=int(row[0]),
                    kind=kind,
                    mana_cost=int(row[2]),
                    attack=int(row[3]) if row[3] else None,
                    health=int(row[4]) if row[4] else None,
                    damage=int(row[5]) if row[5] else None,
                )
            )
    return CardSet(tuple(cards))


def save_deck(deck: DeckGenome, path: str | Path) -> None:
    Path(path).write_text(deck.to_line() + "\n")


def load_deck(path: str | Path) -> DeckGenome:
    return DeckGenome.from_line(Path(path).read_text())
