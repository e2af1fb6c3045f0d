"""MiniCard: a deterministic, seeded two-player card-battle simulator.

The simulator provides the expensive "ground truth" evaluation for the
optimizer: play a batch of games between a candidate deck and a fixed
opponent suite, then report objective (mean final health difference),
measures (mean game length in turns, mean hand size) and ancillary gameplay
statistics.  Deck shuffling is the only source of randomness; both players
follow the same deterministic greedy policy, so a game is a pure function of
(decks, seed).
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass

import numpy as np

from .archive import EliteSource, MeasureSpace
from .cards import CardKind, CardSet, DeckConstraints, DeckGenome, deck_static_stats
from .map_elites import EvaluationResult, Evaluator
from .rng import derive_rng, derive_seed
from .surrogate import AncillaryData

OBJECTIVE_LOWER_BOUND = -30.0
OBJECTIVE_UPPER_BOUND = 30.0


@dataclass(frozen=True)
class GameRules:
    """Fixed game constants.

    Mana available on a player's turn t is min(t, max_mana).  Drawing at
    max_hand burns the card; drawing from an empty deck deals escalating
    fatigue damage (1, 2, 3, ...), which guarantees termination well before
    the max_turns hard stop.
    """

    starting_health: int = 30
    first_player_hand: int = 3
    second_player_hand: int = 4
    max_mana: int = 10
    max_hand: int = 10
    max_turns: int = 60


class Winner(enum.Enum):
    PLAYER_A = "a"
    PLAYER_B = "b"
    DRAW = "draw"


@dataclass(frozen=True)
class GameRecord:
    """Outcome and per-player-A bookkeeping of one game.

    ``turns`` is the number of rounds started (total player turns across
    both sides divided by two, rounded up).  ``final_health_diff`` is A's
    health minus B's health with each floored at 0, so it lies in
    [-30, 30].  ``hand_sizes_a`` holds A's hand size at the start of each of
    A's turns, measured after the draw step.
    """

    winner: Winner
    turns: int
    final_health_diff: float
    hand_sizes_a: tuple[int, ...]
    damage_dealt_a: int
    cards_drawn_a: int
    mana_spent_a: int
    mana_wasted_a: int


class _CardTable:
    """Per-id card attributes unpacked into parallel tuples for the hot loop."""

    __slots__ = ("is_minion", "cost", "attack", "health", "damage")

    def __init__(self, cardset: CardSet):
        self.is_minion = tuple(c.kind is CardKind.MINION for c in cardset.cards)
        self.cost = tuple(c.mana_cost for c in cardset.cards)
        self.attack = tuple(c.attack or 0 for c in cardset.cards)
        self.health = tuple(c.health or 0 for c in cardset.cards)
        self.damage = tuple(c.damage or 0 for c in cardset.cards)


class _PlayerState:
    __slots__ = (
        "deck",
        "hand",
        "board",
        "health",
        "next_fatigue",
        "mana",
        "turns_taken",
        "damage_dealt",
        "cards_drawn",
        "mana_spent",
        "mana_wasted",
        "hand_sizes",
    )

    def __init__(self, deck: list[int], health: int):
        self.deck = deck  # top of the deck is the end of the list
        self.hand: list[int] = []
        self.board: list[list[int]] = []  # entries [card_id, attack, health]
        self.health = health
        self.next_fatigue = 1
        self.mana = 0
        self.turns_taken = 0
        self.damage_dealt = 0
        self.cards_drawn = 0
        self.mana_spent = 0
        self.mana_wasted = 0
        self.hand_sizes: list[int] = []


class GameState:
    """Mutable state of a game in progress; ``active`` indexes the player
    whose turn it is."""

    __slots__ = ("table", "rules", "players", "active", "over", "winner_idx")

    def __init__(self, table: _CardTable, rules: GameRules, players: tuple[_PlayerState, _PlayerState]):
        self.table = table
        self.rules = rules
        self.players = players
        self.active = 0
        self.over = False
        self.winner_idx: int | None = None  # None means draw when over

    def _hero_damage(self, defender_idx: int, amount: int) -> None:
        defender = self.players[defender_idx]
        defender.health -= amount
        if defender.health <= 0 and not self.over:
            self.over = True
            self.winner_idx = 1 - defender_idx


def _draw_card(game: GameState, trace: list[str] | None) -> None:
    ps = game.players[game.active]
    tag = "AB"[game.active]
    if ps.deck:
        card = ps.deck.pop()
        ps.cards_drawn += 1
        if len(ps.hand) < game.rules.max_hand:
            ps.hand.append(card)
            if trace is not None:
                trace.append(f"{tag} draw card={card}")
        elif trace is not None:
            trace.append(f"{tag} draw burned card={card}")
    else:
        dmg = ps.next_fatigue
        ps.next_fatigue += 1
        if trace is not None:
            trace.append(f"{tag} fatigue damage={dmg}")
        ps.health -= dmg
        if ps.health <= 0:
            game.over = True
            game.winner_idx = 1 - game.active


def greedy_policy_turn(game: GameState, trace: list[str] | None = None) -> None:
    """Play the active player's turn with the fixed greedy policy.

    The turn's card has already been drawn and mana set.  First every minion
    already on the board attacks, trading into an enemy minion it can kill
    without dying (lowest card id among such targets, earliest board slot on
    ties) and hitting the enemy hero otherwise.  Then cards are played
    repeatedly: the highest-cost affordable card, ties broken by lowest card
    id; spells damage the enemy hero, minions enter play and attack from the
    owner's next turn onward.  Unspent mana is recorded as wasted.
    """
    actor_idx = game.active
    actor = game.players[actor_idx]
    defender = game.players[1 - actor_idx]
    table = game.table
    tag = "AB"[actor_idx]

    # Attack phase: only minions played on earlier turns are on the board.
    for minion in list(actor.board):
        if game.over:
            break
        attack = minion[1]
        my_health = minion[2]
        best_idx = -1
        best_card = -1
        for t_idx, target in enumerate(defender.board):
            if attack >= target[2] and target[1] < my_health:
                if best_idx < 0 or target[0] < best_card:
                    best_idx = t_idx
                    best_card = target[0]
        if best_idx >= 0:
            target = defender.board[best_idx]
            actor.damage_dealt += attack
            defender.damage_dealt += target[1]
            minion[2] -= target[1]
            del defender.board[best_idx]
            if trace is not None:
                trace.append(f"{tag} attack minion={minion[0]} target={target[0]}")
        else:
            actor.damage_dealt += attack
            if trace is not None:
                trace.append(f"{tag} attack hero damage={attack}")
            game._hero_damage(1 - actor_idx, attack)

    # Play phase.
    costs = table.cost
    while not game.over:
        mana = actor.mana
        best_pos = -1
        best_cost = -1
        best_card = -1
        for pos, card_id in enumerate(actor.hand):
            c = costs[card_id]
            if c <= mana and (c > best_cost or (c == best_cost and card_id < best_card)):
                best_pos = pos
                best_cost = c
                best_card = card_id
        if best_pos < 0:
            break
        del actor.hand[best_pos]
        actor.mana = mana - best_cost
        actor.mana_spent += best_cost
        if table.is_minion[best_card]:
            actor.board.append([best_card, table.attack[best_card], table.health[best_card]])
            if trace is not None:
                trace.append(f"{tag} play minion card={best_card} cost={best_cost}")
        else:
            dmg = table.damage[best_card]
            actor.damage_dealt += dmg
            if trace is not None:
                trace.append(f"{tag} play spell card={best_card} cost={best_cost} damage={dmg}")
            game._hero_damage(1 - actor_idx, dmg)

    actor.mana_wasted += actor.mana
    if trace is not None:
        trace.append(f"{tag} end mana_wasted={actor.mana}")


def play_game(
    deck_a: DeckGenome,
    deck_b: DeckGenome,
    cardset: CardSet,
    seed: int,
    rules: GameRules = GameRules(),
    trace: list[str] | None = None,
    _table: _CardTable | None = None,
) -> GameRecord:
    """Play one full game, player A moving first.

    Both decks are shuffled by a single Mersenne Twister stream seeded with
    ``seed`` (A's deck first), which is the game's only stochasticity.  Each
    round both players take a turn: draw (with burn/fatigue rules), set mana
    to min(round, max_mana), then act via the greedy policy.  The game stops
    when a hero reaches 0 health or after ``rules.max_turns`` rounds, in
    which case the higher-health player wins (draw on equal health).

    When ``trace`` is a list, one line per action is appended.  Grammar
    (actor is ``A`` or ``B``, values are integers)::

        <actor> draw card=<id>
        <actor> draw burned card=<id>
        <actor> fatigue damage=<n>
        <actor> attack minion=<id> target=<id>
        <actor> attack hero damage=<n>
        <actor> play minion card=<id> cost=<c>
        <actor> play spell card=<id> cost=<c> damage=<d>
        <actor> end mana_wasted=<n>
    """
    table = _table if _table is not None else _CardTable(cardset)
    shuffle_rng = random.Random(seed)
    pile_a = deck_a.card_instances()
    pile_b = deck_b.card_instances()
    shuffle_rng.shuffle(pile_a)
    shuffle_rng.shuffle(pile_b)

    state_a = _PlayerState(pile_a, rules.starting_health)
    state_b = _PlayerState(pile_b, rules.starting_health)
    game = GameState(table, rules, (state_a, state_b))

    # initial hands count as drawn cards; tiny decks just draw what they have
    for _ in range(min(rules.first_player_hand, len(pile_a))):
        state_a.hand.append(pile_a.pop())
        state_a.cards_drawn += 1
    for _ in range(min(rules.second_player_hand, len(pile_b))):
        state_b.hand.append(pile_b.pop())
        state_b.cards_drawn += 1

    for round_no in range(1, rules.max_turns + 1):
        for actor_idx in (0, 1):
            game.active = actor_idx
            ps = game.players[actor_idx]
            ps.turns_taken += 1
            _draw_card(game, trace)
            if game.over:
                break
            ps.mana = min(round_no, rules.max_mana)
            if actor_idx == 0:
                ps.hand_sizes.append(len(ps.hand))
            greedy_policy_turn(game, trace)
            if game.over:
                break
        if game.over:
            break

    if game.over:
        winner = (Winner.PLAYER_A, Winner.PLAYER_B)[game.winner_idx]
    elif state_a.health > state_b.health:
        winner = Winner.PLAYER_A
    elif state_b.health > state_a.health:
        winner = Winner.PLAYER_B
    else:
        winner = Winner.DRAW

    health_a = max(state_a.health, 0)
    health_b = max(state_b.health, 0)
    return GameRecord(
        winner=winner,
        turns=(state_a.turns_taken + state_b.turns_taken + 1) // 2,
        final_health_diff=float(health_a - health_b),
        hand_sizes_a=tuple(state_a.hand_sizes),
        damage_dealt_a=state_a.damage_dealt,
        cards_drawn_a=state_a.cards_drawn,
        mana_spent_a=state_a.mana_spent,
        mana_wasted_a=state_a.mana_wasted,
    )


@dataclass(frozen=True)
class OpponentSuite:
    """Fixed opponent decks a candidate is evaluated against."""

    cardset: CardSet
    decks: tuple[DeckGenome, ...]
    names: tuple[str, ...]


def build_opponent_suite(
    cardset: CardSet, constraints: DeckConstraints, seed: int
) -> OpponentSuite:
    """Generate the default three-deck suite from a suite seed.

    Decks are sampled with cost-biased weights: the aggro deck strongly
    favors cheap cards (weight (max_cost + 1 - cost)^4), midrange is
    uniform, and control favors expensive cards (weight cost^4).  Card ids
    at max_copies are masked out, so sampling always terminates.  The strong
    bias keeps the three opponents strategically distinct, which makes the
    candidate deck's own pace matter in every matchup.
    """
    constraints.check_cardset(cardset)
    costs = np.asarray(cardset.costs, dtype=np.float64)
    max_cost = costs.max()
    profiles = (
        ("aggro", (max_cost + 1.0 - costs) ** 4),
        ("midrange", np.ones_like(costs)),
        ("control", costs**4),
    )
    decks = []
    names = []
    for index, (name, weights) in enumerate(profiles):
        rng = derive_rng(seed, "opponent", index)
        counts = [0] * len(cardset)
        live = weights.copy()
        for _ in range(constraints.deck_size):
            p = live / live.sum()
            card_id = int(rng.choice(len(cardset), p=p))
            counts[card_id] += 1
            if counts[card_id] >= constraints.max_copies:
                live[card_id] = 0.0
        decks.append(DeckGenome(tuple(counts)))
        names.append(name)
    return OpponentSuite(cardset=cardset, decks=tuple(decks), names=tuple(names))


@dataclass(frozen=True)
class EvalConfig:
    games_per_opponent: int = 20
    base_seed: int = 0

    def __post_init__(self) -> None:
        if self.games_per_opponent < 1:
            raise ValueError("games_per_opponent must be >= 1")


def evaluate_deck(
    deck: DeckGenome,
    suite: OpponentSuite,
    config: EvalConfig,
    rules: GameRules = GameRules(),
) -> EvaluationResult:
    """Evaluate a candidate deck against the whole opponent suite.

    Plays ``games_per_opponent`` games as player A against each suite deck
    with per-game seeds derived from (base_seed, opponent index, game
    index).  Aggregation order is opponent-major, game-minor, so results are
    reproducible.  Returns objective f (mean final health difference),
    measures (mean turns, mean per-game mean hand size) and ancillary data.
    """
    table = _CardTable(suite.cardset)
    games = 0
    wins = 0
    sum_diff = 0.0
    sum_turns = 0.0
    sum_hand = 0.0
    sum_damage = 0.0
    sum_drawn = 0.0
    sum_spent = 0.0
    sum_wasted = 0.0
    for opp_index, opp_deck in enumerate(suite.decks):
        for game_index in range(config.games_per_opponent):
            seed = derive_seed(config.base_seed, opp_index, game_index)
            rec = play_game(deck, opp_deck, suite.cardset, seed, rules, _table=table)
            games += 1
            wins += rec.winner is Winner.PLAYER_A
            sum_diff += rec.final_health_diff
            sum_turns += rec.turns
            # hand_sizes_a is only empty under degenerate custom rules
            if rec.hand_sizes_a:
                sum_hand += sum(rec.hand_sizes_a) / len(rec.hand_sizes_a)
            sum_damage += rec.damage_dealt_a
            sum_drawn += rec.cards_drawn_a
            sum_spent += rec.mana_spent_a
            sum_wasted += rec.mana_wasted_a
    stats = deck_static_stats(deck, suite.cardset)
    alpha = AncillaryData(
        win_percentage=wins / games,
        total_damage=sum_damage / games,
        cards_drawn=sum_drawn / games,
        mana_spent=sum_spent / games,
        mana_wasted=sum_wasted / games,
        mana_sum=stats.mana_sum,
        mana_variance=stats.mana_variance,
        minion_count=float(stats.minion_count),
        spell_count=float(stats.spell_count),
    )
    return EvaluationResult(
        f=sum_diff / games, m=(sum_turns / games, sum_hand / games), alpha=alpha
    )


def default_measure_space() -> MeasureSpace:
    """Archive bounds used for MiniCard: turns in [1, 40], hand size in
    [0, 10], 20x20 cells."""
    return MeasureSpace(low=(1.0, 0.0), high=(40.0, 10.0), resolution=(20, 20))


class MiniCardEvaluator(Evaluator):
    """Ground-truth Evaluator backed by the MiniCard simulator."""

    elite_source = EliteSource.GROUND_TRUTH
    has_ancillary = True

    def __init__(
        self,
        suite: OpponentSuite,
        games_per_opponent: int = 20,
        rules: GameRules = GameRules(),
    ):
        self.suite = suite
        self.games_per_opponent = games_per_opponent
        self.rules = rules

    def evaluate(self, genome: DeckGenome, seed: int) -> EvaluationResult:
        config = EvalConfig(games_per_opponent=self.games_per_opponent, base_seed=seed)
        return evaluate_deck(genome, self.suite, config, self.rules)
