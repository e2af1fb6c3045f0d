"""Fit the MLP surrogate on labeled decks and sanity-check its gradients.

The model maps a bag-of-cards encoding to (objective, two measures); targets
are standardized per output before the MSE loss.  The finite-difference
harness verifies backprop on the exact architecture in use.
"""

import numpy as np

from deckqd import (
    DataBuffer,
    DeckConstraints,
    LabeledSample,
    MiniCardEvaluator,
    ModelKind,
    TrainConfig,
    build_opponent_suite,
    encode_bag_of_cards,
    finite_difference_check,
    generate_cardset,
    initialize_model,
    random_deck,
    train,
)
from deckqd.rng import derive_rng, derive_seed

cardset = generate_cardset(seed=1, size=80)
constraints = DeckConstraints()
suite = build_opponent_suite(cardset, constraints, seed=17)
evaluator = MiniCardEvaluator(suite, games_per_opponent=10)

rng = derive_rng(100)
buffer = DataBuffer()
decks = [random_deck(cardset, constraints, rng) for _ in range(300)]
for i, deck in enumerate(decks):
    result = evaluator.evaluate(deck, derive_seed(100, i))
    buffer.append(LabeledSample(encode_bag_of_cards(deck), result.f, result.m, result.alpha))
print(f"labeled {len(buffer)} decks on the simulator")

model = initialize_model(ModelKind.MLP, input_dim=len(cardset), output_dim=3, seed=5)
error = finite_difference_check(model, buffer.samples[:4], h=1e-5)
print(f"gradient check vs central differences: max relative error {error:.2e}")

history = train(model, buffer, TrainConfig(epochs=40, shuffle_seed=1))
print(f"training loss: epoch 1 {history[0]:.4f} -> epoch 40 {history[-1]:.4f}")

holdout = [random_deck(cardset, constraints, rng) for _ in range(50)]
xs = np.stack([encode_bag_of_cards(d) for d in holdout])
truth = np.array(
    [evaluator.evaluate(d, derive_seed(200, i)).m for i, d in enumerate(holdout)]
)
predicted = model.predict_batch(xs)[:, 1:3]
print(f"held-out measure MSE on 50 fresh decks: {np.mean((predicted - truth) ** 2):.4f}")
print(f"(measure scales: turns ~{truth[:,0].mean():.1f}, hand ~{truth[:,1].mean():.1f})")
