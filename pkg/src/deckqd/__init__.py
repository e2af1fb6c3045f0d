"""deckqd: surrogate-assisted MAP-Elites deckbuilding toolkit.

The package searches a discrete deck space with MAP-Elites, optionally
assisted by an online-trained surrogate model of a deterministic card-battle
simulator (MiniCard).  See the README for the module map and the demo
scripts for worked examples.
"""

from .archive import (
    Archive,
    Elite,
    EliteSource,
    EmptyArchiveError,
    InsertOutcome,
    MeasureSpace,
    cell_manhattan_distance,
)
from .cards import (
    Card,
    CardKind,
    CardSet,
    DeckConstraints,
    DeckGenome,
    deck_static_stats,
    encode_bag_of_cards,
    generate_cardset,
    perturb_deck,
    random_deck,
    sample_k_geometric,
)
from .dsa_me import (
    DsaMeConfig,
    RetentionReport,
    RunResult,
    SurrogateEvaluator,
    TrainingMode,
    dsa_me_run,
    elite_data_retrain,
    offline_pretrain,
    retention_analysis,
)
from .map_elites import EvaluationResult, Evaluator, MapElitesConfig, map_elites_run, select_parent
from .minicard import (
    EvalConfig,
    GameRecord,
    GameRules,
    MiniCardEvaluator,
    OpponentSuite,
    Winner,
    build_opponent_suite,
    default_measure_space,
    evaluate_deck,
    play_game,
)
from .surrogate import (
    AncillaryData,
    DataBuffer,
    LabeledSample,
    ModelKind,
    Prediction,
    SurrogateModel,
    TrainConfig,
    adam_step,
    elu,
    finite_difference_check,
    initialize_model,
    load_checkpoint,
    loss_and_gradients,
    save_checkpoint,
    train,
)

__version__ = "0.1.0"
