"""tdlab: the linear TD(lambda) family, its forward-view oracles, and a
deterministic benchmark harness for random Markov reward processes."""

from .core import (
    ConfigError,
    SparseVector,
    Trajectory,
    Transition,
    as_dense,
    dot,
    max_action_value,
    stack_action_features,
)
from .envs import (
    Mdp,
    Mrp,
    Representation,
    TileCoderConfig,
    build_representation,
    canonical_task,
    generate_mdp,
    generate_mrp,
    sample_mdp_step,
    sample_step,
    stationary_distribution,
    tile_code,
    true_values,
)
from .algos import (
    AccumulateTD,
    ReplaceTD,
    SarsaAccumulate,
    SarsaReplace,
    TabularTrueOnlineTD,
    TrueOnlineSarsa,
    TrueOnlineTD,
    TrueOnlineTDAlphaT,
    TrueOnlineWatkinsQ,
    epsilon_greedy,
    make_prediction_learner,
    run_control_episode,
    run_episode,
)
from .oracle import (
    ForwardViewRun,
    TheoremOneDiagnostics,
    accumulating_trace_nonrecursive,
    interim_lambda_return,
    lms_solution,
    n_step_return,
    offline_lambda_return,
    offline_lambda_return_algorithm,
    online_lambda_return_algorithm,
    prop2_condition_holds,
    theorem1_diagnostics,
    theorem1_ratio,
    watkins_interim_target,
)
from .harness import (
    BestPoint,
    CellResult,
    EquivalenceReport,
    SweepConfig,
    SweepResult,
    best_per_lambda,
    certify_equivalence,
    normalized_mse,
    paper_alpha_grid,
    paper_lambda_grid,
    run_sweep,
    sweep_to_csv,
)
from .rng import SplitMix64, mix64

__version__ = "0.1.0"
