"""AIMD connections competing on a fluid network.

Submodules:

* :mod:`aimd_arena.network`: topology matrices, load matrix, lossless check.
* :mod:`aimd_arena.dynamics`: exact event-driven AIMD dynamics and the limit cycle.
* :mod:`aimd_arena.game`: protocol-selection game, equilibria in the loss weight.
* :mod:`aimd_arena.replicator`: delayed replicator dynamics over strategy shares.
* :mod:`aimd_arena.cli`: JSON-configured experiment runner (``aimd-arena``).
"""
from .dynamics import (
    StrategyProfile,
    average_throughput,
    drop_map,
    fixed_point,
    next_drop,
    simulate,
    verify_convergence,
)
from .errors import ModelInconsistencyError, ValidationError
from .game import (
    GameConfig,
    Strategy,
    best_response,
    classify_equilibrium,
    dominance_threshold,
    lambda_bounds,
    mixed_probability,
    payoff_matrix,
    payoff_tensor_3,
    profile_payoffs,
)
from .network import (
    build_topology,
    check_stability,
    compute_load_matrix,
    klimov,
    reentrant,
    single_server,
)
from .replicator import ReplicatorConfig, fitness, integrate, rest_point_check

__version__ = "0.1.0"
