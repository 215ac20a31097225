"""Simulation lab for non-stationary Lipschitz contextual bandits."""

__version__ = "0.1.0"

from .baselines import run_oracle_restart, run_stationary_se, run_uniform_random
from .cmeta import (
    ReplaySchedule,
    RunLog,
    RunStream,
    active_arm_set,
    expected_replay_overhead,
    replay_probability,
    run_cmeta,
)
from .detector import (
    SigShiftReport,
    compute_shifts,
    is_unsafe,
    oracle_level,
    significant_regret,
    worst_case_shift_count,
)
from .environments import (
    Bump,
    Environment,
    Phase,
    RewardFunction,
    eval_mean,
    gap_table,
    global_shift_count,
    lipschitz_check,
    make_flip_env,
    make_global_shift_env,
    make_local_shift_env,
    make_stationary_hard,
    make_tv_budget_env,
    sample_round,
    true_gap,
    tv_upper_bound,
)
from .envio import dump_env, load_env
from .estimators import (
    BinEventLog,
    PlayEvent,
    eviction_scan,
    eviction_test,
    eviction_threshold,
    interval_gap_sum,
    iw_gap,
)
from .grid import BinId, ancestors, bin_of, contains, level_for, parent
from .harness import (
    ExperimentConfig,
    compute_regret,
    fit_exponent,
    load_config,
    run_experiment,
)

__all__ = [name for name in dir() if not name.startswith("_")]
