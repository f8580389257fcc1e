"""Order-based disclosure policies for bandits with behavioral agents."""
from .behavior import BehaviorConfig, check_assumption_compliance, choose_arm, estimate
from .core import (ArmStats, BanditInstance, Outcome, RewardTape, Subhistory, anonymize,
                   arm_stats, tape_reward)
from .engine import SimTrace, herding_indicator, regret_of, run, run_batch
from .errors import ConfigError, ContractError
from .graph import (InfoGraph, LevelSpec, build_full_disclosure, build_l_level,
                    build_three_level, build_two_level, export_dot, subhistory_fraction,
                    validate_transitive)
from .presets import build_preset

__version__ = "0.1.0"
