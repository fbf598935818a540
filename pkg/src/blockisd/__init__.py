"""Block iterative support detection for massive-MIMO downlink channel estimation."""

from .baselines import OracleInfo, bp_recover, oracle_ls
from .channel import ChannelProfile, Cir, generate_cir, profile_to_support, vehicular_a
from .exceptions import ConfigurationError, DimensionError, RankDeficiencyError
from .harness import (
    NmseRecord,
    RunConfig,
    load_config,
    nmse,
    overhead_report,
    run_sweep,
    run_trial,
)
from .isd import (
    IsdParams,
    RecoveryOutput,
    TerminationReason,
    block_isd_recover,
    block_vote,
    detect_support,
    first_significant_jump,
    isd_recover,
    jump_threshold,
)
from .pilots import (
    ColumnOrder,
    Measurement,
    PilotPlan,
    SensingMatrix,
    build_sensing_matrix,
    g_to_h,
    h_to_g,
    make_pilot_plan,
    measure,
    p_to_theta,
    theta_to_p,
)
from .solver import (
    BpdnSolver,
    SolverParams,
    SolverResult,
    TruncatedBpProblem,
    min_norm_feasible,
    solve_truncated_bp,
)

__version__ = "0.1.0"
