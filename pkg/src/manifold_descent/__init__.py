"""Accelerated gradient dynamics via controlled invariant manifolds.

Simulates the family of continuous-time accelerated-gradient ODEs obtained
by stabilizing the implicit manifold x2 + beta*grad f(x1) = 0 (plus the
classical gradient-flow/heavy-ball baselines and the NAG-SC and triple
momentum parameterizations), and verifies their certificates: manifold
invariance, exponential storage decay and Lyapunov monotonicity.

The hot integration loop has a compiled (Cython) core with a pure-Python
fallback, selected at import; see `manifold_descent.kernel_info`.
"""

from ._kernel import HAVE_COMPILED, default_kernel
from .bench import (
    PersistenceRow,
    RunRecord,
    SweepSpec,
    compare,
    persistence_experiment,
    run_one,
    sweep,
)
from .diagnostics import (
    DiagnosticsReport,
    build_report,
    check_lyapunov,
    check_manifold_invariance,
    check_storage_decay,
    fit_decay,
    fit_decay_rate,
    max_undershoot,
    settling_time,
)
from .dynamics import (
    FAMILIES,
    GD_FLOW,
    HBF,
    HEAVY_BALL,
    NAG_SC,
    PNI,
    PROPOSED,
    TRIPLE_MOMENTUM,
    MethodSpec,
    ParameterWarning,
    PhaseState,
    control_pni,
    control_transversal,
    lyapunov_basic,
    lyapunov_exp,
    manifold_residual,
    on_manifold_start,
    rhs,
    select_params,
    standing_start,
    storage,
)
from .integrate import (
    IntegratorConfig,
    PerturbationSpec,
    Trajectory,
    UnsupportedOracleError,
    closed_form_quadratic,
    closed_form_trajectory,
    simulate,
    step,
    write_trajectory_csv,
)
from .objective import (
    ConvexityParams,
    Quadratic,
    check_derivatives,
    shifted_quadratic,
    spd_quadratic,
    unit_quadratic,
)

__version__ = "0.1.0"


def kernel_info() -> str:
    """Which integration kernel is active ('compiled' or 'pure')."""
    return default_kernel()
