"""Full counting statistics of weak quantum measurements with pre- and
post-selection: exact conditional distributions, characteristic functions,
weak-value families, second-order interpolation formulas, and a Monte Carlo
oracle for the complete protocol."""

from .errors import (
    BeyondValidity,
    ConfigError,
    DegenerateSubspace,
    DimMismatch,
    GridResolutionInsufficient,
    InvalidProbe,
    NonHermitian,
    NonUnitTrace,
    NotPositive,
    OrthogonalStates,
    SpanTooSmall,
    UnsupportedFunction,
    ValidityError,
    WeakStatsError,
    ZeroQVariance,
)
from .exact import (
    ConditionalDistribution,
    MeasurementSetup,
    ProbeObservable,
    charfunc_moment_fd,
    conditional_charfunc,
    conditional_pdf,
    conditional_probe_state,
    exact_moment,
    grid_convergence,
    joint_prob,
    normalization,
    number_operator,
    weak_regime_ratio,
)
from .hilbert import (
    DensityMatrix,
    SystemObservable,
    maximally_mixed,
    pure_state,
    spectral_decompose,
    trace_product,
    validate_density,
)
from .mc import (
    REJECTED,
    EnsembleResult,
    ProtocolConfig,
    ensemble,
    joint_table,
    protocol_rho_f,
    sample_run,
)
from .perturb import (
    ExpansionVariant,
    MomentEstimate,
    charfunc_obs,
    charfunc_p,
    charfunc_q,
    denominators,
    expectation_obs,
    moment_p_gaussian,
    moment_p_general,
    n_series,
    orthogonal_limit,
    validity_order,
    validity_ratios,
)
from .probe import (
    GaussianProbe,
    GridProbe,
    initial_charfunc,
    mixture_to_grid,
    p_representation,
    q_representation,
    quasi_average,
    to_grid,
)
from .spinhalf import (
    SpinSetup,
    fig_geometry,
    rho_from_bloch,
    scaling_formula,
    spin_exact_moment,
    spin_interp_moment,
    spin_normalization,
    spin_observable,
    spin_pdf,
    spin_weak_values,
    universal_scaling,
)
from .weakvalues import (
    CanonicalWeakValues,
    WeakValueTable,
    canonical_values,
    normal_weak_value,
    weak_charfunc,
    weak_value_table,
)

__version__ = "0.1.0"
