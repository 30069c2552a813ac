"""Persistence exponent of integrated fractional Brownian motion.

Exact Gaussian simulation of the Lamperti-stationarized process through a
progressive Schur factorization of its Toeplitz correlation matrix, first
zero statistics, and truncated-exponential maximum likelihood estimation of
the tail slope.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    InsufficientData,
    NonPositiveDefinite,
    NumericalError,
    OutOfRange,
    PersistenceError,
    PrecisionExhausted,
    QuadratureFailure,
    ValidationError,
)
from .model import (  # noqa: E402
    GridSpec,
    Hurst,
    LampertiModel,
    ifbm_covariance,
    lamperti_correlation,
    lamperti_decay_check,
    make_grid,
    rice_interzero_distance,
)
from .toeplitz import (  # noqa: E402
    CoeffTable,
    cholesky_oracle,
    correlation_samples,
    load_table,
    save_table,
    schur_coefficients,
    stability_diagnostic,
)
from .rng import NoiseStream  # noqa: E402
from .simulate import (  # noqa: E402
    RecordSet,
    direct_ifbm_paths,
    path_statistics,
    read_records,
    run_series,
    simulate_series,
    survival_estimate,
    synthesize_first_zero,
    synthesize_full_path,
    write_records,
)
from .estimate import (  # noqa: E402
    SIGMA_FACTOR,
    PowerModel,
    TailWindow,
    aggregate_series,
    cramer_rao_paths,
    expected_slope_power_model,
    lnZ_std_truncated,
    mean_excess_function,
    ml_root,
    ml_slope,
    tail_window,
)
