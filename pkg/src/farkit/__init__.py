"""farkit: functional AR(1) estimation on gridded curves.

Estimates the autoregression operator of a first-order functional time
series two ways: principal-component truncation with variance-threshold
selection, and continuous ridge regularization with cross-validated
strength. Ships a seeded Monte Carlo benchmark across three simulated
regimes, a preprocessing pipeline for half-hourly concentration data, and
a rolling one-step forecast backtest, all behind a small CLI.
"""

from .errors import (
    DegenerateSpectrumError,
    GridError,
    InsufficientDataError,
    NumericalError,
    SingularSystemError,
)
from .evaluate import (
    BenchmarkConfig,
    BenchmarkReport,
    CellResult,
    TheoryProbe,
    fit_method,
    ise,
    misfe,
    parse_method,
    rate_slope,
    regret_table,
    run_benchmark,
    tuning_summary,
    verify_bias_bound,
    worst_case_table,
)
from .fpca import SpectralDecomposition, component_scores, eigendecompose, fpca_far_fit, select_k
from .grid import Curve, QuadratureGrid, inner_product, l2_norm, make_trapezoid_grid, uniform_grid
from .moments import (
    FunctionalSample,
    OperatorEstimate,
    WeightedMomentPair,
    apply_kernel,
    sample_moments,
    to_weighted,
    unweight_kernel,
    weighted_moments,
)
from .preprocess import (
    PipelineConfig,
    RawDayRecord,
    RollingConfig,
    filter_and_interpolate,
    load_halfhourly_csv,
    preprocess_curves,
    rolling_forecast,
)
from .simulate import (
    REGIMES,
    RegimeSpec,
    TrueOperator,
    draw_regime_operator,
    fourier_basis,
    innovation_eigenvalues,
    simulate_far1,
)
from .tikhonov import (
    AlphaGrid,
    CvResult,
    application_alpha_grid,
    cv_select_alpha,
    default_alpha_grid,
    tikhonov_fit,
)

__version__ = "0.1.0"
