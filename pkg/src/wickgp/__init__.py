"""Hermite-spectral simulator for the Wick-renormalized Gross-Pitaevskii
equation with spatial white-noise potential."""

from .hermite import (
    CoefField,
    GridField,
    SpectralGrid,
    analyze,
    apply_spectral_multiplier,
    build_grid,
    derivative_and_position,
    hermite_1d,
    ladder,
    synthesize,
)
from .spaces import (
    SobolevIndex,
    check_truncation_estimates,
    duality_bracket,
    interpolation_check,
    smooth_truncate,
    sobolev_norm,
)
from .noise import (
    NoiseRealization,
    WickField,
    compute_Y,
    compute_YN,
    compute_counterterm,
    compute_wick,
    exp_weight,
    sample_noise,
)
from .dynamics import (
    IntegratorConfig,
    SimState,
    linear_flow,
    potential_flow,
    run_simulation,
    strang_step,
    u_from_v,
    v_from_u,
)
from .observables import (
    ObservableSeries,
    check_brezis_gallouet,
    check_gagliardo_nirenberg,
    focusing_event_predicate,
    sigma_norm,
    transformed_energy,
    transformed_mass,
)
from .harness import ExperimentConfig, RateFit, default_config, fit_rate, run_study

__version__ = "0.1.0"
