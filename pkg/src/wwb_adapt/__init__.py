"""Closed-loop Bayesian adaptive sensing for radar frequency estimation.

Evaluates Weiss-Weinstein lower bounds on estimation error for array
measurement models with random initial phase, optimizes sensing parameters
(array scaling / PRF, antenna activations) against those bounds, and runs
particle-filter closed loops with Monte Carlo experiment support.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DegenerateBeliefError,
    NumericError,
    VersionError,
    WwbAdaptError,
)
from .signal_model import (
    Observation,
    SamplingMatrix,
    SourceParams,
    TdmMimoConfig,
    array_factor,
    build_tdm_sampling_matrix,
    log_likelihood,
    snr_db_to_linear,
    steering_vector,
    synthesize_observation,
    uniform_linear_array,
)
from .priors import (
    GaussianPrior,
    PriorBelief,
    TestPointDomain,
    UniformBoxPrior,
    approximate_from_particles,
    test_point_domain,
    xi_gaussian,
    xi_uniform,
)
from .optimize import AnnealConfig, anneal_maximize, anneal_maximize_batch, grid_scan
from .wwb import (
    CostQuery,
    ScalingCurve,
    WwbEvaluation,
    eta_acute,
    kp_wwb,
    rp_wwb,
    rp_wwb_batch,
    scaling_cost_curve,
    uc_wwb,
    wwb_cost,
)
from .filtering import (
    ParticleSet,
    empirical_moments,
    init_particles,
    measurement_update,
    motion_update,
    residual_resample,
)
from .controllers import (
    AntennaCandidate,
    DirectScaling,
    FixedScaling,
    LinearScaling,
    LutScaling,
    RandomScaling,
    ScalingLut,
    antenna_costs_exact,
    build_scaling_lut,
    enumerate_antenna_candidates,
    make_prior,
    select_antennas,
    select_scaling,
)
from .surrogate import (
    FeatureCodec,
    Mlp,
    TrainConfig,
    encode_input,
    load_model,
    make_candidate_ranker,
    predict,
    save_model,
    train,
)
from .harness import (
    ControllerSpec,
    MonteCarloResult,
    Scenario,
    TrialRecord,
    export_results,
    monte_carlo_mse,
    run_closed_loop,
)
