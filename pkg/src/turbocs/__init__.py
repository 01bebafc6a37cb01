"""Turbo signal recovery and AMP over partial-DFT / IID sensing operators,
plus the scalar state-evolution machinery that predicts and orders their
per-iteration MSE."""

from .amp import AmpState, run_amp
from .denoiser import (
    AwgnObservationModel,
    mmse,
    mmse_derivative,
    mmse_mc_oracle,
    posterior_mean,
    posterior_variance,
)
from .harness import (
    ALGORITHMS,
    ExperimentConfig,
    ExperimentReport,
    emit_report,
    load_report,
    run_experiment,
    run_property_suite,
)
from .model import (
    BernoulliGaussianPrior,
    IidGaussianOperator,
    PartialDftOperator,
    ProblemInstance,
    dft,
    generate_instance,
    idft,
    sample_rows,
    sample_signal,
)
from .state_evolution import (
    NegativeDiscriminantError,
    SeParams,
    SeTrajectory,
    check_dominance,
    check_monotone_transfer,
    fixed_point_residual,
    se_amp,
    se_tsr,
)
from .tsr import RecoveryTrace, TsrState, run_tsr

__version__ = "0.1.0"
