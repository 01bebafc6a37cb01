"""Complex AMP with the Bernoulli-Gaussian MMSE denoiser.

Works over any operator whose columns have squared norm M/N (the dense
IID Gaussian matrix or the partial DFT). The matched-filter output is
rescaled by N/M so the pseudo-data is an (asymptotically) unbiased AWGN
observation of the signal; the Onsager memory term keeps the effective
noise Gaussian across iterations. For the MMSE denoiser the average
denoiser derivative equals the average posterior variance divided by the
pseudo-data noise variance, which is how the Onsager coefficient is
computed here.
"""

from dataclasses import dataclass

import numpy as np

from .denoiser import AwgnObservationModel, posterior_mean, posterior_variance
from .model import IidGaussianOperator, PartialDftOperator
from .tsr import RecoveryTrace, _VarianceGuard, _ensure_finite

__all__ = ["AmpState", "run_amp"]


@dataclass
class AmpState:
    """Loop-carried AMP state: the current estimate, the corrected
    residual, the memory coefficient applied to it next iteration, and the
    effective pseudo-data noise variance."""

    x_hat: np.ndarray
    residual: np.ndarray
    onsager_coeff: float = 0.0
    tau2: float = None
    iteration: int = 0


def run_amp(
    instance,
    prior,
    t_max=50,
    rel_tol=1e-8,
    damping=1.0,
    onsager=True,
    tau2_schedule=None,
):
    """Run AMP on one instance; returns a RecoveryTrace.

    tau2 is the effective per-entry noise variance of the pseudo-data. By
    default it is estimated from the residual, tau2 = (N/M) * ||r||^2 / M
    (the residual energy estimates sigma^2 plus the current MSE; the N/M
    factor converts to the signal domain under the M/N column
    normalization). tau2_schedule, if given, is a sequence of externally
    prescribed tau2 values (e.g. from state evolution) used for diagnosis
    instead of the empirical estimate.

    onsager=False disables the memory term (test hook: tracking of the
    state evolution must then visibly fail).
    """
    op = instance.operator
    if not isinstance(op, (IidGaussianOperator, PartialDftOperator)):
        raise TypeError(f"run_amp cannot use operator type {type(op).__name__}")
    if t_max < 1:
        raise ValueError("t_max must be >= 1")
    if not (0.0 < damping <= 1.0):
        raise ValueError("damping must be in (0, 1]")

    m, n = op.shape
    ratio = n / m
    y = instance.y
    x_true = instance.x_true
    guard = _VarianceGuard()

    label = "amp-dft" if isinstance(op, PartialDftOperator) else "amp-iid"
    state = AmpState(x_hat=np.zeros(n, dtype=complex),
                     residual=np.zeros(m, dtype=complex))
    trace = RecoveryTrace(algorithm=label)
    tau2_prev = None
    stop_reason = "max_iterations"

    for iteration in range(1, t_max + 1):
        correction = ratio * state.onsager_coeff * state.residual if onsager else 0.0
        residual = y - op.forward(state.x_hat) + correction
        if damping < 1.0 and iteration > 1:
            residual = damping * residual + (1.0 - damping) * state.residual
        _ensure_finite(residual, "residual", iteration)

        if tau2_schedule is not None:
            tau2 = float(tau2_schedule[min(iteration - 1, len(tau2_schedule) - 1)])
        else:
            tau2 = ratio * float(np.mean(np.abs(residual) ** 2))
        tau2 = guard.posterior(tau2)

        pseudo_data = state.x_hat + ratio * op.adjoint(residual)
        _ensure_finite(pseudo_data, "pseudo-data", iteration)

        awgn = AwgnObservationModel(snr=1.0 / tau2, prior=prior)
        x_hat = posterior_mean(pseudo_data, awgn)
        mean_var = float(np.mean(posterior_variance(pseudo_data, awgn)))
        _ensure_finite(x_hat, "denoised estimate", iteration)
        state.x_hat = x_hat
        state.residual = residual
        state.onsager_coeff = mean_var / tau2
        state.tau2 = tau2
        state.iteration = iteration

        mse = float(np.mean(np.abs(x_hat - x_true) ** 2))
        trace.record(
            mse,
            tau2=tau2,
            onsager_coeff=state.onsager_coeff,
            posterior_var=mean_var,
        )
        trace.estimate = x_hat
        trace.iterations_run = iteration

        if tau2_prev is not None:
            if abs(tau2 - tau2_prev) / tau2_prev < rel_tol:
                stop_reason = "converged"
                break
        tau2_prev = tau2

    trace.clamp_events = guard.events
    trace.stop_reason = stop_reason
    return trace
