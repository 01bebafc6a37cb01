"""Turbo signal recovery over a partial-DFT operator.

Two modules exchange extrinsic messages about the transform-domain vector
z = F x: module A is an LMMSE estimator of z from the sub-sampled noisy
observations (a per-entry convex combination, since the selection operator
has 0/1 diagonal Gram entries), module B applies the Bernoulli-Gaussian
MMSE denoiser entrywise in the signal domain. Extrinsic means/variances
are formed by Gaussian information subtraction on both handoffs.
"""

from dataclasses import dataclass, field

import numpy as np

from .denoiser import AwgnObservationModel, posterior_mean, posterior_variance
from .model import PartialDftOperator, dft, idft

__all__ = ["TsrState", "RecoveryTrace", "run_tsr", "VARIANCE_FLOOR", "VARIANCE_CEIL"]

# Guard range for extrinsic variances: information subtraction divides by
# (1/v_post - 1/v_pri), which finite-size fluctuations can drive to zero
# or below even though the infinite-size analysis keeps it positive.
VARIANCE_FLOOR = 1e-13
VARIANCE_CEIL = 1e13


@dataclass
class TsrState:
    """Message state carried across turbo iterations: the extrinsic input
    of the LMMSE module (z domain) and of the denoiser module (x domain),
    with their scalar variances. Everything else is transient."""

    z_a_pri: np.ndarray
    v_a_pri: float
    x_b_pri: np.ndarray = None
    v_b_pri: float = None
    iteration: int = 0


@dataclass
class RecoveryTrace:
    """Per-iteration diagnostics of one algorithm run on one instance.

    mse[t] is ||x_hat - x_true||^2 / N of the iteration-(t+1) posterior
    estimate; scalars holds the per-iteration variance trackers keyed by
    name (algorithm-specific); clamp_events counts variance guards that
    fired anywhere in the run.
    """

    algorithm: str
    mse: list = field(default_factory=list)
    scalars: dict = field(default_factory=dict)
    clamp_events: int = 0
    estimate: np.ndarray = None
    iterations_run: int = 0
    stop_reason: str = ""

    def record(self, mse_value, **named):
        self.mse.append(float(mse_value))
        for key, value in named.items():
            self.scalars.setdefault(key, []).append(float(value))


class _VarianceGuard:
    """Clamp scalar variances into [floor, ceil], counting every event.

    Posterior variances are nonnegative by construction, so an underflow
    means (numerically) perfect information and is floored. Extrinsic
    variances come from a precision difference that finite-size
    fluctuations can drive to zero or negative, which means no extrinsic
    information; those are sent to the ceiling (the standard turbo/VAMP
    guard).
    """

    def __init__(self, floor=VARIANCE_FLOOR, ceil=VARIANCE_CEIL):
        self.floor = floor
        self.ceil = ceil
        self.events = 0

    def posterior(self, value):
        if not np.isfinite(value):
            self.events += 1
            return self.ceil
        if value < self.floor:
            self.events += 1
            return self.floor
        if value > self.ceil:
            self.events += 1
            return self.ceil
        return value

    def extrinsic(self, value):
        if not np.isfinite(value) or value <= 0.0:
            self.events += 1
            return self.ceil
        if value < self.floor:
            self.events += 1
            return self.floor
        if value > self.ceil:
            self.events += 1
            return self.ceil
        return value


def _ensure_finite(vec, what, iteration):
    if not np.all(np.isfinite(vec)):
        raise FloatingPointError(
            f"non-finite values in {what} at iteration {iteration}; aborting"
        )


def _information_subtraction(v_post, v_pri, guard):
    """Extrinsic variance 1 / (1/v_post - 1/v_pri), guarded."""
    denom = 1.0 / v_post - 1.0 / v_pri
    return guard.extrinsic(1.0 / denom if denom != 0.0 else np.inf)


def run_tsr(instance, prior, t_max=50, rel_tol=1e-8, damping=1.0):
    """Run turbo recovery on one instance; returns a RecoveryTrace.

    Stops at t_max or when the posterior variance of the denoiser module
    changes by less than rel_tol (relative). damping in (0, 1] blends each
    new extrinsic message with the previous one; 1.0 (the default) is the
    plain undamped iteration.
    """
    op = instance.operator
    if not isinstance(op, PartialDftOperator):
        raise TypeError(f"run_tsr needs a PartialDftOperator, got {type(op).__name__}")
    if t_max < 1:
        raise ValueError("t_max must be >= 1")
    if not (0.0 < damping <= 1.0):
        raise ValueError("damping must be in (0, 1]")

    n = op.n
    m = op.m
    rows = op.selected_rows
    sigma2 = instance.sigma2
    y = instance.y
    x_true = instance.x_true
    guard = _VarianceGuard()

    state = TsrState(z_a_pri=np.zeros(n, dtype=complex), v_a_pri=1.0)
    trace = RecoveryTrace(algorithm="tsr-dft")
    v_b_post_prev = None
    stop_reason = "max_iterations"

    for iteration in range(1, t_max + 1):
        z_a_pri, v_a_pri = state.z_a_pri, state.v_a_pri
        x_a_pri = idft(z_a_pri)

        # LMMSE update of z: observed entries shrink toward y, the rest
        # pass through untouched (selection Gram diagonal is 0/1).
        gain = v_a_pri / (v_a_pri + sigma2)
        z_a_post = z_a_pri.copy()
        z_a_post[rows] += gain * (y - z_a_pri[rows])
        _ensure_finite(z_a_post, "LMMSE posterior of z", iteration)

        x_a_post = idft(z_a_post)
        v_a_post = guard.posterior(v_a_pri - (m / n) * v_a_pri * gain)

        # Extrinsic message of x toward the denoiser.
        v_b_pri = _information_subtraction(v_a_post, v_a_pri, guard)
        x_b_pri = v_b_pri * (x_a_post / v_a_post - x_a_pri / v_a_pri)
        if damping < 1.0 and iteration > 1:
            x_b_pri = damping * x_b_pri + (1.0 - damping) * state.x_b_pri
            v_b_pri = damping * v_b_pri + (1.0 - damping) * state.v_b_pri
        _ensure_finite(x_b_pri, "extrinsic mean of x", iteration)
        state.x_b_pri, state.v_b_pri = x_b_pri, v_b_pri

        z_b_pri = dft(x_b_pri)

        # Entrywise MMSE denoising under the scalar AWGN model.
        awgn = AwgnObservationModel(snr=1.0 / v_b_pri, prior=prior)
        x_b_post = posterior_mean(x_b_pri, awgn)
        v_b_post = guard.posterior(float(np.mean(posterior_variance(x_b_pri, awgn))))
        _ensure_finite(x_b_post, "denoiser posterior mean", iteration)

        z_b_post = dft(x_b_post)

        # Extrinsic message of z back toward the LMMSE module.
        v_a_pri_new = _information_subtraction(v_b_post, v_b_pri, guard)
        z_a_pri_new = v_a_pri_new * (z_b_post / v_b_post - z_b_pri / v_b_pri)
        if damping < 1.0:
            z_a_pri_new = damping * z_a_pri_new + (1.0 - damping) * z_a_pri
            v_a_pri_new = damping * v_a_pri_new + (1.0 - damping) * v_a_pri
        _ensure_finite(z_a_pri_new, "extrinsic mean of z", iteration)
        state.z_a_pri, state.v_a_pri = z_a_pri_new, v_a_pri_new
        state.iteration = iteration

        mse = float(np.mean(np.abs(x_b_post - x_true) ** 2))
        trace.record(
            mse,
            v_a_pri=v_a_pri,
            v_a_post=v_a_post,
            v_b_pri=v_b_pri,
            v_b_post=v_b_post,
            err_var_b_pri=float(np.mean(np.abs(x_b_pri - x_true) ** 2)),
        )
        trace.estimate = x_b_post
        trace.iterations_run = iteration

        if v_b_post_prev is not None:
            if abs(v_b_post - v_b_post_prev) / v_b_post_prev < rel_tol:
                stop_reason = "converged"
                break
        v_b_post_prev = v_b_post

    trace.clamp_events = guard.events
    trace.stop_reason = stop_reason
    return trace
