"""Scalar state-evolution recursions and their structural checkers.

Two recursions predict the large-system per-iteration MSE:

  turbo / partial-DFT:  eta = phi(v) = 1 / ((N-M)/M * v + N/M * sigma^2)
                        v   = psi(eta) = 1 / (1/mmse(eta) - eta)
  AMP / IID Gaussian:   eta = 1 / (N/M * (v + sigma^2))
                        v   = mmse(eta)

both started from v = 1 (the prior signal power). The checkers verify the
structural facts the comparison rests on: monotonicity of the transfer
functions, per-iteration dominance of the turbo recursion over the AMP
one in the common normalization (and the induced per-iteration MSE
ordering), and the closed-form fixed-point equation satisfied by the
stationary SNR.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .denoiser import mmse

__all__ = [
    "SeParams",
    "SeTrajectory",
    "se_tsr",
    "se_amp",
    "fixed_point_residual",
    "check_dominance",
    "check_monotone_transfer",
    "NegativeDiscriminantError",
]

# An SNR beyond this is treated as divergence to the exact-recovery
# regime (only reachable when sigma2 = 0, where eta has no upper bound).
_ETA_DIVERGED = 1e13
# Floor for the information-subtraction denominator 1/mmse - eta, which
# the mmse upper bound keeps positive but possibly tiny.
_PSI_DENOM_FLOOR = 1e-13


class NegativeDiscriminantError(ValueError):
    """The fixed-point closed form encountered a negative discriminant."""


@dataclass(frozen=True)
class SeParams:
    """Dimensions enter only through M/N; sigma2 is the noise variance."""

    n: int
    m: int
    sigma2: float
    prior: object
    t_max: int = 500
    rel_tol: float = 1e-12

    def __post_init__(self):
        if not (0 < self.m < self.n):
            raise ValueError(f"need 0 < m < n, got m={self.m}, n={self.n}")
        if self.sigma2 < 0:
            raise ValueError(f"sigma2 must be >= 0, got {self.sigma2}")
        if self.t_max < 1:
            raise ValueError("t_max must be >= 1")


@dataclass
class SeTrajectory:
    """v[t] is the variance entering iteration t+1 (v[0] = 1); eta[t] and
    mse_pred[t] are the SNR and predicted MSE produced by iteration t+1,
    so len(v) == len(eta) + 1."""

    v: list = field(default_factory=list)
    eta: list = field(default_factory=list)
    mse_pred: list = field(default_factory=list)
    converged: bool = False
    exact_recovery: bool = False
    psi_guard_triggered: bool = False

    @property
    def fixed_point_eta(self):
        return self.eta[-1] if self.eta else math.nan

    @property
    def fixed_point_mse(self):
        return self.mse_pred[-1] if self.mse_pred else math.nan


def _phi_tsr(v, params):
    n, m, s2 = params.n, params.m, params.sigma2
    denom = (n - m) / m * v + n / m * s2
    return math.inf if denom <= 0.0 else 1.0 / denom


def _phi_amp(v, params):
    n, m, s2 = params.n, params.m, params.sigma2
    denom = n / m * (v + s2)
    return math.inf if denom <= 0.0 else 1.0 / denom


def _psi(eta, prior, trajectory=None):
    denom = 1.0 / mmse(eta, prior) - eta
    if denom < _PSI_DENOM_FLOOR:
        denom = _PSI_DENOM_FLOOR
        if trajectory is not None:
            trajectory.psi_guard_triggered = True
    return 1.0 / denom


def _iterate(params, eta_of_v, v_of_eta):
    traj = SeTrajectory(v=[1.0])
    v = 1.0
    for _ in range(params.t_max):
        eta = eta_of_v(v)
        if not math.isfinite(eta) or eta > _ETA_DIVERGED:
            traj.exact_recovery = True
            traj.converged = True
            break
        mse = mmse(eta, params.prior)
        v_new = v_of_eta(eta, traj)
        traj.eta.append(eta)
        traj.mse_pred.append(mse)
        traj.v.append(v_new)
        if v > 0 and abs(v_new - v) / v < params.rel_tol:
            traj.converged = True
            v = v_new
            break
        v = v_new
    return traj


def se_tsr(params):
    """Turbo-recursion trajectory from v = 1 until t_max or convergence."""
    return _iterate(
        params,
        lambda v: _phi_tsr(v, params),
        lambda eta, traj: _psi(eta, params.prior, traj),
    )


def se_amp(params):
    """AMP-recursion trajectory from v = 1 until t_max or convergence."""
    return _iterate(
        params,
        lambda v: _phi_amp(v, params),
        lambda eta, traj: mmse(eta, params.prior),
    )


def fixed_point_residual(eta_inf, params):
    """|eta_inf - closed_form(eta_inf)| for the stationary-SNR equation.

    The closed form is the minus-sign branch of the quadratic obtained by
    eliminating v between the two transfer functions; at sigma2 = 0 it
    degenerates to (M/N)/mmse (its analytic limit).
    """
    if not (eta_inf > 0 and math.isfinite(eta_inf)):
        raise ValueError(f"eta_inf must be positive and finite, got {eta_inf}")
    ratio = params.m / params.n
    s2 = params.sigma2
    m_val = mmse(eta_inf, params.prior)
    if s2 == 0.0:
        return abs(eta_inf - ratio / m_val)
    disc = (m_val + s2) ** 2 - 4.0 * s2 * m_val * ratio
    if disc < 0.0:
        raise NegativeDiscriminantError(
            f"negative discriminant {disc} at eta_inf={eta_inf}"
        )
    rhs = (m_val + s2 - math.sqrt(disc)) / (2.0 * s2 * m_val)
    return abs(eta_inf - rhs)


@dataclass
class DominanceReport:
    """Per-iteration comparison of the two recursions in the common
    normalization (turbo v rescaled by (N-M)/N so both start the same
    transfer map)."""

    v_tsr: np.ndarray
    v_amp: np.ndarray
    mse_tsr: np.ndarray
    mse_amp: np.ndarray
    slack: float
    ok: bool = True
    first_violation: int = -1
    worst_margin: float = -math.inf

    def check(self):
        v_margin = self.v_tsr - self.v_amp
        m_margin = self.mse_tsr - self.mse_amp
        self.worst_margin = max(float(np.max(v_margin)), float(np.max(m_margin)))
        bad_v = np.flatnonzero(v_margin > self.slack)
        bad_m = np.flatnonzero(m_margin > self.slack)
        if bad_v.size or bad_m.size:
            self.ok = False
            candidates = [int(bad_v[0])] if bad_v.size else []
            candidates += [int(bad_m[0])] if bad_m.size else []
            self.first_violation = min(candidates)
        return self


def check_dominance(params, t_max=100, slack=1e-9):
    """Verify v_tsr[t] <= v_amp[t] and mse_tsr[t] <= mse_amp[t] for t <= t_max.

    Both recursions are run in the normalization where they share the
    same SNR map, which is where the per-iteration ordering is provable.
    Returns a DominanceReport (ok flag, first violating t, worst margin).
    """
    n, m, s2 = params.n, params.m, params.sigma2
    prior = params.prior
    scale = (n - m) / n

    v_tsr = [scale * 1.0]
    v_amp = [1.0]
    mse_tsr = []
    mse_amp = []
    for _ in range(t_max):
        eta_t = 1.0 / (n / m * v_tsr[-1] + n / m * s2)
        eta_a = 1.0 / (n / m * v_amp[-1] + n / m * s2)
        mse_tsr.append(mmse(eta_t, prior))
        mse_amp.append(mmse(eta_a, prior))
        v_tsr.append(scale * _psi(eta_t, prior))
        v_amp.append(mse_amp[-1])

    return DominanceReport(
        v_tsr=np.array(v_tsr),
        v_amp=np.array(v_amp),
        mse_tsr=np.array(mse_tsr),
        mse_amp=np.array(mse_amp),
        slack=slack,
    ).check()


@dataclass
class MonotoneReport:
    ok: bool
    phi_violations: list
    psi_violations: list


def check_monotone_transfer(params, v_grid=None, eta_grid=None, slack=1e-12, mmse_fn=None):
    """Verify both transfer functions are non-increasing on the grids.

    mmse_fn overrides the mmse evaluator (test hook for corrupting it).
    """
    if v_grid is None:
        v_grid = np.logspace(-6, 0, 40)
    if eta_grid is None:
        eta_grid = np.logspace(-2, 4, 50)
    v_grid = np.asarray(v_grid, dtype=float)
    eta_grid = np.asarray(eta_grid, dtype=float)
    if np.any(np.diff(v_grid) <= 0) or np.any(np.diff(eta_grid) <= 0):
        raise ValueError("grids must be strictly increasing")
    evaluate = mmse_fn if mmse_fn is not None else mmse

    phi_vals = np.array([_phi_tsr(v, params) for v in v_grid])
    phi_bad = [
        (float(v_grid[i]), float(v_grid[i + 1]))
        for i in np.flatnonzero(np.diff(phi_vals) > slack)
    ]

    def psi_val(eta):
        denom = 1.0 / evaluate(eta, params.prior) - eta
        return 1.0 / max(denom, _PSI_DENOM_FLOOR)

    psi_vals = np.array([psi_val(e) for e in eta_grid])
    psi_bad = [
        (float(eta_grid[i]), float(eta_grid[i + 1]))
        for i in np.flatnonzero(np.diff(psi_vals) > slack)
    ]
    return MonotoneReport(ok=not phi_bad and not psi_bad,
                          phi_violations=phi_bad, psi_violations=psi_bad)
