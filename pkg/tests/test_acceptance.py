"""Acceptance suite: every criterion at its stated tolerance.

Each test prints one `ACCEPTANCE <k> <PASS|FAIL>` line (visible with
pytest -s or -rA). The Monte Carlo comparison shared by criteria 7-9 runs
once per session. The full-scale 500-trial configuration is available as
a slow-marked test: pytest -m slow.
"""

import time

import numpy as np
import pytest

from turbocs.denoiser import mmse, mmse_derivative, mmse_mc_oracle
from turbocs.harness import (
    PROPERTY_GRID,
    ExperimentConfig,
    emit_report,
    run_experiment,
)
from turbocs.model import BernoulliGaussianPrior
from turbocs.state_evolution import (
    SeParams,
    check_dominance,
    fixed_point_residual,
    se_tsr,
)

LAMBDAS = (0.1, 0.4, 1.0)
ETAS = (0.1, 1.0, 10.0)


def verdict(number, ok, detail):
    print(f"ACCEPTANCE {number} {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, f"criterion {number}: {detail}"


def grid_params(lam, ratio, s2, **kw):
    n = 1000
    return SeParams(n=n, m=int(round(ratio * n)), sigma2=s2,
                    prior=BernoulliGaussianPrior(lam), **kw)


@pytest.fixture(scope="module")
def comparison_experiment():
    """Criteria 7-9 share this 200-trial desk-scale run."""
    config = ExperimentConfig(
        n=1024, m=717, sparsity=0.4, sigma2=10 ** (-30 / 10), snr_db=30.0,
        trials=200, t_max=35, rel_tol=1e-10, master_seed=20240, workers=1,
    )
    return run_experiment(config)


def pre_floor_mask(se_db):
    floor = se_db[-1] + 0.1
    return se_db > floor


def test_criterion_01_denoiser_cross_validation():
    t0 = time.perf_counter()
    worst = ""
    ok = True
    for lam in LAMBDAS:
        prior = BernoulliGaussianPrior(lam)
        for k, eta in enumerate(ETAS):
            quad_val = mmse(eta, prior)
            est, se = mmse_mc_oracle(eta, prior, 10**7, seed=1000 + k)
            if lam == 1.0:
                closed = 1.0 / (1.0 + eta)
                if abs(quad_val - closed) > 1e-10:
                    ok, worst = False, f"lam=1 closed form off at eta={eta}"
                tol = max(3 * se, 1e-10)
            else:
                tol = 3 * se
            if abs(quad_val - est) > tol:
                ok, worst = False, f"lam={lam}, eta={eta}: |{quad_val:.3e}-{est:.3e}|>{tol:.1e}"
    elapsed = time.perf_counter() - t0
    if elapsed >= 60:
        ok, worst = False, f"runtime {elapsed:.1f}s"
    verdict(1, ok, worst or f"quadrature within 3 MC standard errors "
                            f"(9 points, 1e7 samples, {elapsed:.1f}s)")


def test_criterion_02_mmse_upper_bound():
    worst_excess = -np.inf
    for lam in LAMBDAS:
        prior = BernoulliGaussianPrior(lam)
        for eta in np.logspace(-3, 6, 40):
            worst_excess = max(worst_excess, mmse(eta, prior) - 1.0 / eta)
    verdict(2, worst_excess <= 1e-12,
            f"max(mmse - 1/eta) = {worst_excess:.3e} over 3x40 grid")


def test_criterion_03_mmse_derivative():
    points = [(0.1, 0.5), (0.1, 5.0), (0.4, 0.1), (0.4, 1.0), (0.4, 10.0),
              (0.7, 0.3), (0.7, 30.0), (1.0, 0.2), (1.0, 2.0), (1.0, 20.0)]
    worst = 0.0
    for lam, eta in points:
        prior = BernoulliGaussianPrior(lam)
        h = eta * 1e-5
        fd = (mmse(eta + h, prior) - mmse(eta - h, prior)) / (2 * h)
        worst = max(worst, abs(mmse_derivative(eta, prior) - fd) / abs(fd))
    verdict(3, worst < 1e-6,
            f"max relative error vs finite differences = {worst:.3e} at 10 points")


def test_criterion_04_se_monotone_bounded():
    ok = True
    detail = "all 27 trajectories monotone with v in [0,1], eta <= (m/n)/sigma2"
    for lam, ratio, s2 in PROPERTY_GRID:
        traj = se_tsr(grid_params(lam, ratio, s2))
        v = np.asarray(traj.v)
        eta = np.asarray(traj.eta)
        good = (
            v[0] == 1.0
            and np.all(np.diff(v) <= 1e-12)
            and np.all(np.diff(eta) >= -1e-12)
            and np.all(v >= -1e-12) and np.all(v <= 1 + 1e-12)
            and np.all(eta > 0) and np.all(eta <= ratio / s2 + 1e-12)
        )
        if not good:
            ok, detail = False, f"violated at lam={lam}, m/n={ratio}, sigma2={s2}"
            break
    verdict(4, ok, detail)


def test_criterion_05_fixed_point_residual():
    t0 = time.perf_counter()
    worst = 0.0
    for lam, ratio, s2 in PROPERTY_GRID:
        params = grid_params(lam, ratio, s2)
        traj = se_tsr(params)
        worst = max(worst, fixed_point_residual(traj.fixed_point_eta, params))
    elapsed = time.perf_counter() - t0
    verdict(5, worst < 1e-8 and elapsed < 60,
            f"max residual = {worst:.3e} over 27 points in {elapsed:.1f}s")


def test_criterion_06_dominance_and_ordering():
    ok = True
    detail = "v and mmse orderings hold for t <= 100 on all 27 points"
    for lam, ratio, s2 in PROPERTY_GRID:
        report = check_dominance(grid_params(lam, ratio, s2), t_max=100, slack=1e-9)
        if not report.ok:
            ok = False
            detail = (f"violation at lam={lam}, m/n={ratio}, sigma2={s2}, "
                      f"t={report.first_violation}, margin={report.worst_margin:.2e}")
            break
    verdict(6, ok, detail)


def test_criterion_07_se_agreement(comparison_experiment):
    details = []
    ok = True
    for name in ("tsr-dft", "amp-iid"):
        res = comparison_experiment.results[name]
        sim = np.asarray(res.mean_mse_db)
        se_db = np.asarray(res.se_pred_mse_db)
        mask = pre_floor_mask(se_db)
        gap = float(np.max(np.abs(sim[mask] - se_db[mask])))
        details.append(f"{name} max gap {gap:.3f} dB over {int(mask.sum())} pre-floor iters")
        ok &= gap <= 0.5
    verdict(7, ok, "; ".join(details))


def test_criterion_08_per_iteration_ordering(comparison_experiment):
    tsr = np.asarray(comparison_experiment.results["tsr-dft"].mean_mse_db)
    amp = np.asarray(comparison_experiment.results["amp-iid"].mean_mse_db)
    k = min(tsr.size, amp.size)
    margin = float(np.max(tsr[:k] - amp[:k]))
    verdict(8, margin <= 0.2,
            f"max(tsr - amp_iid) = {margin:.3f} dB across {k} iterations (slack 0.2)")


def test_criterion_09_convergence_speed(comparison_experiment):
    def iterations_to_settle(curve):
        curve = np.asarray(curve)
        target = curve[-1] + 1.0
        return int(np.flatnonzero(curve <= target)[0]) + 1

    its_tsr = iterations_to_settle(comparison_experiment.results["tsr-dft"].mean_mse_db)
    its_amp = iterations_to_settle(comparison_experiment.results["amp-dft"].mean_mse_db)
    verdict(9, its_tsr <= its_amp,
            f"iterations to within 1 dB of converged: tsr-dft {its_tsr}, "
            f"amp-dft {its_amp}")


def test_criterion_10_determinism(tmp_path):
    config = ExperimentConfig(n=256, m=180, sparsity=0.4, sigma2=1e-3,
                              trials=5, t_max=10, master_seed=99)
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    emit_report(run_experiment(config), "csv", p1)
    emit_report(run_experiment(config), "csv", p2)
    byte_identical = p1.read_bytes() == p2.read_bytes()

    serial = run_experiment(config).to_dict()
    threaded = run_experiment(
        ExperimentConfig(n=256, m=180, sparsity=0.4, sigma2=1e-3,
                         trials=5, t_max=10, master_seed=99, workers=4)
    ).to_dict()
    for d in (serial, threaded):
        d.pop("wall_clock_seconds")
        d["config"].pop("workers")
    verdict(10, byte_identical and serial == threaded,
            f"byte-identical CSV: {byte_identical}; serial == concurrent: "
            f"{serial == threaded}")


@pytest.mark.slow
def test_full_scale_figure_configuration(tmp_path):
    """The published-scale setting (N=8192, M=5734, 500 realizations).

    Long-running; validates SE agreement at the scale where the finite-size
    wobble is far below the acceptance slack.
    """
    config = ExperimentConfig(
        n=8192, m=5734, sparsity=0.4, sigma2=10 ** (-30 / 10), snr_db=30.0,
        trials=500, t_max=35, rel_tol=1e-10, master_seed=3,
    )
    report = run_experiment(config)
    emit_report(report, "csv", tmp_path / "full_scale.csv")
    for name in ("tsr-dft", "amp-iid"):
        res = report.results[name]
        sim = np.asarray(res.mean_mse_db)
        se_db = np.asarray(res.se_pred_mse_db)
        mask = pre_floor_mask(se_db)
        assert np.max(np.abs(sim[mask] - se_db[mask])) <= 0.5
