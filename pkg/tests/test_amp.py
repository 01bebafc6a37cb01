import numpy as np
import pytest

from turbocs.amp import run_amp
from turbocs.model import (
    BernoulliGaussianPrior,
    IidGaussianOperator,
    PartialDftOperator,
    ProblemInstance,
    generate_instance,
    sample_rows,
)
from turbocs.state_evolution import SeParams, se_amp
from turbocs.tsr import run_tsr


def iid_instance(n, m, lam, sigma2, seed):
    prior = BernoulliGaussianPrior(lam)
    op = IidGaussianOperator(m=m, n=n, seed=seed + 1)
    return generate_instance(prior, op, sigma2, seed=seed), prior


def test_noiseless_square_dense_follows_harmonic_evolution():
    """lambda=1, m=n, sigma2=0: the evolution map is v -> v/(1+v), so the
    variance decays harmonically as 1/(1+t); the run must follow that."""
    inst, prior = iid_instance(256, 256, 1.0, 0.0, seed=0)
    t_max = 20
    trace = run_amp(inst, prior, t_max=t_max, rel_tol=0.0)
    predicted = 1.0 / (2.0 + np.arange(t_max))
    ratio = np.asarray(trace.mse) / predicted
    assert np.all((ratio > 0.7) & (ratio < 1.4))
    assert trace.mse[-1] == min(trace.mse)


def test_tracks_state_evolution_single_large_trial():
    n, m = 8192, 5734
    inst, prior = iid_instance(n, m, 0.4, 1e-3, seed=2)
    trace = run_amp(inst, prior, t_max=30, rel_tol=0.0)
    traj = se_amp(SeParams(n=n, m=m, sigma2=1e-3, prior=prior, t_max=30, rel_tol=0.0))
    sim_db = 10 * np.log10(np.asarray(trace.mse))
    se_db = 10 * np.log10(np.asarray(traj.mse_pred))
    floor = se_db[-1] + 0.1
    pre_floor = se_db > floor
    assert np.any(pre_floor)
    assert np.max(np.abs(sim_db[pre_floor] - se_db[pre_floor])) < 0.75


def test_onsager_term_is_load_bearing():
    """Disabling the memory correction must visibly break SE tracking."""
    n, m = 4096, 2867
    inst, prior = iid_instance(n, m, 0.4, 1e-3, seed=4)
    traj = se_amp(SeParams(n=n, m=m, sigma2=1e-3, prior=prior, t_max=25, rel_tol=0.0))
    se_db = 10 * np.log10(np.asarray(traj.mse_pred))
    off = run_amp(inst, prior, t_max=25, rel_tol=0.0, onsager=False)
    off_db = 10 * np.log10(np.asarray(off.mse))
    k = min(len(off_db), len(se_db))
    assert np.max(np.abs(off_db[:k] - se_db[:k])) > 3.0


def test_determinism():
    inst, prior = iid_instance(512, 360, 0.4, 1e-3, seed=6)
    a = run_amp(inst, prior, t_max=15)
    b = run_amp(inst, prior, t_max=15)
    assert a.mse == b.mse
    assert np.array_equal(a.estimate, b.estimate)


def test_partial_dft_operator_path():
    n, m = 2048, 1434
    prior = BernoulliGaussianPrior(0.4)
    op = PartialDftOperator(n=n, selected_rows=sample_rows(n, m, seed=9))
    inst = generate_instance(prior, op, 1e-3, seed=8)
    trace = run_amp(inst, prior, t_max=60)
    assert trace.algorithm == "amp-dft"
    assert 10 * np.log10(trace.mse[-1]) < -25


def test_dft_converges_slower_than_tsr():
    n, m = 2048, 1434
    prior = BernoulliGaussianPrior(0.4)
    op = PartialDftOperator(n=n, selected_rows=sample_rows(n, m, seed=11))
    inst = generate_instance(prior, op, 1e-3, seed=10)
    amp_trace = run_amp(inst, prior, t_max=60, rel_tol=0.0)
    tsr_trace = run_tsr(inst, prior, t_max=60, rel_tol=0.0)

    def iterations_to(mse_db_list, target_db):
        arr = 10 * np.log10(np.asarray(mse_db_list))
        hits = np.flatnonzero(arr <= target_db)
        return int(hits[0]) + 1 if hits.size else len(arr) + 1

    target = 10 * np.log10(amp_trace.mse[-1]) + 1.0
    assert iterations_to(tsr_trace.mse, target) <= iterations_to(amp_trace.mse, target)


def test_rejects_unsupported_operator():
    prior = BernoulliGaussianPrior(0.4)

    class FakeOp:
        shape = (4, 8)

    inst = ProblemInstance(x_true=np.zeros(8, complex), y=np.zeros(4, complex),
                           sigma2=0.0, operator=FakeOp())
    with pytest.raises(TypeError):
        run_amp(inst, prior)


def test_aborts_on_nonfinite():
    inst, prior = iid_instance(64, 48, 0.4, 1e-3, seed=12)
    bad_y = np.array(inst.y, copy=True)
    bad_y[0] = np.inf
    poisoned = ProblemInstance(x_true=inst.x_true, y=bad_y, sigma2=inst.sigma2,
                               operator=inst.operator, seed=None)
    with pytest.raises(FloatingPointError, match="iteration 1"):
        run_amp(poisoned, prior)


def test_stop_reasons():
    # The empirical tau2 keeps a small realization-level jitter, so the
    # tolerance here is coarser than the library default.
    inst, prior = iid_instance(256, 180, 0.4, 1e-3, seed=14)
    converged = run_amp(inst, prior, t_max=100, rel_tol=1e-3)
    assert converged.stop_reason == "converged"
    assert converged.iterations_run < 100
    capped = run_amp(inst, prior, t_max=2, rel_tol=0.0)
    assert capped.stop_reason == "max_iterations"
    assert capped.iterations_run == 2


def test_se_driven_tau2_schedule_accepted():
    n, m = 1024, 717
    inst, prior = iid_instance(n, m, 0.4, 1e-3, seed=16)
    traj = se_amp(SeParams(n=n, m=m, sigma2=1e-3, prior=prior, t_max=20, rel_tol=0.0))
    schedule = [(n / m) * (v + 1e-3) for v in traj.v[:-1]]
    trace = run_amp(inst, prior, t_max=20, rel_tol=0.0, tau2_schedule=schedule)
    assert 10 * np.log10(trace.mse[-1]) < -24


def test_parameter_validation():
    inst, prior = iid_instance(64, 48, 0.4, 1e-3, seed=18)
    with pytest.raises(ValueError):
        run_amp(inst, prior, t_max=0)
    with pytest.raises(ValueError):
        run_amp(inst, prior, damping=1.5)
