"""Monte Carlo experiment driver, report emission and the property suite.

A single master seed drives every trial through counter-based substreams:
trial k draws its signal / row set / noise / IID matrix from
SeedSequence(master_seed, spawn_key=(0, k, j)) for j = 0..3, so results
are reproducible regardless of execution order or worker count. Within a
trial, all algorithms see the same signal and the same noise realization
(the partial-DFT instance is shared by tsr-dft and amp-dft; amp-iid gets
an IID matrix applied to the same signal), which makes the per-iteration
comparison paired rather than independent.

Per-trial MSEs are converted to dB (10 log10 of the per-entry squared
error) and averaged in the dB domain across trials; the standard error is
that of the dB values. Aggregation conventions are echoed in the report
metadata.
"""

import csv
import io
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .amp import run_amp
from .denoiser import mmse, mmse_derivative
from .model import (
    BernoulliGaussianPrior,
    IidGaussianOperator,
    PartialDftOperator,
    ProblemInstance,
    sample_noise,
    sample_rows,
    sample_signal,
)
from .state_evolution import (
    SeParams,
    check_dominance,
    check_monotone_transfer,
    fixed_point_residual,
    se_amp,
    se_tsr,
)
from .tsr import run_tsr

__all__ = [
    "ALGORITHMS",
    "ExperimentConfig",
    "AlgorithmResult",
    "ExperimentReport",
    "ExperimentError",
    "run_experiment",
    "emit_report",
    "load_report",
    "run_property_suite",
    "PROPERTY_GRID",
]

ALGORITHMS = ("tsr-dft", "amp-iid", "amp-dft")
SCHEMA_VERSION = 1

CSV_HEADER = ["algorithm", "iteration", "mean_mse_db", "stderr_db", "se_pred_mse_db"]

# lambda x m/n x sigma^2 grid over which the structural checks must hold.
PROPERTY_GRID = tuple(
    (lam, ratio, s2)
    for lam in (0.1, 0.4, 0.7)
    for ratio in (0.5, 0.7, 0.9)
    for s2 in (1e-1, 1e-2, 1e-3)
)


class ExperimentError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    n: int
    m: int
    sparsity: float
    sigma2: float
    trials: int
    algorithms: tuple = ALGORITHMS
    t_max: int = 50
    rel_tol: float = 1e-8
    master_seed: int = 0
    row_selection: str = "per-trial"
    share_instances: bool = True
    workers: int = 1
    snr_db: float = None

    def __post_init__(self):
        if not (0 < self.m < self.n):
            raise ValueError(f"need 0 < m < n, got m={self.m}, n={self.n}")
        if self.sigma2 < 0:
            raise ValueError("sigma2 must be >= 0")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.algorithms:
            raise ValueError("algorithm set must be non-empty")
        unknown = set(self.algorithms) - set(ALGORITHMS)
        if unknown:
            raise ValueError(f"unknown algorithms: {sorted(unknown)}")
        if self.row_selection not in ("per-trial", "fixed"):
            raise ValueError(f"bad row_selection {self.row_selection!r}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        object.__setattr__(self, "algorithms", tuple(self.algorithms))
        BernoulliGaussianPrior(self.sparsity)  # range check

    @classmethod
    def create(cls, n, sparsity, trials, m=None, m_over_n=None, sigma2=None,
               snr_db=None, **kwargs):
        """Resolve the (m | m_over_n) and (sigma2 | snr_db) alternatives."""
        if (m is None) == (m_over_n is None):
            raise ValueError("give exactly one of m, m_over_n")
        if m is None:
            m = int(round(m_over_n * n))
        if (sigma2 is None) == (snr_db is None):
            raise ValueError("give exactly one of sigma2, snr_db")
        if sigma2 is None:
            sigma2 = 10.0 ** (-snr_db / 10.0)  # unit signal power
        return cls(n=n, m=m, sparsity=sparsity, sigma2=float(sigma2),
                   trials=trials, snr_db=snr_db, **kwargs)

    @property
    def prior(self):
        return BernoulliGaussianPrior(self.sparsity)


@dataclass
class AlgorithmResult:
    algorithm: str
    iterations: list
    mean_mse_db: list
    stderr_db: list
    se_pred_mse_db: list  # None where no analysis applies (amp-dft)
    clamp_events: int
    trials_used: int
    trials_failed: int


@dataclass
class ExperimentReport:
    config: dict
    results: dict  # algorithm name -> AlgorithmResult
    metadata: dict = field(default_factory=dict)
    wall_clock_seconds: float = 0.0
    schema_version: int = SCHEMA_VERSION

    def to_dict(self):
        return {
            "schema_version": self.schema_version,
            "config": self.config,
            "metadata": self.metadata,
            "results": {name: asdict(res) for name, res in self.results.items()},
            "wall_clock_seconds": self.wall_clock_seconds,
        }

    @classmethod
    def from_dict(cls, data):
        results = {
            name: AlgorithmResult(**payload) for name, payload in data["results"].items()
        }
        return cls(
            config=data["config"],
            results=results,
            metadata=data["metadata"],
            wall_clock_seconds=data["wall_clock_seconds"],
            schema_version=data["schema_version"],
        )


def _substream(master_seed, *key):
    """Counter-based derivation: the key path, not draw order, fixes the stream."""
    return np.random.SeedSequence(entropy=master_seed, spawn_key=key)


_FIXED_ROWS_KEY = (1, 0)


def _trial_instances(config, trial, fixed_rows):
    """Build the per-operator instances one trial sees.

    Substream layout under (0, trial, j): j=0 signal, j=1 rows, j=2 noise,
    j=3 IID matrix; with share_instances=False, amp-iid instead draws its
    own signal/noise from j=4/j=5.
    """
    prior = config.prior
    seed = config.master_seed
    x = sample_signal(prior, config.n, _substream(seed, 0, trial, 0))
    if fixed_rows is not None:
        rows = fixed_rows
    else:
        rows = sample_rows(config.n, config.m, _substream(seed, 0, trial, 1))
    noise = sample_noise(config.m, config.sigma2, _substream(seed, 0, trial, 2))

    instances = {}
    need_dft = {"tsr-dft", "amp-dft"} & set(config.algorithms)
    if need_dft:
        op = PartialDftOperator(n=config.n, selected_rows=rows)
        inst = ProblemInstance(x_true=x, y=op.forward(x) + noise,
                               sigma2=config.sigma2, operator=op, seed=trial)
        for name in need_dft:
            instances[name] = inst
    if "amp-iid" in config.algorithms:
        op = IidGaussianOperator(m=config.m, n=config.n,
                                 seed=_substream(seed, 0, trial, 3))
        if config.share_instances:
            x_iid, noise_iid = x, noise
        else:
            x_iid = sample_signal(prior, config.n, _substream(seed, 0, trial, 4))
            noise_iid = sample_noise(config.m, config.sigma2, _substream(seed, 0, trial, 5))
        instances["amp-iid"] = ProblemInstance(
            x_true=x_iid, y=op.forward(x_iid) + noise_iid,
            sigma2=config.sigma2, operator=op, seed=trial)
    return instances


def _run_trial(config, trial, fixed_rows):
    """One trial: run every configured algorithm, capturing failures."""
    instances = _trial_instances(config, trial, fixed_rows)
    prior = config.prior
    out = {}
    for name in config.algorithms:
        try:
            if name == "tsr-dft":
                trace = run_tsr(instances[name], prior,
                                t_max=config.t_max, rel_tol=config.rel_tol)
            else:
                trace = run_amp(instances[name], prior,
                                t_max=config.t_max, rel_tol=config.rel_tol)
            out[name] = (np.asarray(trace.mse), trace.clamp_events, None)
        except Exception as exc:  # recorded, excluded, counted
            out[name] = (None, 0, f"{type(exc).__name__}: {exc}")
    return out


def _pad_last(arr, length):
    if len(arr) == length:
        return arr
    return np.concatenate([arr, np.full(length - len(arr), arr[-1])])


def _se_prediction_db(name, config, length):
    if name == "amp-dft":
        return None  # simulation-only; no tractable analysis
    params = SeParams(n=config.n, m=config.m, sigma2=config.sigma2,
                      prior=config.prior, t_max=length, rel_tol=0.0)
    traj = se_tsr(params) if name == "tsr-dft" else se_amp(params)
    pred = _pad_last(np.asarray(traj.mse_pred), length)
    return [float(v) for v in 10.0 * np.log10(pred)]


def run_experiment(config):
    """Run the configured Monte Carlo comparison; returns ExperimentReport.

    Raises ExperimentError if more than 1% of trials fail for any
    algorithm; fewer failures are excluded and counted in the report.
    """
    t_start = time.perf_counter()
    fixed_rows = None
    if config.row_selection == "fixed":
        fixed_rows = sample_rows(config.n, config.m,
                                 _substream(config.master_seed, *_FIXED_ROWS_KEY))

    indices = range(config.trials)
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            trial_outputs = list(
                pool.map(lambda k: _run_trial(config, k, fixed_rows), indices)
            )
    else:
        trial_outputs = [_run_trial(config, k, fixed_rows) for k in indices]

    results = {}
    for name in config.algorithms:
        curves, clamps, failures = [], 0, []
        for k, out in enumerate(trial_outputs):
            mse, clamp_events, err = out[name]
            if err is not None:
                failures.append((k, err))
                continue
            curves.append(10.0 * np.log10(mse))
            clamps += clamp_events
        if len(failures) > 0.01 * config.trials:
            detail = "; ".join(f"trial {k}: {msg}" for k, msg in failures[:5])
            raise ExperimentError(
                f"{name}: {len(failures)}/{config.trials} trials failed ({detail})"
            )
        length = max(len(c) for c in curves)
        stacked = np.vstack([_pad_last(c, length) for c in curves])
        mean_db = stacked.mean(axis=0)
        if stacked.shape[0] > 1:
            stderr_db = stacked.std(axis=0, ddof=1) / np.sqrt(stacked.shape[0])
        else:
            stderr_db = np.zeros(length)
        results[name] = AlgorithmResult(
            algorithm=name,
            iterations=list(range(1, length + 1)),
            mean_mse_db=[float(v) for v in mean_db],
            stderr_db=[float(v) for v in stderr_db],
            se_pred_mse_db=_se_prediction_db(name, config, length),
            clamp_events=clamps,
            trials_used=stacked.shape[0],
            trials_failed=len(failures),
        )

    config_echo = asdict(config)
    config_echo["algorithms"] = list(config.algorithms)  # JSON-safe echo
    report = ExperimentReport(
        config=config_echo,
        results=results,
        metadata={
            "mse_definition": "per-entry squared error ||x_hat - x_true||^2 / N, in dB",
            "trial_aggregation": "mean and standard error of per-trial dB values",
            "estimate_convention": "posterior (denoised) estimate of each iteration",
            "amp_initialization": "x_hat = 0, residual = 0",
            "row_selection": config.row_selection,
        },
        wall_clock_seconds=time.perf_counter() - t_start,
    )
    return report


def _csv_cell(value):
    return "" if value is None else repr(float(value))


def emit_report(report, format, path):
    """Write the report as CSV (curve rows) or JSON (full structure)."""
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for name, res in report.results.items():
            se_pred = res.se_pred_mse_db
            for i, it in enumerate(res.iterations):
                writer.writerow([
                    name,
                    it,
                    _csv_cell(res.mean_mse_db[i]),
                    _csv_cell(res.stderr_db[i]),
                    _csv_cell(se_pred[i] if se_pred is not None else None),
                ])
        data = buf.getvalue()
    elif format == "json":
        data = json.dumps(report.to_dict(), indent=2) + "\n"
    else:
        raise ValueError(f"unknown format {format!r}")
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(data)
    return path


def load_report(path):
    with open(path, "r", encoding="utf-8") as handle:
        return ExperimentReport.from_dict(json.load(handle))


# ---------------------------------------------------------------------------
# Property suite
# ---------------------------------------------------------------------------

@dataclass
class CheckResult:
    name: str
    where: str
    ok: bool
    detail: str


@dataclass
class PropertySuiteReport:
    checks: list

    @property
    def ok(self):
        return all(c.ok for c in self.checks)

    @property
    def failures(self):
        return [c for c in self.checks if not c.ok]

    def lines(self):
        return [
            f"{'PASS' if c.ok else 'FAIL'} {c.name} [{c.where}]: {c.detail}"
            for c in self.checks
        ]


def _grid_params(lam, ratio, sigma2, base_n=1000, t_max=500):
    n = base_n
    m = int(round(ratio * n))
    return SeParams(n=n, m=m, sigma2=sigma2,
                    prior=BernoulliGaussianPrior(lam), t_max=t_max)


def run_property_suite(grid=None, mmse_fn=None, dominance_t_max=100):
    """Structural checks over a parameter grid; all must pass.

    mmse_fn replaces the mmse evaluator inside the upper-bound and
    transfer-monotonicity checks (mutation-guard hook for tests).
    """
    grid = PROPERTY_GRID if grid is None else tuple(grid)
    evaluate = mmse_fn if mmse_fn is not None else mmse
    checks = []

    # Denoiser upper bound: mmse(eta) <= 1/eta on a wide log grid.
    eta_grid = np.logspace(-3, 6, 40)
    for lam in (0.1, 0.4, 1.0):
        prior = BernoulliGaussianPrior(lam)
        vals = np.array([evaluate(eta, prior) for eta in eta_grid])
        excess = float(np.max(vals - 1.0 / eta_grid))
        checks.append(CheckResult(
            "mmse-upper-bound", f"lambda={lam}", excess <= 1e-12,
            f"max(mmse - 1/eta) = {excess:.3e}"))

    # Derivative identity versus central finite differences.
    for lam in (0.1, 0.4, 1.0):
        prior = BernoulliGaussianPrior(lam)
        worst = 0.0
        for eta in (0.03, 0.3, 3.0, 30.0):
            h = eta * 1e-5
            fd = (mmse(eta + h, prior) - mmse(eta - h, prior)) / (2 * h)
            an = mmse_derivative(eta, prior)
            worst = max(worst, abs(an - fd) / abs(fd))
        checks.append(CheckResult(
            "mmse-derivative", f"lambda={lam}", worst <= 1e-6,
            f"max rel err vs finite difference = {worst:.3e}"))

    # mmse strictly decreasing.
    for lam in (0.1, 0.4, 1.0):
        prior = BernoulliGaussianPrior(lam)
        vals = np.array([evaluate(eta, prior) for eta in eta_grid])
        ok = bool(np.all(np.diff(vals) < 0))
        checks.append(CheckResult(
            "mmse-monotone", f"lambda={lam}", ok,
            "strictly decreasing" if ok else "not decreasing"))

    for lam, ratio, s2 in grid:
        where = f"lambda={lam}, m/n={ratio}, sigma2={s2}"
        params = _grid_params(lam, ratio, s2)

        mono = check_monotone_transfer(params, mmse_fn=mmse_fn)
        checks.append(CheckResult(
            "transfer-monotone", where, mono.ok,
            "phi and psi non-increasing" if mono.ok else
            f"violations: phi {mono.phi_violations[:2]}, psi {mono.psi_violations[:2]}"))

        traj = se_tsr(params)
        v = np.asarray(traj.v)
        eta = np.asarray(traj.eta)
        bounds_ok = (
            bool(np.all(np.diff(v) <= 1e-12))
            and bool(np.all(np.diff(eta) >= -1e-12))
            and bool(np.all(v >= -1e-12)) and bool(np.all(v <= 1.0 + 1e-12))
            and (s2 == 0 or bool(np.all(eta <= ratio / s2 + 1e-12)))
        )
        checks.append(CheckResult(
            "se-monotone-bounded", where, bounds_ok,
            f"v in [{v.min():.3e}, {v.max():.3e}], eta_max={eta.max():.4g}"))

        residual = fixed_point_residual(traj.fixed_point_eta, params)
        checks.append(CheckResult(
            "fixed-point-residual", where, residual < 1e-8,
            f"residual = {residual:.3e}"))

        dom = check_dominance(params, t_max=dominance_t_max)
        checks.append(CheckResult(
            "dominance", where, dom.ok,
            f"worst margin = {dom.worst_margin:.3e}"
            + ("" if dom.ok else f", first violation t={dom.first_violation}")))

    return PropertySuiteReport(checks=checks)
