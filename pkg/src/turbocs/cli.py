"""Command-line entry point.

Subcommands:
  recover      run one algorithm on one synthetic instance, dump its trace
  mc           seeded Monte Carlo comparison with state-evolution overlays
  se           state-evolution trajectories only
  check        structural property suite (nonzero exit on any failure)
  fixed-point  stationary-SNR residual scan

Settings come from an optional JSON config file (--config) plus flags;
flags win. Report paths also render a PNG figure next to the delimited
output unless --no-plot is given.
"""

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .amp import run_amp
from .harness import (
    ALGORITHMS,
    PROPERTY_GRID,
    ExperimentConfig,
    emit_report,
    run_experiment,
    run_property_suite,
)
from .model import (
    BernoulliGaussianPrior,
    IidGaussianOperator,
    PartialDftOperator,
    ProblemInstance,
    sample_noise,
    sample_rows,
    sample_signal,
)
from .state_evolution import SeParams, fixed_point_residual, se_amp, se_tsr
from .tsr import run_tsr


def _add_model_flags(p):
    p.add_argument("--n", type=int, help="signal dimension")
    p.add_argument("--m", type=int, help="number of measurements")
    p.add_argument("--m-over-n", type=float, help="measurement ratio (alternative to --m)")
    p.add_argument("--lambda", dest="sparsity", type=float, help="sparsity level in (0, 1]")
    p.add_argument("--snr-db", type=float, help="SNR in dB (sigma2 = 10^(-snr/10))")
    p.add_argument("--sigma2", type=float, help="noise variance (alternative to --snr-db)")
    p.add_argument("--t-max", type=int, help="iteration cap")
    p.add_argument("--rel-tol", type=float, help="relative-change stopping tolerance")
    p.add_argument("--seed", type=int, help="master seed")


def _add_output_flags(p):
    p.add_argument("--out", type=Path, help="output file path")
    p.add_argument("--format", choices=("csv", "json"), help="output format (default csv)")
    p.add_argument("--config", type=Path, help="JSON config file; flags override it")
    p.add_argument("--no-plot", action="store_true",
                   help="skip the PNG figure normally written next to --out")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="turbocs",
        description="Turbo and AMP sparse recovery over partial-DFT / IID operators, "
                    "with state-evolution analysis.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("recover", help="single-instance run with trace dump")
    _add_model_flags(p)
    _add_output_flags(p)
    p.add_argument("--algorithm", choices=ALGORITHMS, help="default tsr-dft")

    p = sub.add_parser("mc", help="Monte Carlo experiment")
    _add_model_flags(p)
    _add_output_flags(p)
    p.add_argument("--algorithms", help="comma-separated subset of "
                                        + ",".join(ALGORITHMS))
    p.add_argument("--trials", type=int, help="number of Monte Carlo trials")
    p.add_argument("--row-selection", choices=("per-trial", "fixed"))
    p.add_argument("--workers", type=int, help="concurrent trial workers (default 1)")
    p.add_argument("--independent-instances", action="store_true",
                   help="draw a fresh signal/noise per operator family instead of "
                        "sharing them across algorithms")

    p = sub.add_parser("se", help="state-evolution trajectories only")
    _add_model_flags(p)
    _add_output_flags(p)

    p = sub.add_parser("check", help="run the structural property suite")
    p.add_argument("--quick", action="store_true", help="reduced parameter grid")

    p = sub.add_parser("fixed-point", help="stationary-SNR residual scan")
    _add_model_flags(p)
    _add_output_flags(p)
    return parser


class Settings:
    """Flag > config-file > default resolution."""

    def __init__(self, args):
        self.args = vars(args)
        self.file = {}
        cfg_path = self.args.get("config")
        if cfg_path:
            with open(cfg_path, "r", encoding="utf-8") as handle:
                self.file = json.load(handle)
        if "lambda" in self.file:  # accepted alias for sparsity
            self.file.setdefault("sparsity", self.file["lambda"])

    def get(self, key, default=None):
        value = self.args.get(key)
        if value is None or value is False:
            value = self.file.get(key, value)
        if value is None:
            return default
        return value

    def require(self, key):
        value = self.get(key)
        if value is None:
            raise SystemExit(f"error: missing required setting --{key.replace('_', '-')}")
        return value


def _resolve_problem(s):
    n = int(s.require("n"))
    m = s.get("m")
    m_over_n = s.get("m_over_n")
    if m is None and m_over_n is None:
        raise SystemExit("error: give --m or --m-over-n")
    if m is None:
        m = int(round(float(m_over_n) * n))
    sparsity = float(s.require("sparsity"))
    sigma2 = s.get("sigma2")
    snr_db = s.get("snr_db")
    if sigma2 is None and snr_db is None:
        raise SystemExit("error: give --sigma2 or --snr-db")
    if sigma2 is None:
        sigma2 = 10.0 ** (-float(snr_db) / 10.0)
    return n, int(m), sparsity, float(sigma2), snr_db


def _prepare_out(value):
    out = Path(value)
    if out.parent and not out.parent.exists():
        out.parent.mkdir(parents=True, exist_ok=True)
    return out


def _figure_path(out):
    return out.with_suffix(".png")


def _write_rows(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def cmd_recover(args):
    s = Settings(args)
    n, m, sparsity, sigma2, _ = _resolve_problem(s)
    seed = int(s.get("seed", 0))
    t_max = int(s.get("t_max", 50))
    rel_tol = float(s.get("rel_tol", 1e-8))
    algorithm = s.get("algorithm", "tsr-dft")

    prior = BernoulliGaussianPrior(sparsity)
    root = np.random.SeedSequence(entropy=seed, spawn_key=(0, 0))
    x = sample_signal(prior, n, np.random.SeedSequence(entropy=seed, spawn_key=(0, 0, 0)))
    rows = sample_rows(n, m, np.random.SeedSequence(entropy=seed, spawn_key=(0, 0, 1)))
    noise = sample_noise(m, sigma2, np.random.SeedSequence(entropy=seed, spawn_key=(0, 0, 2)))
    if algorithm == "amp-iid":
        op = IidGaussianOperator(m=m, n=n,
                                 seed=np.random.SeedSequence(entropy=seed, spawn_key=(0, 0, 3)))
    else:
        op = PartialDftOperator(n=n, selected_rows=rows)
    inst = ProblemInstance(x_true=x, y=op.forward(x) + noise,
                           sigma2=sigma2, operator=op, seed=seed)
    runner = run_tsr if algorithm == "tsr-dft" else run_amp
    trace = runner(inst, prior, t_max=t_max, rel_tol=rel_tol)

    mse_db = [10 * np.log10(v) if v > 0 else float("-inf") for v in trace.mse]
    print(f"{algorithm}: {trace.iterations_run} iterations ({trace.stop_reason}), "
          f"final MSE {mse_db[-1]:.2f} dB, {trace.clamp_events} clamp events")

    out = s.get("out")
    if out:
        out = _prepare_out(out)
        fmt = s.get("format", "csv")
        keys = sorted(trace.scalars)
        if fmt == "csv":
            rows_out = [
                [i + 1, repr(mse_db[i])] + [repr(trace.scalars[k][i]) for k in keys]
                for i in range(len(trace.mse))
            ]
            _write_rows(out, ["iteration", "mse_db"] + keys, rows_out)
        else:
            payload = {
                "algorithm": algorithm,
                "config": {"n": n, "m": m, "sparsity": sparsity, "sigma2": sigma2,
                           "seed": seed, "t_max": t_max, "rel_tol": rel_tol},
                "iterations_run": trace.iterations_run,
                "stop_reason": trace.stop_reason,
                "clamp_events": trace.clamp_events,
                "mse_db": mse_db,
                "scalars": trace.scalars,
            }
            with open(out, "w", encoding="utf-8") as handle:
                json.dump(payload, handle, indent=2)
                handle.write("\n")
        if not s.get("no_plot"):
            from .figures import plot_trace
            plot_trace(trace, _figure_path(out), title=f"{algorithm} single instance")
        print(f"wrote {out}")
    return 0


def cmd_mc(args):
    s = Settings(args)
    n, m, sparsity, sigma2, snr_db = _resolve_problem(s)
    algorithms = s.get("algorithms", ",".join(ALGORITHMS))
    if isinstance(algorithms, str):
        algorithms = tuple(a.strip() for a in algorithms.split(",") if a.strip())
    config = ExperimentConfig(
        n=n, m=m, sparsity=sparsity, sigma2=sigma2,
        trials=int(s.require("trials")),
        algorithms=algorithms,
        t_max=int(s.get("t_max", 50)),
        rel_tol=float(s.get("rel_tol", 1e-8)),
        master_seed=int(s.get("seed", 0)),
        row_selection=s.get("row_selection", "per-trial"),
        share_instances=not s.get("independent_instances", False),
        workers=int(s.get("workers", 1)),
        snr_db=snr_db,
    )
    report = run_experiment(config)
    for name, res in report.results.items():
        print(f"{name}: {len(res.iterations)} iterations, "
              f"final mean MSE {res.mean_mse_db[-1]:.2f} dB "
              f"({res.trials_used} trials, {res.trials_failed} failed, "
              f"{res.clamp_events} clamp events)")
    out = s.get("out")
    if out:
        out = _prepare_out(out)
        emit_report(report, s.get("format", "csv"), out)
        if not s.get("no_plot"):
            from .figures import plot_report
            plot_report(report, _figure_path(out))
        print(f"wrote {out}")
    return 0


def cmd_se(args):
    s = Settings(args)
    n, m, sparsity, sigma2, _ = _resolve_problem(s)
    params = SeParams(n=n, m=m, sigma2=sigma2,
                      prior=BernoulliGaussianPrior(sparsity),
                      t_max=int(s.get("t_max", 500)),
                      rel_tol=float(s.get("rel_tol", 1e-12)))
    trajectories = {"tsr-dft": se_tsr(params), "amp-iid": se_amp(params)}
    for name, traj in trajectories.items():
        status = "converged" if traj.converged else "iteration cap"
        extra = ", exact-recovery regime" if traj.exact_recovery else ""
        print(f"{name}: {len(traj.eta)} iterations ({status}{extra}), "
              f"eta_inf = {traj.fixed_point_eta:.6g}, "
              f"predicted MSE {10 * np.log10(traj.fixed_point_mse):.2f} dB")
    out = s.get("out")
    if out:
        out = _prepare_out(out)
        fmt = s.get("format", "csv")
        if fmt == "csv":
            rows_out = []
            for name, traj in trajectories.items():
                for i, (eta, mse) in enumerate(zip(traj.eta, traj.mse_pred)):
                    rows_out.append([name, i + 1, repr(traj.v[i]), repr(eta),
                                     repr(10 * np.log10(mse))])
            _write_rows(out, ["algorithm", "iteration", "v", "eta", "pred_mse_db"],
                        rows_out)
        else:
            payload = {
                "config": {"n": n, "m": m, "sparsity": sparsity, "sigma2": sigma2},
                "trajectories": {
                    name: {"v": traj.v, "eta": traj.eta, "mse_pred": traj.mse_pred,
                           "converged": traj.converged,
                           "exact_recovery": traj.exact_recovery}
                    for name, traj in trajectories.items()
                },
            }
            with open(out, "w", encoding="utf-8") as handle:
                json.dump(payload, handle, indent=2)
                handle.write("\n")
        if not s.get("no_plot"):
            from .figures import plot_se_trajectories
            plot_se_trajectories(
                trajectories, _figure_path(out),
                title=f"state evolution: m/n={m / n:.3f}, lambda={sparsity}, "
                      f"sigma2={sigma2:.3g}")
        print(f"wrote {out}")
    return 0


def cmd_check(args):
    grid = PROPERTY_GRID
    if args.quick:
        grid = tuple((lam, r, s2) for (lam, r, s2) in PROPERTY_GRID
                     if lam == 0.4 and r == 0.7)
    report = run_property_suite(grid=grid)
    for line in report.lines():
        print(line)
    n_fail = len(report.failures)
    print(f"{len(report.checks)} checks, {n_fail} failures")
    return 0 if report.ok else 1


def cmd_fixed_point(args):
    s = Settings(args)
    sparsity = s.get("sparsity")
    if sparsity is not None:
        n = int(s.get("n", 1000))
        m = s.get("m")
        ratio = float(s.get("m_over_n")) if s.get("m_over_n") else (
            int(m) / n if m else None)
        if ratio is None:
            raise SystemExit("error: give --m-over-n (or --n and --m)")
        sigma2 = s.get("sigma2")
        if sigma2 is None and s.get("snr_db") is not None:
            sigma2 = 10.0 ** (-float(s.get("snr_db")) / 10.0)
        if sigma2 is None:
            raise SystemExit("error: give --sigma2 or --snr-db")
        points = [(float(sparsity), ratio, float(sigma2))]
    else:
        points = list(PROPERTY_GRID)

    rows_out = []
    print(f"{'lambda':>8} {'m/n':>6} {'sigma2':>9} {'eta_inf':>12} {'residual':>11} conv")
    for lam, ratio, sigma2 in points:
        n = 1000
        m = int(round(ratio * n))
        params = SeParams(n=n, m=m, sigma2=sigma2, prior=BernoulliGaussianPrior(lam),
                          t_max=int(s.get("t_max", 500)),
                          rel_tol=float(s.get("rel_tol", 1e-12)))
        traj = se_tsr(params)
        residual = fixed_point_residual(traj.fixed_point_eta, params)
        print(f"{lam:8.3g} {ratio:6.3g} {sigma2:9.3g} {traj.fixed_point_eta:12.6g} "
              f"{residual:11.3e} {traj.converged}")
        rows_out.append([lam, ratio, sigma2, repr(traj.fixed_point_eta),
                         repr(residual), traj.converged])
    out = s.get("out")
    if out:
        _write_rows(_prepare_out(out),
                    ["lambda", "m_over_n", "sigma2", "eta_inf", "residual", "converged"],
                    rows_out)
        print(f"wrote {out}")
    return 0


_COMMANDS = {
    "recover": cmd_recover,
    "mc": cmd_mc,
    "se": cmd_se,
    "check": cmd_check,
    "fixed-point": cmd_fixed_point,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    return _COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
