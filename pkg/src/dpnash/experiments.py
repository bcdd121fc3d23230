"""Seeded Monte Carlo campaigns: privacy attacks, convergence, fidelity, moments.

Seeding: run ``r`` of a campaign draws its Laplace noise from
``mix_seed(root, stream, r)``. With ``paired`` (default) the stream is 0
for every cell, so all cells reuse the same standard-Laplace draws scaled
by their ``sigma``; otherwise the stream is ``1 + sigma_index``. Runs are
executed on a thread pool and collected in (cell, run) order, so output
never depends on scheduling.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from . import kernel as _kernel
from .attack import attack_statistics, infer, observe
from .config import ExperimentConfig
from .errors import ConfigError, DivergenceError
from .game import nash_equilibrium, recover_dispatch, total_cost
from .network import spectrum
from .privacy import draw_laplace, make_rng, mix_seed
from .reporting import ExperimentReport, Table, parse_csv, values_match
from .seeking import (
    NoiseRealization,
    SeekConfig,
    build_iteration_matrix,
    limiting_deviation,
    seek,
    step_size_bound,
    variance_bound,
    variance_bound_trace,
)

THREADS_ENV = "DPNASH_THREADS"


def resolve_threads(threads=None) -> int:
    if threads is None:
        threads = os.environ.get(THREADS_ENV)
    if threads in (None, ""):
        return 1
    n = int(threads)
    return max(n, 1)


def _map(fn, tasks, threads: int):
    if threads <= 1:
        return [fn(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, tasks))


def run_seed(cfg: ExperimentConfig, sigma_index: int, run: int) -> int:
    stream = 0 if cfg.paired else 1 + sigma_index
    return mix_seed(cfg.seed, stream, run)


def _noise(cfg: ExperimentConfig, sigma: float, seed: int) -> NoiseRealization:
    gamma = draw_laplace(make_rng(seed), sigma, cfg.game.count)
    return NoiseRealization(gamma=gamma, sigma=sigma)


def _report(cfg, kind, records, aggregates, extra=None, failed=0) -> ExperimentReport:
    return ExperimentReport(
        kind=kind,
        records=records,
        aggregates=aggregates,
        extra=extra or {},
        config=cfg.echo(),
        version=__version__,
        backend=_kernel.BACKEND_NAME,
        failed=failed,
        warnings=list(cfg.warnings),
    )


# --------------------------------------------------------------------- privacy

PRIVACY_RUN_COLUMNS = ["sigma", "budget", "run", "d_hat", "abs_error", "seed", "status"]
PRIVACY_AGG_COLUMNS = ["sigma", "budget", "mse", "hit_rate", "n_ok", "n_failed", "mean_d_hat", "median_d_hat"]


def aggregate_privacy(records, true_d: float) -> list:
    cells = {}
    for r in records:
        cells.setdefault((r["sigma"], r["budget"]), []).append(r)
    rows = []
    for (sigma, budget), recs in cells.items():
        ok = [r["d_hat"] for r in recs if r["status"] == "ok"]
        row = {"sigma": sigma, "budget": budget, "n_ok": len(ok), "n_failed": len(recs) - len(ok)}
        if ok:
            st = attack_statistics(ok, true_d)
            row.update(mse=st.mse, hit_rate=st.hit_rate, mean_d_hat=st.mean, median_d_hat=st.median)
        else:
            row.update(mse=float("nan"), hit_rate=float("nan"), mean_d_hat=float("nan"), median_d_hat=float("nan"))
        rows.append(row)
    return rows


def run_privacy_experiment(cfg: ExperimentConfig, threads=None) -> ExperimentReport:
    """Attack the victim's window on seeded private runs for every (sigma, budget)."""
    if cfg.attack is None:
        raise ConfigError("privacy experiment needs an 'attack' section")
    if not cfg.sigmas:
        raise ConfigError("privacy experiment needs noise.sigma (or epsilon)")
    game, graph, att = cfg.game, cfg.graph, cfg.attack
    coeffs = game.coefficients()
    true_d = float(game.d[att.victim])
    last = att.start + max(att.budgets) - 1
    seek_cfg = SeekConfig(alpha=cfg.seek.alpha, tau=cfg.seek.tau, max_iter=last, record_every=1, min_iter=last)

    def one(task):
        si, sigma, run = task
        seed = run_seed(cfg, si, run)
        out = []
        try:
            traj = seek(coeffs, graph, seek_cfg, noise=_noise(cfg, sigma, seed))
        except DivergenceError:
            return [(b, float("nan"), seed, "diverged") for b in att.budgets]
        for b in att.budgets:
            obs = observe(traj, game, graph, cfg.seek.alpha, att.victim, att.start, att.start + b - 1)
            res = infer(obs, method=att.method)
            out.append((b, res.d_hat, seed, "ok"))
        return out

    tasks = [(si, s, r) for si, s in enumerate(cfg.sigmas) for r in range(cfg.runs)]
    results = _map(one, tasks, resolve_threads(threads))
    rows = []
    for (si, sigma, run), outs in zip(tasks, results):
        for b, d_hat, seed, status in outs:
            rows.append({
                "sigma": float(sigma), "budget": b, "run": run, "d_hat": d_hat,
                "abs_error": abs(d_hat - true_d), "seed": seed, "status": status,
            })
    rows.sort(key=lambda r: (cfg.sigmas.index(r["sigma"]), att.budgets.index(r["budget"]), r["run"]))
    failed = sum(r["status"] != "ok" for r in rows)
    agg = aggregate_privacy(rows, true_d)
    return _report(cfg, "privacy", Table(PRIVACY_RUN_COLUMNS, rows), Table(PRIVACY_AGG_COLUMNS, agg), failed=failed)


# ----------------------------------------------------------------- convergence

CONV_RUN_COLUMNS = ["sigma", "run", "iterations", "converged", "final_residual", "seed", "status"]
CONV_AGG_COLUMNS = [
    "sigma", "n_ok", "n_failed", "converged_fraction",
    "mean_iterations", "std_iterations", "min_iterations", "max_iterations",
]
CONV_RESIDUAL_COLUMNS = ["sigma", "run", "iteration", "log_residual"]


def aggregate_convergence(records) -> list:
    cells = {}
    for r in records:
        cells.setdefault(r["sigma"], []).append(r)
    rows = []
    for sigma, recs in cells.items():
        ok = [r for r in recs if r["status"] == "ok"]
        its = np.array([r["iterations"] for r in ok], dtype=float)
        conv = np.array([bool(r["converged"]) for r in ok])
        rows.append({
            "sigma": sigma,
            "n_ok": len(ok),
            "n_failed": len(recs) - len(ok),
            "converged_fraction": float(conv.mean()) if ok else float("nan"),
            "mean_iterations": float(its.mean()) if ok else float("nan"),
            "std_iterations": float(its.std(ddof=1)) if len(ok) > 1 else float("nan"),
            "min_iterations": int(its.min()) if ok else 0,
            "max_iterations": int(its.max()) if ok else 0,
        })
    return rows


def run_convergence_experiment(cfg: ExperimentConfig, threads=None) -> ExperimentReport:
    """Iteration counts and residual decay of private runs for each sigma."""
    if not cfg.sigmas:
        raise ConfigError("convergence experiment needs noise.sigma (or epsilon)")
    coeffs = cfg.game.coefficients()
    seek_cfg = SeekConfig(alpha=cfg.seek.alpha, tau=cfg.seek.tau, max_iter=cfg.seek.max_iter, record_every=0)
    every = max(cfg.residual_every, 1)

    def one(task):
        si, sigma, run = task
        seed = run_seed(cfg, si, run)
        try:
            traj = seek(coeffs, cfg.graph, seek_cfg, noise=_noise(cfg, sigma, seed))
        except DivergenceError as exc:
            return seed, "diverged", exc.iteration, False, float("nan"), None
        with np.errstate(divide="ignore"):
            logs = np.maximum(np.log10(traj.residuals_fro), -16.0)
        keep = np.arange(0, traj.iterations, every)
        if traj.iterations and keep[-1] != traj.iterations - 1:
            keep = np.append(keep, traj.iterations - 1)
        return seed, "ok", traj.iterations, traj.converged, float(traj.residuals[-1]), (keep, logs[keep])

    tasks = [(si, s, r) for si, s in enumerate(cfg.sigmas) for r in range(cfg.runs)]
    results = _map(one, tasks, resolve_threads(threads))
    rows, resid = [], []
    for (si, sigma, run), (seed, status, its, conv, last, series) in zip(tasks, results):
        rows.append({
            "sigma": float(sigma), "run": run, "iterations": int(its), "converged": bool(conv),
            "final_residual": last, "seed": seed, "status": status,
        })
        if series is not None:
            for k, lg in zip(*series):
                resid.append({"sigma": float(sigma), "run": run, "iteration": int(k), "log_residual": float(lg)})
    failed = sum(r["status"] != "ok" for r in rows)
    agg = aggregate_convergence(rows)
    return _report(
        cfg, "convergence", Table(CONV_RUN_COLUMNS, rows), Table(CONV_AGG_COLUMNS, agg),
        extra={"residuals": Table(CONV_RESIDUAL_COLUMNS, resid)}, failed=failed,
    )


# -------------------------------------------------------------------- fidelity

FID_RUN_COLUMNS = ["sigma", "a", "run", "cost", "cost_gap", "iterations", "seed", "status"]
FID_AGG_COLUMNS = [
    "sigma", "a", "mean_gap", "negative_gap_pct", "strict_negative_pct",
    "n_ok", "n_failed", "reference_cost",
]


def aggregate_fidelity(records, reference: dict, resolution: float) -> list:
    cells = {}
    for r in records:
        cells.setdefault((r["sigma"], r["a"]), []).append(r)
    rows = []
    for (sigma, a), recs in cells.items():
        gaps = np.array([r["cost_gap"] for r in recs if r["status"] == "ok"], dtype=float)
        n = gaps.size
        rows.append({
            "sigma": sigma,
            "a": a,
            "mean_gap": float(gaps.mean()) if n else float("nan"),
            "negative_gap_pct": 100.0 * float(np.mean(gaps < -resolution)) if n else float("nan"),
            "strict_negative_pct": 100.0 * float(np.mean(gaps < 0)) if n else float("nan"),
            "n_ok": n,
            "n_failed": len(recs) - n,
            "reference_cost": reference[a],
        })
    return rows


def run_fidelity_experiment(cfg: ExperimentConfig, threads=None) -> ExperimentReport:
    """Total-cost gap of private runs against the exact run, per (sigma, a).

    Each prosumer bids the own-coordinate of its final estimate. The
    reference is the exact iteration under the same settings. A gap counts
    as negative when it is below ``-gap_resolution``.
    """
    if not cfg.sigmas:
        raise ConfigError("fidelity experiment needs noise.sigma (or epsilon)")
    seek_cfg = SeekConfig(alpha=cfg.seek.alpha, tau=cfg.seek.tau, max_iter=cfg.seek.max_iter, record_every=0)
    games = {a: cfg.game.with_sensitivity(a) for a in cfg.a_values}
    reference = {}
    for a, g in games.items():
        exact = seek(g.coefficients(), cfg.graph, seek_cfg)
        reference[a] = total_cost(recover_dispatch(exact.own_bids(), g.prosumers, g.market), g.prosumers)

    def one(task):
        si, sigma, a, run = task
        g = games[a]
        seed = run_seed(cfg, si, run)
        try:
            traj = seek(g.coefficients(), cfg.graph, seek_cfg, noise=_noise(cfg, sigma, seed))
        except DivergenceError as exc:
            return seed, "diverged", exc.iteration, float("nan"), None
        bids = traj.own_bids()
        cost = total_cost(recover_dispatch(bids, g.prosumers, g.market), g.prosumers)
        return seed, "ok", traj.iterations, cost, bids

    tasks = [(si, s, a, r) for si, s in enumerate(cfg.sigmas) for a in cfg.a_values for r in range(cfg.runs)]
    results = _map(one, tasks, resolve_threads(threads))
    n = cfg.game.count
    rows, bid_rows = [], []
    for (si, sigma, a, run), (seed, status, its, cost, bids) in zip(tasks, results):
        rows.append({
            "sigma": float(sigma), "a": float(a), "run": run, "cost": cost,
            "cost_gap": cost - reference[a], "iterations": int(its), "seed": seed, "status": status,
        })
        if bids is not None:
            br = {"sigma": float(sigma), "a": float(a), "run": run}
            br.update({f"b_{i}": float(bids[i]) for i in range(n)})
            bid_rows.append(br)
    failed = sum(r["status"] != "ok" for r in rows)
    agg = aggregate_fidelity(rows, reference, cfg.gap_resolution)
    bid_cols = ["sigma", "a", "run"] + [f"b_{i}" for i in range(n)]
    return _report(
        cfg, "fidelity", Table(FID_RUN_COLUMNS, rows), Table(FID_AGG_COLUMNS, agg),
        extra={"bids": Table(bid_cols, bid_rows)}, failed=failed,
    )


# --------------------------------------------------------------------- moments

def _moment_columns(n):
    runs = ["sigma", "run", "iterations", "converged", "sq_deviation", "seed", "status"]
    runs += [f"b_{i}" for i in range(n)]
    agg = ["sigma", "n_ok", "n_failed", "mean_sq_deviation", "variance_bound",
           "variance_bound_trace", "exact_limit", "max_abs_z"]
    agg += [f"mean_b_{i}" for i in range(n)] + [f"se_b_{i}" for i in range(n)]
    return runs, agg


def aggregate_moments(records, bstar, bounds: dict, n: int) -> list:
    cells = {}
    for r in records:
        cells.setdefault(r["sigma"], []).append(r)
    rows = []
    for sigma, recs in cells.items():
        ok = [r for r in recs if r["status"] == "ok"]
        B = np.array([[r[f"b_{i}"] for i in range(n)] for r in ok], dtype=float).reshape(-1, n)
        dev = np.array([r["sq_deviation"] for r in ok], dtype=float)
        mean = B.mean(axis=0) if ok else np.full(n, np.nan)
        se = B.std(axis=0, ddof=1) / np.sqrt(len(ok)) if len(ok) > 1 else np.full(n, np.nan)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(se > 0, np.abs(mean - bstar) / se, np.where(mean == bstar, 0.0, np.inf))
        row = {
            "sigma": sigma,
            "n_ok": len(ok),
            "n_failed": len(recs) - len(ok),
            "mean_sq_deviation": float(dev.mean()) if ok else float("nan"),
            "max_abs_z": float(z.max()) if ok else float("nan"),
        }
        row.update(bounds[sigma])
        row.update({f"mean_b_{i}": float(mean[i]) for i in range(n)})
        row.update({f"se_b_{i}": float(se[i]) for i in range(n)})
        rows.append(row)
    return rows


def _moment_bounds(cfg, coeffs, sigma):
    m = build_iteration_matrix(coeffs, cfg.graph, cfg.seek.alpha).m
    return {
        "variance_bound": variance_bound(coeffs, m, cfg.seek.alpha, sigma),
        "variance_bound_trace": variance_bound_trace(coeffs, m, cfg.seek.alpha, sigma),
        "exact_limit": limiting_deviation(coeffs, sigma),
    }


def run_moments_experiment(cfg: ExperimentConfig, threads=None) -> ExperimentReport:
    """Sample mean and mean squared deviation of converged private runs.

    Compares the empirical moments with the equilibrium and with the
    stated variance bound; ``exact_limit`` is the closed-form value of the
    mean squared deviation for a fixed Laplace draw.
    """
    if not cfg.sigmas:
        raise ConfigError("moments experiment needs noise.sigma (or epsilon)")
    coeffs = cfg.game.coefficients()
    n = coeffs.count
    bstar = nash_equilibrium(coeffs)
    target = np.tile(bstar, (n, 1))
    seek_cfg = SeekConfig(alpha=cfg.seek.alpha, tau=cfg.seek.tau, max_iter=cfg.seek.max_iter, record_every=0)
    bounds = {float(s): _moment_bounds(cfg, coeffs, float(s)) for s in cfg.sigmas}

    def one(task):
        si, sigma, run = task
        seed = run_seed(cfg, si, run)
        try:
            traj = seek(coeffs, cfg.graph, seek_cfg, noise=_noise(cfg, sigma, seed))
        except DivergenceError as exc:
            return seed, "diverged", exc.iteration, False, float("nan"), np.full(n, np.nan)
        y = traj.final
        return seed, "ok", traj.iterations, traj.converged, float(np.sum((y - target) ** 2)), y.mean(axis=0)

    tasks = [(si, s, r) for si, s in enumerate(cfg.sigmas) for r in range(cfg.runs)]
    results = _map(one, tasks, resolve_threads(threads))
    rows = []
    for (si, sigma, run), (seed, status, its, conv, dev, bids) in zip(tasks, results):
        row = {"sigma": float(sigma), "run": run, "iterations": int(its), "converged": bool(conv),
               "sq_deviation": dev, "seed": seed, "status": status}
        row.update({f"b_{i}": float(bids[i]) for i in range(n)})
        rows.append(row)
    failed = sum(r["status"] != "ok" for r in rows)
    run_cols, agg_cols = _moment_columns(n)
    agg = aggregate_moments(rows, bstar, bounds, n)
    return _report(cfg, "moments", Table(run_cols, rows), Table(agg_cols, agg), failed=failed)


# ----------------------------------------------------------------------------

RUNNERS = {
    "privacy": run_privacy_experiment,
    "convergence": run_convergence_experiment,
    "fidelity": run_fidelity_experiment,
    "moments": run_moments_experiment,
}


def run_experiment(cfg: ExperimentConfig, threads=None) -> ExperimentReport:
    if cfg.experiment not in RUNNERS:
        raise ConfigError(f"config does not name a known experiment (got {cfg.experiment!r})")
    return RUNNERS[cfg.experiment](cfg, threads=threads)


def audit(report: ExperimentReport, cfg: ExperimentConfig) -> list:
    """Recompute the aggregates from the serialized per-run records.

    Returns a list of mismatch descriptions (empty when consistent).
    """
    texts = report.csv_texts()
    records = parse_csv(texts["runs"])
    for r in records:
        if r.get("d_hat") is None and "d_hat" in r:
            r["d_hat"] = float("nan")
    stored = parse_csv(texts["aggregate"])
    kind = report.kind
    if kind == "privacy":
        fresh = aggregate_privacy(records, float(cfg.game.d[cfg.attack.victim]))
    elif kind == "convergence":
        fresh = aggregate_convergence(records)
    elif kind == "fidelity":
        ref = {row["a"]: row["reference_cost"] for row in stored}
        fresh = aggregate_fidelity(records, ref, cfg.gap_resolution)
    elif kind == "moments":
        coeffs = cfg.game.coefficients()
        bstar = nash_equilibrium(coeffs)
        bounds = {row["sigma"]: {k: row[k] for k in ("variance_bound", "variance_bound_trace", "exact_limit")}
                  for row in stored}
        fresh = aggregate_moments(records, bstar, bounds, coeffs.count)
    else:
        raise ConfigError(f"cannot audit {kind!r}")
    problems = []
    if len(fresh) != len(stored):
        problems.append(f"{len(stored)} aggregate rows stored, {len(fresh)} recomputed")
    for got, want in zip(stored, fresh):
        for col, val in want.items():
            if not values_match(got.get(col), val, rtol=1e-9):
                problems.append(f"{col}: stored {got.get(col)!r}, recomputed {val!r}")
    return problems


def check_summary(cfg: ExperimentConfig, epsilon=None, mu_adj=None) -> dict:
    """Step-size bound, spectral radius and privacy calibration for a config."""
    from .privacy import PrivacyBudget, calibrate, sensitivity

    coeffs = cfg.game.coefficients()
    spec = spectrum(cfg.graph)
    out = {
        "count": cfg.game.count,
        "beta": coeffs.beta.tolist(),
        "graph_eigenvalues": spec.eigenvalues.tolist(),
        "sensitivity": sensitivity(cfg.game.prosumers, cfg.game.market),
        "alpha": cfg.seek.alpha,
    }
    try:
        out["alpha_max"] = step_size_bound(coeffs, spec)
        out["alpha_admissible"] = cfg.seek.alpha < out["alpha_max"]
    except Exception as exc:  # reported, not fatal
        out["alpha_max"] = None
        out["alpha_error"] = str(exc)
    m = build_iteration_matrix(coeffs, cfg.graph, cfg.seek.alpha).m
    out["spectral_radius"] = m
    if epsilon is not None:
        spec_l = calibrate(PrivacyBudget(float(epsilon), float(mu_adj if mu_adj is not None else 1.0)),
                           out["sensitivity"])
        out["epsilon"] = float(epsilon)
        out["mu_adj"] = float(mu_adj if mu_adj is not None else 1.0)
        out["sigma"] = spec_l.sigma
        if m < 1:
            out["variance_bound"] = variance_bound(coeffs, m, cfg.seek.alpha, spec_l.sigma)
            out["exact_limit"] = limiting_deviation(coeffs, spec_l.sigma)
    return out
