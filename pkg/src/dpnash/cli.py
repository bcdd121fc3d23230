"""Command-line front end: ``dpnash <subcommand> --config PATH [...]``.

Subcommands
-----------
equilibrium   equilibrium bids, dispatch and costs of the configured game
seek          one exact or private seeking run, trajectory written as CSV
attack        least-squares inference on a stored trajectory or observation
experiment    a Monte Carlo campaign (privacy, convergence, fidelity, moments)
check         step-size bound, spectral radius, sensitivity, calibrated scale

Exit codes: 0 success, 2 invalid config or arguments, 3 divergence,
4 I/O failure, 5 audit mismatch. Errors are printed to stderr as a JSON
object ``{"error": <kind>, "message": ...}``.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import kernel as _kernel
from .attack import AttackObservation, infer, observe
from .config import load_config
from .errors import ConfigError, DivergenceError, DpNashError
from .experiments import audit, check_summary, run_experiment
from .game import nash_equilibrium, recover_dispatch, social_optimum, total_cost
from .privacy import PrivacyBudget, calibrate, draw_laplace, make_rng, sensitivity
from .seeking import NoiseRealization, SeekConfig, read_trajectory_csv, seek, write_trajectory_csv

EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_IO = 4
EXIT_AUDIT = 5


def _clean(obj):
    """Make numpy values and non-finite floats JSON-safe."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def _emit(args, payload: dict, lines) -> None:
    if args.json:
        json.dump(_clean(payload), sys.stdout, indent=2)
        sys.stdout.write("\n")
    else:
        for line in lines:
            print(line)


def _fmt_vec(v) -> str:
    return "[" + ", ".join(f"{x:.4f}" for x in np.asarray(v, dtype=float)) + "]"


def _config(args):
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "runs", None) is not None:
        if args.runs < 1:
            raise ConfigError("--runs must be >= 1")
        cfg.runs = args.runs
    return cfg


def _noise_scale(args, cfg):
    """Noise scale from --sigma, else --epsilon/--mu, else None (exact run)."""
    if args.sigma is not None:
        if args.sigma < 0:
            raise ConfigError("--sigma must be nonnegative")
        return args.sigma
    if args.epsilon is not None:
        sens = sensitivity(cfg.game.prosumers, cfg.game.market)
        return calibrate(PrivacyBudget(args.epsilon, args.mu), sens).sigma
    return None


# ------------------------------------------------------------------ commands

def cmd_equilibrium(args) -> int:
    cfg = _config(args)
    game = cfg.game
    coeffs = game.coefficients()
    b = nash_equilibrium(coeffs)
    disp = recover_dispatch(b, game.prosumers, game.market)
    opt = social_optimum(game.prosumers, game.market)
    cost = total_cost(disp, game.prosumers)
    opt_cost = total_cost(opt, game.prosumers)
    payload = {
        "beta": coeffs.beta,
        "equilibrium_bids": b,
        "price": disp.price,
        "traded": disp.q,
        "production": disp.p,
        "total_cost": cost,
        "social_optimum": {"price": opt.price, "traded": opt.q, "production": opt.p, "total_cost": opt_cost},
    }
    lines = [
        f"beta          {_fmt_vec(coeffs.beta)}",
        f"equilibrium   {_fmt_vec(b)}",
        f"price         {disp.price:.6f}",
        f"traded q      {_fmt_vec(disp.q)}",
        f"production p  {_fmt_vec(disp.p)}",
        f"total cost    {cost:.6f}",
        f"optimum cost  {opt_cost:.6f}  (price {opt.price:.6f})",
    ]
    _emit(args, payload, lines)
    return 0


def cmd_seek(args) -> int:
    cfg = _config(args)
    sigma = _noise_scale(args, cfg)
    coeffs = cfg.game.coefficients()
    seek_cfg = SeekConfig(
        alpha=cfg.seek.alpha, tau=cfg.seek.tau, max_iter=cfg.seek.max_iter,
        record_every=args.record_every if args.record_every is not None else cfg.seek.record_every,
        min_iter=args.min_iter,
    )
    noise = None
    if sigma is not None:
        noise = NoiseRealization(draw_laplace(make_rng(cfg.seed), sigma, cfg.game.count), sigma)
    traj = seek(coeffs, cfg.graph, seek_cfg, noise=noise)
    b = traj.own_bids()
    disp = recover_dispatch(b, cfg.game.prosumers, cfg.game.market)
    out = Path(args.out or cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "trajectory.csv"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        write_trajectory_csv(traj, fh)
    payload = {
        "mode": "exact" if noise is None else "private",
        "sigma": sigma,
        "seed": cfg.seed,
        "gamma": None if noise is None else noise.gamma,
        "converged": traj.converged,
        "iterations": traj.iterations,
        "bids": b,
        "total_cost": total_cost(disp, cfg.game.prosumers),
        "trajectory": str(path),
        "kernel": _kernel.BACKEND_NAME,
    }
    lines = [
        f"mode        {payload['mode']}" + ("" if sigma is None else f" (sigma={sigma:g}, seed={cfg.seed})"),
        f"converged   {traj.converged} after {traj.iterations} iterations",
        f"bids        {_fmt_vec(b)}",
        f"total cost  {payload['total_cost']:.6f}",
        f"trajectory  {path}",
    ]
    _emit(args, payload, lines)
    return 0


def cmd_attack(args) -> int:
    if args.observation:
        obs = AttackObservation.loads(Path(args.observation).read_text(encoding="utf-8"))
    else:
        if not (args.config and args.trajectory):
            raise ConfigError("attack needs --observation, or --config with --trajectory")
        cfg = _config(args)
        with open(args.trajectory, encoding="utf-8") as fh:
            traj = read_trajectory_csv(fh)
        victim = args.victim if args.victim is not None else (cfg.attack.victim if cfg.attack else 0)
        start = args.start if args.start is not None else (cfg.attack.start if cfg.attack else 0)
        budget = args.budget if args.budget is not None else (cfg.attack.budgets[0] if cfg.attack else 4)
        try:
            obs = observe(traj, cfg.game, cfg.graph, cfg.seek.alpha, victim, start, start + budget - 1)
        except KeyError as exc:
            raise ConfigError(f"trajectory does not cover the window: {exc.args[0]}") from None
    res = infer(obs, method=args.method)
    payload = {
        "victim": obs.victim,
        "window": [obs.k1, obs.k2],
        "beta_hat": res.beta_hat,
        "d_hat": res.d_hat,
        "residual": res.residual,
        "determined": res.determined,
        "rank": res.rank,
        "unknowns": res.unknowns,
        "condition": res.condition,
        "warnings": res.warnings,
    }
    lines = [
        f"victim {obs.victim}, window {obs.k1}..{obs.k2}",
        f"d_hat       {res.d_hat:.6f}  (beta_hat {res.beta_hat:.6f})",
        f"residual    {res.residual:.3e}",
        f"determined  {res.determined}  (rank {res.rank} of {res.unknowns})",
    ] + [f"warning: {w}" for w in res.warnings]
    _emit(args, payload, lines)
    return 0


def cmd_experiment(args) -> int:
    cfg = _config(args)
    if args.kind:
        cfg.experiment = args.kind
    report = run_experiment(cfg, threads=args.threads)
    problems = audit(report, cfg)
    out = Path(args.out or cfg.output)
    paths = report.write(out)
    payload = report.summary()
    payload["files"] = {k: str(v) for k, v in paths.items()}
    payload["audit"] = problems
    lines = [f"{report.kind}: {len(report.records.rows)} records, {report.failed} failed"]
    cols = report.aggregates.columns
    shown = [c for c in cols if not c.startswith(("mean_b_", "se_b_"))]
    lines.append("  ".join(f"{c:>14s}" for c in shown))
    for row in report.aggregates.rows:
        lines.append("  ".join(f"{_short(row[c]):>14s}" for c in shown))
    lines += [f"wrote {p}" for p in paths.values()]
    lines += [f"warning: {w}" for w in report.warnings]
    if problems:
        lines += [f"audit mismatch: {p}" for p in problems]
    _emit(args, payload, lines)
    return EXIT_AUDIT if problems else 0


def _short(v) -> str:
    if isinstance(v, bool):
        return str(v)
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def cmd_check(args) -> int:
    cfg = _config(args)
    eps = args.epsilon
    out = check_summary(cfg, epsilon=eps, mu_adj=args.mu)
    lines = [
        f"sensitivity A   {out['sensitivity']:.6f}",
        f"alpha           {out['alpha']:g}",
    ]
    if out.get("alpha_max") is not None:
        ok = "admissible" if out["alpha_admissible"] else "ABOVE the bound"
        lines.append(f"alpha_max       {out['alpha_max']:.6f}  ({ok})")
    else:
        lines.append(f"alpha_max       none ({out.get('alpha_error')})")
    lines.append(f"spectral radius {out['spectral_radius']:.6f}")
    if "sigma" in out:
        lines.append(f"sigma           {out['sigma']:.6f}  (epsilon={out['epsilon']:g}, mu={out['mu_adj']:g})")
        if "variance_bound" in out:
            lines.append(f"variance bound  {out['variance_bound']:.6g}")
    _emit(args, out, lines)
    return 0


# ------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file or bundled config name")
    common.add_argument("--out", help="output directory (default: config 'output')")
    common.add_argument("--seed", type=int, help="root seed override")
    common.add_argument("--runs", type=int, help="Monte Carlo run count override")
    common.add_argument("--json", action="store_true", help="machine-readable JSON on stdout")
    common.add_argument("--threads", type=int, help="worker threads (fallback: $DPNASH_THREADS)")

    noise = argparse.ArgumentParser(add_help=False)
    noise.add_argument("--sigma", type=float, help="Laplace scale")
    noise.add_argument("--epsilon", type=float, help="privacy budget; calibrates sigma")
    noise.add_argument("--mu", type=float, default=1.0, help="adjacency radius for --epsilon (default 1)")

    p = argparse.ArgumentParser(prog="dpnash", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"dpnash {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("equilibrium", parents=[common], help="equilibrium, dispatch and costs")

    s = sub.add_parser("seek", parents=[common, noise], help="single seeking run")
    s.add_argument("--record-every", type=int, help="state recording stride (0: endpoints only)")
    s.add_argument("--min-iter", type=int, default=0, help="do not stop before this many updates")

    a = sub.add_parser("attack", parents=[common], help="inference attack replay")
    a.add_argument("--trajectory", help="trajectory CSV written by 'seek'")
    a.add_argument("--observation", help="observation JSON (alternative to --config/--trajectory)")
    a.add_argument("--victim", type=int)
    a.add_argument("--start", type=int, help="first observed iteration")
    a.add_argument("--budget", type=int, help="number of observed iterations")
    a.add_argument("--method", choices=("trajectory", "stacked"), default="trajectory")

    e = sub.add_parser("experiment", parents=[common], help="Monte Carlo campaign")
    e.add_argument("--kind", choices=("privacy", "convergence", "fidelity", "moments"),
                   help="override the config's experiment kind")

    sub.add_parser("check", parents=[common, noise], help="bounds and calibration")
    return p


def _fail(kind: str, message: str, code: int) -> int:
    json.dump({"error": kind, "message": message}, sys.stderr)
    sys.stderr.write("\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command != "attack" and not args.config:
        return _fail("config", "--config is required", EXIT_CONFIG)
    handler = {
        "equilibrium": cmd_equilibrium,
        "seek": cmd_seek,
        "attack": cmd_attack,
        "experiment": cmd_experiment,
        "check": cmd_check,
    }[args.command]
    try:
        return handler(args)
    except DivergenceError as exc:
        return _fail("divergence", str(exc), EXIT_DIVERGED)
    except OSError as exc:
        return _fail("io", str(exc), EXIT_IO)
    except (DpNashError, ValueError) as exc:
        return _fail("config", str(exc), EXIT_CONFIG)


if __name__ == "__main__":
    sys.exit(main())
