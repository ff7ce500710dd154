"""Command-line front end: solve, check, toy, diagnose.

Every command writes its data to files inside --out and keeps human text
on stderr; the exit code is the only machine contract.  0 means success
(Converged / hypothesis passed / assertions hold), 2 is a definite
negative verdict (blow-up, failed hypothesis, violated bound), 3 means
the iteration gave up, and 1 covers configuration or input errors.
Seeds are always explicit so a rerun of the manifest reproduces the
files byte for byte; the --threads worker cap is deliberately left out
of the manifest because it must not change any output.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
from typing import Optional

import numpy as np

from . import __version__
from .diagnostics import bound_curves, save_bound_curves, save_z_histogram, z_monitor
from .model import (
    ModelError,
    ProblemSpec,
    SamplerConfig,
    builtin_catalog,
    load_problem,
    problem_from_dict,
    problem_to_dict,
)
from .monotone import (
    check_alpha_monotone,
    check_alpha_monotone_differential,
    check_g_monotonicity,
    check_hyp_autonomous,
    check_hyp_coupled,
    check_trade_condition,
    check_volatility_condition,
    check_weaker_monotonicity,
    save_report,
    search_matrix_A,
)
from .paths import MonteCarloConfig
from .reference import certificate_line, save_trajectory, toy_blowup_certificate, toy_ode_solve
from .solver import ContinuationConfig, GridConfig, load_result, picard_solve, save_result

__all__ = ["main", "build_parser", "RunConfig"]

_STATUS_EXIT = {"Converged": 0, "BlowUp": 2, "MaxIterations": 3}


class CliError(Exception):
    """Configuration problem; reported on stderr with exit code 1."""


@dataclasses.dataclass
class RunConfig:
    """Everything a solve-style command needs, after flag parsing."""

    spec: ProblemSpec
    problem_echo: dict
    grid: GridConfig
    mc: MonteCarloConfig
    ctrl: ContinuationConfig
    force: bool
    output_dir: str

    def echo(self) -> dict:
        """Manifest view of the run inputs; excludes the worker cap."""
        return {
            "problem": self.problem_echo,
            "horizon": self.spec.horizon,
            "grid": dataclasses.asdict(self.grid),
            "mc": {"n_paths": self.mc.n_paths, "seed": self.mc.seed,
                   "dt": self.mc.dt, "antithetic": self.mc.antithetic},
            "ctrl": dataclasses.asdict(self.ctrl),
            "force": self.force,
        }


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); config errors are 1
        raise CliError(message)


# ---------------------------------------------------------------------------
# Flag parsing helpers
# ---------------------------------------------------------------------------


def _parse_builtin(text: str) -> ProblemSpec:
    name, _, tail = text.partition(":")
    try:
        params = [float(v) for v in tail.split(",")] if tail else []
    except ValueError:
        raise CliError(f"cannot parse builtin parameters in {text!r}") from None
    return builtin_catalog(name, *params)


def _parse_matrix(text: str, m: int) -> np.ndarray:
    """'zero', 'diag:a[,b,...]' (one value broadcasts), or rows 'a,b;c,d'."""
    text = text.strip()
    if text == "zero":
        return np.zeros((m, m))
    if text.startswith("diag:"):
        try:
            vals = [float(v) for v in text[5:].split(",")]
        except ValueError:
            raise CliError(f"cannot parse matrix {text!r}") from None
        if len(vals) == 1:
            vals = vals * m
        if len(vals) != m:
            raise CliError(f"diagonal needs 1 or {m} entries, got {len(vals)}")
        return np.diag(vals)
    try:
        rows = [[float(v) for v in row.split(",")] for row in text.split(";")]
    except ValueError:
        raise CliError(f"cannot parse matrix {text!r}") from None
    mat = np.asarray(rows, dtype=float)
    if mat.shape[1] != mat.shape[0]:
        raise CliError(f"matrix must be square, got {mat.shape}")
    return mat


def _parse_rect(text: str) -> np.ndarray:
    try:
        rows = [[float(v) for v in row.split(",")] for row in text.split(";")]
    except ValueError:
        raise CliError(f"cannot parse matrix {text!r}") from None
    if len({len(r) for r in rows}) != 1:
        raise CliError(f"ragged matrix rows in {text!r}")
    return np.asarray(rows, dtype=float)


def _load_spec(args) -> tuple[ProblemSpec, dict]:
    if bool(args.builtin) == bool(args.problem):
        raise CliError("pass exactly one of --builtin or --problem")
    spec = _parse_builtin(args.builtin) if args.builtin else load_problem(args.problem)
    if getattr(args, "horizon", None) is not None:
        if not args.horizon > 0:
            raise CliError("--horizon must be positive")
        spec = dataclasses.replace(spec, horizon=float(args.horizon))
    return spec, problem_to_dict(spec)


def _run_config(args) -> RunConfig:
    spec, echo = _load_spec(args)
    grid = GridConfig(nodes_x=args.nodes_x, nodes_p=args.nodes_p, nt_sub=args.nt_sub)
    mc = MonteCarloConfig(n_paths=args.n_paths, seed=args.seed, dt=args.dt,
                          antithetic=not args.no_antithetic, threads=args.threads)
    ctrl = ContinuationConfig(window=args.window, tol=args.tol,
                              max_iter=args.max_iter, lip_max=args.lip_max,
                              damping=args.damping)
    return RunConfig(spec=spec, problem_echo=echo, grid=grid, mc=mc, ctrl=ctrl,
                     force=args.force, output_dir=args.out)


def _write_manifest(outdir: str, command: str, echo: dict, extra: dict,
                    files: list) -> str:
    manifest = {
        "command": command,
        "config": echo,
        "inputs_hash": hashlib.sha256(
            json.dumps(echo, sort_keys=True).encode()).hexdigest(),
        "version": __version__,
        "files": sorted(os.path.basename(f) for f in files),
    }
    manifest.update(extra)
    path = os.path.join(outdir, "manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return path


def _say(msg: str):
    print(msg, file=sys.stderr)


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------


def cmd_solve(args) -> int:
    cfg = _run_config(args)
    os.makedirs(cfg.output_dir, exist_ok=True)
    result = picard_solve(cfg.spec, cfg.grid, cfg.mc, cfg.ctrl, force=cfg.force)
    files = save_result(result, os.path.join(cfg.output_dir, "run"))
    gh = result.grad_history
    extra = {
        "status": result.status,
        "blowup_time": result.blowup_time,
        "clamp_rate": result.clamp_rate,
        "final_grad_norms": {"dx": gh[-1][1], "dp": gh[-1][2]} if gh else None,
    }
    _write_manifest(cfg.output_dir, "solve", cfg.echo(), extra, files)
    _say(f"solve: {result.status}"
         + (f" at t={result.blowup_time:.6g}" if result.blowup_time else ""))
    return _STATUS_EXIT[result.status]


# ---------------------------------------------------------------------------
# check
# ---------------------------------------------------------------------------

_HYPS = ("u0", "u0-differential", "autonomous", "coupled", "weaker", "g",
         "volatility", "trade")


def cmd_check(args) -> int:
    spec, echo = _load_spec(args)
    sampler = SamplerConfig(n_samples=args.samples, seed=args.seed,
                            x_box=spec.omega, p_box=spec.p_box, u_box=spec.u_box)
    alpha = args.alpha
    a_mat = _parse_matrix(args.A, spec.m) if args.A else None
    searched = None
    if args.search_A:
        if args.hyp != "coupled":
            raise CliError("--search-A only applies to --hyp coupled")
        # the search itself must exercise the coupled inequality even for
        # drifts that ignore the state, so the autonomous shortcut is off
        searched = search_matrix_A(spec, alpha, sampler, budget=args.budget,
                                   force_coupled=True)
        if searched is None:
            _say(f"check coupled: no admissible A found within budget {args.budget}")
            return 2
        a_mat = searched[0]

    needs_a = {"coupled", "weaker", "volatility", "trade"}
    if args.hyp in needs_a and a_mat is None:
        raise CliError(f"--hyp {args.hyp} needs --A (or --search-A for coupled)")
    if args.hyp == "u0":
        report = check_alpha_monotone(spec.u0, alpha, sampler)
    elif args.hyp == "u0-differential":
        report = check_alpha_monotone_differential(spec.u0, alpha, sampler)
    elif args.hyp == "autonomous":
        report = check_hyp_autonomous(spec, alpha, sampler)
    elif args.hyp == "coupled":
        report = check_hyp_coupled(spec, a_mat, alpha, sampler)
    elif args.hyp == "weaker":
        report = check_weaker_monotonicity(spec, a_mat, alpha, sampler)
    elif args.hyp == "volatility":
        report = check_volatility_condition(spec, a_mat, alpha, sampler)
    elif args.hyp == "trade":
        report = check_trade_condition(spec, a_mat, alpha, sampler)
    else:  # g
        if not (args.n_matrix and args.m_matrix):
            raise CliError("--hyp g needs --n-matrix and --m-matrix")
        report = check_g_monotonicity(spec, _parse_rect(args.n_matrix),
                                      _parse_rect(args.m_matrix), alpha, sampler)

    os.makedirs(args.out, exist_ok=True)
    rpath = save_report(report, os.path.join(args.out, "report.txt"))
    extra = {
        "hypothesis": report.hypothesis,
        "passed": report.passed,
        "margin": report.margin,
        "a_matrix": None if report.a_matrix is None else np.asarray(report.a_matrix).tolist(),
        "searched": searched is not None,
    }
    check_echo = {"problem": echo, "hyp": args.hyp, "alpha": alpha,
                  "A": args.A, "search_A": bool(args.search_A),
                  "samples": args.samples, "seed": args.seed}
    _write_manifest(args.out, "check", check_echo, extra, [rpath])
    _say(f"check {args.hyp}: {'pass' if report.passed else 'FAIL'} "
         f"(margin {report.margin:.3g})")
    return 0 if report.passed else 2


# ---------------------------------------------------------------------------
# toy
# ---------------------------------------------------------------------------


def cmd_toy(args) -> int:
    if not args.dt > 0:
        raise CliError("--dt must be positive")
    traj = toy_ode_solve(args.lam, args.alpha0, args.beta0, args.T, args.dt)
    os.makedirs(args.out, exist_ok=True)
    cpath = save_trajectory(traj, os.path.join(args.out, "trajectory.csv"))
    verdict = certificate_line(args.lam, args.alpha0, args.beta0)
    echo = {"lambda": args.lam, "alpha0": args.alpha0, "beta0": args.beta0,
            "T": args.T, "dt": args.dt}
    extra = {
        "blown_up": traj.blown_up,
        "blowup_time": traj.blowup_time,
        "certificate": toy_blowup_certificate(args.lam, args.alpha0, args.beta0),
        "verdict": verdict,
    }
    _write_manifest(args.out, "toy", echo, extra, [cpath])
    _say(verdict)
    if traj.blown_up:
        _say(f"toy: blew up at t={traj.blowup_time:.6g}")
    return 0


# ---------------------------------------------------------------------------
# diagnose
# ---------------------------------------------------------------------------


def cmd_diagnose(args) -> int:
    if args.run:
        manifest_path = os.path.join(args.run, "manifest.json")
        if not os.path.exists(manifest_path):
            raise CliError(f"no manifest at {manifest_path}")
        with open(manifest_path) as fh:
            run_manifest = json.load(fh)
        spec = problem_from_dict(run_manifest["config"]["problem"])
        result = load_result(os.path.join(args.run, "run"))
        echo_src = {"run": run_manifest["inputs_hash"]}
    else:
        cfg = _run_config(args)
        spec = cfg.spec
        result = picard_solve(spec, cfg.grid, cfg.mc, cfg.ctrl, force=cfg.force)
        if result.status != "Converged":
            _say(f"diagnose: underlying solve ended {result.status}")
            return _STATUS_EXIT[result.status]
        echo_src = cfg.echo()

    a_mat = _parse_matrix(args.A, spec.m) if args.A else None
    T = float(result.field.time_nodes[-1])
    curves = bound_curves(spec, args.alpha, a_mat, T, result.grad_history)
    sampler = SamplerConfig(n_samples=args.samples, seed=args.seed)
    worst, hist = z_monitor(result.field, a_mat, curves.beta, sampler)

    os.makedirs(args.out, exist_ok=True)
    files = [save_bound_curves(curves, result.grad_history, os.path.join(args.out, "bound_curves.csv")),
             save_z_histogram(hist, os.path.join(args.out, "z_histogram.csv"))]

    dx_meas = np.asarray([g[1] for g in result.grad_history])
    dp_meas = np.asarray([g[2] for g in result.grad_history])
    dx_excess = float((dx_meas - curves.dx_bound).max())
    dp_excess = (float((dp_meas - curves.dp_bound_coupled).max())
                 if curves.dp_bound_coupled is not None else None)
    violations = []
    if dx_excess > args.eps:
        violations.append(f"dx_norm exceeds 1/beta(t) by {dx_excess:.3g}")
    if dp_excess is not None and dp_excess > args.eps:
        violations.append(f"dp_norm exceeds the coupled envelope by {dp_excess:.3g}")
    if worst.z_value < -args.eps_z:
        violations.append(f"sampled Z reaches {worst.z_value:.3g}")

    echo = {"source": echo_src, "alpha": args.alpha, "A": args.A,
            "samples": args.samples, "seed": args.seed,
            "eps": args.eps, "eps_z": args.eps_z}
    extra = {
        "dx_excess": dx_excess,
        "dp_excess": dp_excess,
        "z_min": worst.z_value,
        "z_where_t": worst.where[0],
        "violations": violations,
        "asserted": bool(args.assert_),
    }
    _write_manifest(args.out, "diagnose", echo, extra, files)
    for v in violations:
        _say(f"diagnose: {v}")
    if not violations:
        _say(f"diagnose: bounds hold (dx excess {dx_excess:.3g}, z min {worst.z_value:.3g})")
    if args.assert_ and violations:
        return 2
    return 0


# ---------------------------------------------------------------------------
# Parser assembly
# ---------------------------------------------------------------------------


def _problem_flags(sp, horizon: bool = True):
    sp.add_argument("--builtin", help="name[:p1,p2,...] from the builtin catalog")
    sp.add_argument("--problem", help="path to a problem file (TOML)")
    if horizon:
        sp.add_argument("--horizon", type=float, default=None,
                        help="override the problem horizon")


def _solve_flags(sp):
    sp.add_argument("--seed", type=int, required=True,
                    help="Monte Carlo seed (explicit; no wall-clock seeding)")
    sp.add_argument("--n-paths", type=int, default=10000)
    sp.add_argument("--dt", type=float, default=None,
                    help="time step (default horizon/128)")
    sp.add_argument("--nodes-x", type=int, default=17)
    sp.add_argument("--nodes-p", type=int, default=33)
    sp.add_argument("--nt-sub", type=int, default=4)
    sp.add_argument("--window", type=float, default=None)
    sp.add_argument("--tol", type=float, default=1e-4)
    sp.add_argument("--max-iter", type=int, default=40)
    sp.add_argument("--lip-max", type=float, default=None)
    sp.add_argument("--damping", type=float, default=0.0)
    sp.add_argument("--threads", type=int, default=1,
                    help="worker cap; never changes results")
    sp.add_argument("--no-antithetic", action="store_true")
    sp.add_argument("--force", action="store_true",
                    help="run even if the state-box invariance check fails")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="mfglab",
                 description="Monte Carlo laboratory for Lipschitz master fields")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("solve", help="run the windowed fixed-point solver")
    _problem_flags(sp)
    _solve_flags(sp)
    sp.add_argument("--out", default="mfglab-out")
    sp.set_defaults(fn=cmd_solve)

    sp = sub.add_parser("check", help="sample a monotonicity hypothesis")
    _problem_flags(sp, horizon=False)
    sp.add_argument("--hyp", choices=_HYPS, required=True)
    sp.add_argument("--alpha", type=float, default=1.0)
    sp.add_argument("--A", default=None, help="'zero', 'diag:a[,b]', or 'a,b;c,d'")
    sp.add_argument("--search-A", action="store_true", dest="search_A")
    sp.add_argument("--budget", type=int, default=256)
    sp.add_argument("--n-matrix", default=None, help="rows 'a,b;c,d'")
    sp.add_argument("--m-matrix", default=None, help="rows 'a,b;c,d'")
    sp.add_argument("--samples", type=int, default=4096)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", default="mfglab-out")
    sp.set_defaults(fn=cmd_check)

    sp = sub.add_parser("toy", help="integrate the scalar Riccati pair")
    sp.add_argument("--lambda", dest="lam", type=float, required=True)
    sp.add_argument("--alpha0", type=float, required=True)
    sp.add_argument("--beta0", type=float, required=True)
    sp.add_argument("--T", type=float, default=1.0)
    sp.add_argument("--dt", type=float, default=1e-3)
    sp.add_argument("--out", default="mfglab-out")
    sp.set_defaults(fn=cmd_toy)

    sp = sub.add_parser("diagnose", help="gradient envelopes and the Z monitor")
    sp.add_argument("--run", default=None,
                    help="directory written by a previous solve")
    _problem_flags(sp)
    _solve_flags(sp)
    sp.add_argument("--alpha", type=float, default=1.0)
    sp.add_argument("--A", default=None)
    sp.add_argument("--samples", type=int, default=4096)
    sp.add_argument("--eps", type=float, default=0.05,
                    help="slack allowed on the gradient envelopes")
    sp.add_argument("--eps-z", type=float, default=0.02, dest="eps_z")
    sp.add_argument("--assert", action="store_true", dest="assert_",
                    help="exit 2 when a bound is violated beyond the slack")
    sp.add_argument("--out", default="mfglab-out")
    sp.set_defaults(fn=cmd_diagnose)
    return ap


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except CliError as exc:
        _say(f"error: {exc}")
        return 1
    try:
        return args.fn(args)
    except (CliError, ModelError) as exc:
        _say(f"error: {exc}")
        return 1
    except OSError as exc:
        _say(f"error: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
