"""End-to-end acceptance runs at desk scale.

Each test prints one PASS/FAIL line for its criterion; expensive solves
are shared through module fixtures and re-used by the determinism
criterion, which re-executes them under a different worker cap and
compares the written artifacts byte for byte.
"""

import dataclasses
import filecmp
import json
import os
import time

import numpy as np
import pytest

from mfglab.cli import main
from mfglab.diagnostics import BetaSchedule, lambda_beta_star, save_z_histogram, z_monitor
from mfglab.model import (
    Box,
    ProblemSpec,
    SamplerConfig,
    affine,
    builtin_catalog,
    polynomial,
)
from mfglab.monotone import (
    check_alpha_monotone,
    check_alpha_monotone_differential,
    check_hyp_autonomous,
    check_hyp_coupled,
    check_trade_condition,
)
from mfglab.paths import MonteCarloConfig
from mfglab.reference import toy_blowup_certificate, toy_ode_solve
from mfglab.solver import ContinuationConfig, GridConfig, picard_solve, save_result

TANH1 = 0.7615941559557649
SECH1 = 0.6480542736638855

AM = builtin_catalog("autonomous_monotone")


def _verdict(n: int, label: str, ok: bool, detail: str = ""):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {label}"
    if detail:
        line += f" [{detail}]"
    print(line, flush=True)
    assert ok, line


def _solve_and_save(spec, grid, mc, ctrl, outdir, force=False):
    t0 = time.perf_counter()
    res = picard_solve(spec, grid, mc, ctrl, force=force)
    elapsed = time.perf_counter() - t0
    os.makedirs(outdir, exist_ok=True)
    save_result(res, os.path.join(outdir, "run"))
    return res, elapsed


def _same_files(dir_a, dir_b):
    names = sorted(os.listdir(dir_a))
    if names != sorted(os.listdir(dir_b)):
        return False
    ok, bad, err = filecmp.cmpfiles(dir_a, dir_b, names, shallow=False)
    return not bad and not err


HEAT = builtin_catalog("heat_only", 0.5)
HEAT_GRID = GridConfig(nodes_x=17, nodes_p=33, nt_sub=4)


def _heat_mc(threads):
    return MonteCarloConfig(n_paths=100000, seed=11, dt=1.0 / 128, threads=threads)


LIN = builtin_catalog("linear_toy", 0.0, 0.0, 1.0)
SMALL_GRID = GridConfig(nodes_x=9, nodes_p=9, nt_sub=4)
TIGHT = ContinuationConfig(tol=1e-5)


def _unit_mc(seed, threads=1):
    return MonteCarloConfig(n_paths=1, seed=seed, threads=threads)


@pytest.fixture(scope="module")
def heat_run(tmp_path_factory):
    out = str(tmp_path_factory.mktemp("c1") / "a")
    res, elapsed = _solve_and_save(HEAT, HEAT_GRID, _heat_mc(1),
                                   ContinuationConfig(), out)
    return res, elapsed, out


@pytest.fixture(scope="module")
def linear_run(tmp_path_factory):
    out = str(tmp_path_factory.mktemp("c2") / "a")
    res, elapsed = _solve_and_save(LIN, SMALL_GRID, _unit_mc(2), TIGHT, out,
                                   force=True)
    return res, elapsed, out


@pytest.fixture(scope="module")
def autonomous_run(tmp_path_factory):
    spec = dataclasses.replace(AM, horizon=2.0)
    out = str(tmp_path_factory.mktemp("c4") / "a")
    res, _ = _solve_and_save(spec, SMALL_GRID, _unit_mc(0), TIGHT, out,
                             force=True)
    return res, out


@pytest.fixture(scope="module")
def coupled_run(tmp_path_factory):
    out = str(tmp_path_factory.mktemp("c5") / "a")
    res, _ = _solve_and_save(AM, SMALL_GRID, _unit_mc(0), TIGHT, out,
                             force=True)
    return res, out


def test_criterion_1_heat_oracle(heat_run):
    res, elapsed, _ = heat_run
    xs = HEAT.omega.grid_axes(17)[0][:, None]
    p0 = np.zeros_like(xs)
    err = float(np.abs(res.field(1.0, xs, p0) - 1.0).max())
    ok = res.status == "Converged" and err <= 0.02 and elapsed <= 60.0
    _verdict(1, "heat oracle U(1,x,0) = 1", ok,
             f"max err {err:.4f}, {elapsed:.1f}s")


def test_criterion_2_riccati_oracle(linear_run):
    res, elapsed, _ = linear_run
    t_last, dx, dp = res.grad_history[-1]
    ok = (res.status == "Converged" and abs(t_last - 1.0) < 1e-12
          and abs(dx - TANH1) <= 0.02 and abs(dp - SECH1) <= 0.03
          and elapsed <= 300.0)
    _verdict(2, "riccati gradients at T=1", ok,
             f"dx {dx:.4f} vs {TANH1:.4f}, dp {dp:.4f} vs {SECH1:.4f}, {elapsed:.1f}s")


def test_criterion_3_blowup_reproduction(tmp_path):
    cert_ok = toy_blowup_certificate(4.0, 1.0, 4.0) == "GuaranteedBlowup"
    base = toy_ode_solve(4.0, 1.0, 4.0, 2.0, 1e-3).blowup_time
    half = toy_ode_solve(4.0, 1.0, 4.0, 2.0, 5e-4).blowup_time
    # three significant digits: relative gap below half a unit in the third
    stable = abs(base - half) / abs(base) <= 5e-3
    out = str(tmp_path / "blow")
    code = main(["solve", "--builtin", "linear_toy:4,1,4", "--horizon", "2",
                 "--seed", "3", "--n-paths", "2", "--nodes-x", "33",
                 "--nodes-p", "5", "--lip-max", "60", "--dt", "0.0009765625",
                 "--force", "--out", out])
    man = json.load(open(os.path.join(out, "manifest.json")))
    tb = man["blowup_time"]
    within = tb is not None and abs(tb - base) / base <= 0.10
    ok = cert_ok and stable and code == 2 and man["status"] == "BlowUp" and within
    _verdict(3, "finite-time blow-up reproduced", ok,
             f"certificate={cert_ok}, baseline {base:.5f} (dt-gap {abs(base-half):.2g}), "
             f"solver {tb if tb is None else round(tb, 5)}")


def test_criterion_4_gradient_bound(autonomous_run):
    res, _ = autonomous_run
    rep = check_hyp_autonomous(AM, 1.0, SamplerConfig(n_samples=2048, seed=0))
    beta = BetaSchedule(0.5, lambda_beta_star(AM))
    excess = max(dx - 1.0 / beta(t) for t, dx, _ in res.grad_history)
    ok = (rep.passed and abs(rep.margin) <= 1e-12
          and res.status == "Converged" and excess <= 0.05)
    _verdict(4, "dx_norm below 1/beta on [0,2]", ok,
             f"hypothesis margin {rep.margin:.2g}, worst excess {excess:.3g}")


def test_criterion_5_coupled_bound(coupled_run):
    res, _ = coupled_run
    a_half = np.array([[0.5]])
    rep = check_hyp_coupled(AM, a_half, 1.0, SamplerConfig(n_samples=2048, seed=0))
    excess = max(dp - (2.0 * np.sqrt(max(dx, 0.0) * 0.5))
                 for _, dx, dp in res.grad_history)
    ok = rep.passed and res.status == "Converged" and excess <= 0.05
    _verdict(5, "dp_norm below the eigenvalue envelope on [0,1]", ok,
             f"hypothesis margin {rep.margin:.2g}, worst excess {excess:.3g}")


def test_criterion_6_z_monitor(autonomous_run, coupled_run):
    beta = BetaSchedule(0.5, lambda_beta_star(AM))
    worst_a, _ = z_monitor(autonomous_run[0].field, None, beta,
                           SamplerConfig(n_samples=100000, seed=13))
    worst_c, _ = z_monitor(coupled_run[0].field, np.array([[0.5]]), beta,
                           SamplerConfig(n_samples=100000, seed=17))
    ok = worst_a.z_value >= -0.02 and worst_c.z_value >= -0.02
    _verdict(6, "sampled Z stays above -0.02 on both runs", ok,
             f"autonomous min {worst_a.z_value:.4g}, coupled min {worst_c.z_value:.4g}")


def _random_affine_spec(gen, k):
    d = int(gen.integers(1, 3))
    m = int(gen.integers(1, 3))

    def block(rows, cols):
        return gen.uniform(-1.0, 1.0, (rows, cols)) if gen.random() < 0.8 else None

    def field(out_dim, with_u=True):
        return affine(out_dim, d, m, x=block(out_dim, d), p=block(out_dim, m),
                      u=block(out_dim, d) if with_u else None)

    return ProblemSpec(
        d=d, m=m,
        omega=Box([-1.0] * d, [1.0] * d),
        p_box=Box([-1.0] * m, [1.0] * m),
        u_box=Box([-3.0] * d, [3.0] * d),
        horizon=1.0, sigma=0.0,
        f_coef=field(d), g_coef=field(d), b_coef=field(m),
        u0=field(d, with_u=False),
        name=f"rand{k}",
    )


def test_criterion_7_checker_soundness():
    gen = np.random.default_rng(20260823)
    fails = reproduced = 0
    for k in range(200):
        spec = _random_affine_spec(gen, k)
        alpha = float(gen.choice([0.25, 0.5, 1.0]))
        a_mat = np.diag(gen.uniform(0.0, 1.5, spec.m))
        sampler = SamplerConfig(n_samples=128, seed=1000 + k)
        for rep in (check_hyp_coupled(spec, a_mat, alpha, sampler),
                    check_trade_condition(spec, a_mat, alpha, sampler)):
            if rep.passed:
                continue
            fails += 1
            replay = (check_hyp_coupled if rep.hypothesis == "hyp_coupled"
                      else check_trade_condition)(
                          spec, a_mat, alpha, sampler, tuples=[rep.witness])
            if abs(replay.margin - rep.margin) <= 1e-12:
                reproduced += 1
    witness_ok = fails > 20 and reproduced == fails

    # first-order and chord forms must agree on the smooth catalog
    rot = [[0.5, -np.sqrt(3.0) / 2.0], [np.sqrt(3.0) / 2.0, 0.5]]
    cubic = polynomial(1, 1, 1, [((1, 0, 0), [1.0]), ((3, 0, 0), [1.0])])
    catalog = [
        (affine(1, 1, 1, x=[[1.0]]), 0.9, 1), (affine(1, 1, 1, x=[[1.0]]), 1.1, 1),
        (affine(1, 1, 1, x=[[2.0]]), 0.4, 1), (affine(1, 1, 1, x=[[2.0]]), 0.6, 1),
        (affine(1, 1, 1, x=[[-1.0]]), 0.5, 1),
        (cubic, 0.2, 1), (cubic, 0.5, 1),
        (affine(2, 2, 1, x=rot), 0.4, 2), (affine(2, 2, 1, x=rot), 0.6, 2),
    ]
    agree = True
    for f, alpha, d in catalog:
        samp = SamplerConfig(n_samples=512, seed=3, x_box=Box([-1.0] * d, [1.0] * d))
        chord = check_alpha_monotone(f, alpha, samp)
        diff = check_alpha_monotone_differential(f, alpha, samp)
        agree = agree and (chord.passed == diff.passed)

    samp1 = SamplerConfig(n_samples=512, seed=5, x_box=Box([-1.0], [1.0]))
    ident = check_alpha_monotone(affine(1, 1, 1, x=[[1.0]]), 1.0, samp1)
    ident_ok = ident.passed and ident.margin == 0.0
    flip = check_alpha_monotone(affine(1, 1, 1, x=[[-1.0]]), 1.0, samp1)
    wx, wy = flip.witness[0], flip.witness[1]
    expected = -2.0 * float(np.sum((np.asarray(wx) - np.asarray(wy)) ** 2))
    flip_ok = (not flip.passed) and abs(flip.margin - expected) <= 1e-12

    ok = witness_ok and agree and ident_ok and flip_ok
    _verdict(7, "checker soundness sweep", ok,
             f"{fails} failing reports, {reproduced} witnesses reproduced; "
             f"forms agree={agree}, identity margin {ident.margin!r}")


def test_criterion_8_determinism(heat_run, linear_run, autonomous_run,
                                 coupled_run, tmp_path):
    # rerun every solve from criteria 1-5 with a different worker cap and
    # the same seeds; all written artifacts must match byte for byte
    pieces = []

    out = str(tmp_path / "c1b")
    _solve_and_save(HEAT, HEAT_GRID, _heat_mc(4), ContinuationConfig(), out)
    pieces.append(("heat threads=4", _same_files(heat_run[2], out)))

    out = str(tmp_path / "c2b")
    _solve_and_save(LIN, SMALL_GRID, _unit_mc(2, threads=3), TIGHT, out, force=True)
    pieces.append(("linear threads=3", _same_files(linear_run[2], out)))

    out = str(tmp_path / "c4b")
    _solve_and_save(dataclasses.replace(AM, horizon=2.0), SMALL_GRID,
                    _unit_mc(0, threads=2), TIGHT, out, force=True)
    pieces.append(("autonomous threads=2", _same_files(autonomous_run[1], out)))

    out = str(tmp_path / "c5b")
    _solve_and_save(AM, SMALL_GRID, _unit_mc(0, threads=4), TIGHT, out, force=True)
    pieces.append(("coupled threads=4", _same_files(coupled_run[1], out)))

    blow = []
    for tag, threads in (("a", "1"), ("b", "4")):
        out = str(tmp_path / f"c3{tag}")
        code = main(["solve", "--builtin", "linear_toy:4,1,4", "--horizon", "2",
                     "--seed", "3", "--n-paths", "2", "--nodes-x", "33",
                     "--nodes-p", "5", "--lip-max", "60", "--dt", "0.0009765625",
                     "--threads", threads, "--force", "--out", out])
        assert code == 2
        blow.append(out)
    pieces.append(("blow-up cli threads=1 vs 4", _same_files(blow[0], blow[1])))

    beta = BetaSchedule(0.5, lambda_beta_star(AM))
    zpaths = []
    for tag in ("a", "b"):
        _, hist = z_monitor(autonomous_run[0].field, None, beta,
                            SamplerConfig(n_samples=100000, seed=13))
        path = str(tmp_path / f"z{tag}.csv")
        save_z_histogram(hist, path)
        zpaths.append(path)
    pieces.append(("z histogram rerun", open(zpaths[0], "rb").read() == open(zpaths[1], "rb").read()))

    ok = all(flag for _, flag in pieces)
    _verdict(8, "bitwise-identical artifacts across reruns and thread caps", ok,
             ", ".join(f"{name}: {'ok' if flag else 'DIFFERS'}" for name, flag in pieces))
