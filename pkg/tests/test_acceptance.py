"""Acceptance criteria, one pass/fail line per criterion.

Monte Carlo criteria use the band rule |estimate - target| <= 3 SE and are
rerun once with a fresh seed before a failure is declared.  The lines are
printed as they are decided and repeated in the terminal summary.
"""

import json
import math
import os
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from levyforge.cli import main, retry_seed
from levyforge.integrals import (
    integration_by_parts_residual,
    ito_residual,
    left_riemann_integral,
    quadratic_covariation,
    shift_integral_residual,
    stieltjes_integral,
)
from levyforge.levy_model import LevyTriplet, angle_bracket_rate
from levyforge.paths import (
    TimeGrid,
    compensate,
    first_jump_node,
    simulate_bm_drift,
    simulate_jump_diffusion,
    simulate_levy,
    simulate_poisson,
)
from levyforge.randomness import Uniform
from levyforge.solvers import (
    SddeProblem,
    bs_explicit,
    euler_sdde,
    max_abs_error,
    theta_linear_bs,
)
from levyforge.validation import (
    cf_check,
    compensator_check,
    mc_mean_ci,
    poisson_pmf_check,
    qv_check,
    qv_grid_convergence,
)

SEED = 20261016
JD = LevyTriplet(b=0.0, sigma2=1.0, intensity=10.0, jump_law=Uniform(-1.0, 1.0))


def report(criterion, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    return ok


def with_retry(check, seed=SEED):
    """Run ``check(seed) -> (ok, detail)``; on failure rerun once with a fresh seed."""
    ok, detail = check(seed)
    if ok:
        return ok, detail
    ok, detail2 = check(retry_seed(seed))
    return ok, f"{detail2} (retried; first attempt: {detail})"


def test_c01_poisson_pmf():
    def check(seed):
        t0 = time.perf_counter()
        ps = simulate_poisson(TimeGrid(1.0, 1e-2), 100_000, 1.0, seed)
        reps = poisson_pmf_check(ps, 1.0, 1.0, range(6))
        elapsed = time.perf_counter() - t0
        ok = all(r.passed for r in reps) and elapsed < 10
        worst = max(abs(r.estimate - r.target) / r.standard_error for r in reps)
        return ok, f"P(N_1=n), n=0..5, worst |z|={worst:.2f} (<= 3), runtime {elapsed:.2f}s (< 10s)"

    assert report(1, *with_retry(check))


def test_c02_brownian_integral_rms():
    dt = 1e-3
    target = math.sqrt(dt / 2)

    def check(seed):
        t0 = time.perf_counter()
        ps = simulate_bm_drift(TimeGrid(1.0, dt), 10_000, 0.0, 1.0, seed)
        err = left_riemann_integral(ps, ps).final - (0.5 * ps.at(1.0) ** 2 - 0.5)
        rms = math.sqrt(np.mean(err**2))
        elapsed = time.perf_counter() - t0
        rel = rms / target - 1
        ok = abs(rel) <= 0.15 and elapsed < 30
        return ok, (f"RMS={rms:.5f} vs sqrt(dt/2)={target:.5f} ({rel:+.1%}, within 15%), "
                    f"runtime {elapsed:.2f}s (< 30s)")

    assert report(2, *with_retry(check))


def test_c03_pathwise_jump_identity():
    g = TimeGrid(5.0, 1e-2)
    N = simulate_poisson(g, 1_000, 1.0, SEED)
    M = compensate(N, 1.0)
    diff = (stieltjes_integral(N, M, rule="node_value").final
            - stieltjes_integral(N, M, rule="left_limit").final)
    worst = float(np.max(np.abs(diff - N.values[:, -1])))
    assert report(3, worst <= 1e-10,
                  f"max |difference - N_T| over 1000 paths = {worst:.2e} (<= 1e-10)")


def test_c04_quadratic_variation():
    mu = angle_bracket_rate(JD)

    def check(seed):
        ps = simulate_jump_diffusion(TimeGrid(1.0, 2.5e-3), 10_000, JD, seed)
        r = qv_check(ps, JD, 1.0)
        rms = qv_grid_convergence(ps, (4, 2, 1))
        factors = [a / b for a, b in zip(rms, rms[1:])]
        ok = r.passed and all(1.2 <= f <= 1.7 for f in factors)
        return ok, (f"E[L]_1={r.estimate:.4f} vs mu={mu:.4f} (|z|="
                    f"{abs(r.estimate - r.target) / r.standard_error:.2f}); grid RMS shrink "
                    f"factors {factors[0]:.3f}, {factors[1]:.3f} (in [1.2, 1.7])")

    assert report(4, *with_retry(check))


def test_c05_characteristic_function():
    def check(seed):
        ps = simulate_jump_diffusion(TimeGrid(1.0, 1e-2), 100_000, JD, seed)
        reps = cf_check(ps, JD, 1.0, [-2.0, -1.0, 1.0, 2.0])
        worst = max(max(abs(r.estimate.real - r.target.real) / r.standard_error.real,
                        abs(r.estimate.imag - r.target.imag) / r.standard_error.imag)
                    for r in reps)
        return all(r.passed for r in reps), f"u in {{-2,-1,1,2}}, worst componentwise |z|={worst:.2f}"

    assert report(5, *with_retry(check))


def test_c06_compensator():
    def check(seed):
        r = compensator_check(1.0, 2.0, n_paths=100_000, seed=seed, dt=1e-2)
        return r.passed, (f"E int N- dN = {r.estimate:.4f} vs {r.target:g} "
                          f"(|z|={abs(r.estimate - r.target) / r.standard_error:.2f})")

    assert report(6, *with_retry(check))


def _c07_fraction(alpha, theta, seed):
    fine = simulate_levy(TimeGrid(50.0, 2.5e-3), 100, JD, seed)
    coarse = fine.coarsen(4)
    errs, finite_pos = [], True
    for drv in (coarse, fine):
        exact = bs_explicit(alpha, 0.1, 1.0, drv)
        approx = theta_linear_bs(alpha, 0.1, theta, 1.0, drv)
        for res in (exact, approx):
            finite_pos &= bool(np.all(np.isfinite(res.values)) and np.all(res.values > 0))
        errs.append(max_abs_error(approx, exact).per_path)
    return float(np.mean(errs[1] < errs[0])), finite_pos


@pytest.mark.parametrize("alpha", [-1.0, 0.5])
@pytest.mark.parametrize("theta", [0.0, 0.5, 1.0])
def test_c07_theta_scheme_refinement(alpha, theta):
    def check(seed):
        frac, finite_pos = _c07_fraction(alpha, theta, seed)
        ok = frac >= 0.9 and finite_pos
        return ok, (f"alpha={alpha:g}, theta={theta:g}: error decreases on {frac:.0%} of "
                    f"100 paths (>= 90%), finite and positive: {finite_pos}")

    assert report(7, *with_retry(check))


def test_c08_discrete_ito_and_ibp():
    g = TimeGrid(1.0, 1e-2)
    drivers = {
        "BM": simulate_bm_drift(g, 100, 0.0, 1.0, SEED),
        "Poisson": simulate_poisson(g, 100, 5.0, SEED),
        "jump-diffusion": simulate_jump_diffusion(g, 100, JD, SEED),
    }
    worst = 0.0
    for ps in drivers.values():
        scale = np.maximum(np.max(ps.values**2, axis=1), 1.0)
        ibp = integration_by_parts_residual(ps, ps) / scale
        ito = ito_residual(np.square, lambda x: 2 * x, lambda x: 2 + 0 * x, ps) / scale
        worst = max(worst, float(np.max(ibp)), float(np.max(ito)))
    assert report(8, worst <= 1e-9,
                  f"worst scaled IBP / Ito(x^2) residual over 3x100 paths = {worst:.2e} (<= 1e-9)")


def test_c09_shift_identity():
    g = TimeGrid(3.0, 1e-2)
    N = simulate_poisson(g, 100, 1.0, SEED)
    M = compensate(N, 1.0)
    H = np.vstack([p.left_limits() for p in N])
    scale = np.maximum(np.max(np.abs(M.values), axis=1) * np.max(np.abs(H), axis=1), 1.0)
    fixed = shift_integral_residual(H, M, 100) / scale
    S = np.array([first_jump_node(p) for p in N])
    stopped = shift_integral_residual(H, M, S) / scale
    worst = float(max(fixed.max(), stopped.max()))
    assert report(9, worst <= 1e-10,
                  f"worst scaled residual (S = node 100 and S = first jump) = {worst:.2e} (<= 1e-10)")


def _steps_solution(t):
    return np.where(t <= 1, 1 - t, 1 - t + (t - 1) ** 2 / 2)


def test_c10_sdde_oracle():
    errs = []
    for dt in (1e-3, 5e-4):
        drv = simulate_levy(TimeGrid(2.0, dt), 1, LevyTriplet(b=0.0))
        res = euler_sdde(SddeProblem(lambda x, y: -y, lambda x, y: 0 * x, lambda s: 1.0), drv)
        errs.append(float(np.max(np.abs(res.on_grid()[0] - _steps_solution(drv.grid.times)))))
    ratio = errs[0] / errs[1]
    ok = errs[0] <= 5e-3 and abs(ratio / 2 - 1) <= 0.2
    assert report(10, ok, f"sup-error {errs[0]:.2e} at dt=1e-3 (<= 5e-3), halving ratio "
                          f"{ratio:.3f} (2 +/- 20%)")


def test_c11_determinism(tmp_path):
    base = {"grid": {"horizon": 2.0, "dt": 0.01}, "n_paths": 1_000, "seed": 7,
            "driver": {"b": 0.0, "sigma2": 1.0, "lambda": 10.0,
                       "jump_law": {"kind": "uniform", "params": {"a": -1.0, "b": 1.0}}}}
    configs = {
        "simulate": {},
        "integrate": {"integrate": {"integrand": {"kind": "function", "name": "exp_sin"}}},
        "solve": {"solve": {"scheme": "theta", "alpha": -1.0, "beta": 0.1, "y0": 1.0,
                            "theta": 0.5}},
    }
    # at least 8 so the thread pool is exercised even on a single-core host
    max_workers = max(os.cpu_count() or 1, 8)
    identical = True
    for cmd, extra in configs.items():
        path = tmp_path / f"{cmd}.json"
        path.write_text(json.dumps(base | {"command": cmd} | extra))
        outs = []
        for i, w in enumerate((1, 1, max_workers)):
            out = tmp_path / f"{cmd}{i}"
            assert main([cmd, "--config", str(path), "--out", str(out),
                         "--workers", str(w)]) == 0
            outs.append(out)
        for f in sorted(p.name for p in outs[0].iterdir()):
            blobs = [(o / f).read_bytes() for o in outs]
            identical &= blobs[0] == blobs[1] == blobs[2]
    assert report(11, identical, f"simulate/integrate/solve CSVs byte-identical across rerun and "
                                 f"1 vs {max_workers} workers: {identical}")
