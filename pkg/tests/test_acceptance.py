"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see every line.
"""

import subprocess
import sys
import time

import numpy as np

from riskdispatch import (
    DispatchProblem,
    build_dc_model,
    load_case,
    parse_case,
    reserve_order_statistic,
    sample,
    solve_dispatch,
    validate,
)
from riskdispatch import qp
from riskdispatch.experiments import (
    ExperimentConfig,
    make_scenario,
    prepare,
    run_beta_sweep,
)
from riskdispatch.forecast import ScenarioSet, drop_incomplete_rows
from riskdispatch.grid import scale_loads

from conftest import IEEE30, TWO_BUS_TEXT
from test_dispatch import (
    TWO_BUS_WIND_TEXT,
    THREE_BUS_TEXT,
    fixed_reserve,
    grid_search_dispatch,
    granularity_bound,
    no_reserve,
)
from test_qp import fista_box_oracle, random_box_qp


def report(criterion: str, ok: bool, detail: str) -> None:
    print(f"\nACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, f"{criterion}: {detail}"


def high_wind_context(seed: int, samples: int = 1000, alpha_list=(0.05,)):
    config = ExperimentConfig(
        case_path=str(IEEE30),
        scenario="high-wind",
        alpha_list=list(alpha_list),
        samples=samples,
        seed=seed,
        conventional_scale=0.8,
        penetration=0.2,
    )
    return config, prepare(config)


def test_criterion_1_matrix_construction():
    start = time.perf_counter()
    case = load_case(IEEE30)
    model = build_dc_model(case)
    B, H = model.admittance, model.flow_matrix
    singular = np.linalg.svd(B, compute_uv=False)
    rank = int((singular > singular.max() * 30 * np.finfo(float).eps).sum())
    elapsed = time.perf_counter() - start
    ok = (
        B.shape == (30, 30)
        and np.abs(B - B.T).max() <= 1e-12
        and rank == 29
        and np.abs(B @ np.ones(30)).max() <= 1e-12
        and H.shape == (41, 30)
        and elapsed < 1.0
    )
    report("C1 matrix construction", ok,
           f"B 30x30 rank {rank}, |B@1|={np.abs(B @ np.ones(30)).max():.2e}, "
           f"H {H.shape}, {elapsed:.3f}s")


def test_criterion_2_solver_oracle_equivalence():
    rng = np.random.default_rng(42)
    start = time.perf_counter()
    worst_gap = 0.0
    worst_resid = 0.0
    for _ in range(50):
        n = int(rng.integers(2, 31))
        problem, lower, upper = random_box_qp(rng, n)
        sol = qp.solve(problem, tol=1e-10, max_iter=200)
        assert sol.status == "optimal"
        x_ref = fista_box_oracle(problem.Q, problem.c, lower, upper)
        f_ref = 0.5 * x_ref @ problem.Q @ x_ref + problem.c @ x_ref
        worst_gap = max(worst_gap, abs(sol.objective - f_ref) / max(1.0, abs(f_ref)))
        residuals = qp.evaluate_kkt(problem, sol.x, sol.nu, sol.lam)
        worst_resid = max(worst_resid, *(abs(v) for v in residuals.values()))
    elapsed = time.perf_counter() - start
    ok = worst_gap <= 1e-6 and worst_resid <= 1e-8 and elapsed < 30.0
    report("C2 solver oracle equivalence", ok,
           f"50 QPs: max relative gap {worst_gap:.2e}, max KKT residual "
           f"{worst_resid:.2e}, {elapsed:.1f}s")


def test_criterion_3_dispatch_oracle_equivalence():
    case2 = parse_case(TWO_BUS_WIND_TEXT)
    res2 = fixed_reserve([10.0])
    sol2 = solve_dispatch(DispatchProblem(case2, build_dc_model(case2), res2))
    oracle2 = grid_search_dispatch(case2, res2.z_res)
    gap2 = oracle2 - sol2.objective

    gaps = [("2-bus", gap2, granularity_bound(case2))]
    for limit in ("40.0", "12.0"):
        case3 = parse_case(THREE_BUS_TEXT.format(limit12=limit))
        res3 = fixed_reserve([12.5])
        sol3 = solve_dispatch(DispatchProblem(case3, build_dc_model(case3), res3))
        oracle3 = grid_search_dispatch(case3, res3.z_res)
        gaps.append((f"3-bus limit {limit}", oracle3 - sol3.objective, granularity_bound(case3)))

    fixture = parse_case(TWO_BUS_TEXT)
    lmp_sol = solve_dispatch(DispatchProblem(fixture, build_dc_model(fixture), no_reserve()))
    lmp_err = float(np.abs(lmp_sol.lmp - 11.0).max())

    ok = all(-1e-6 <= gap <= bound for _, gap, bound in gaps) and lmp_err <= 1e-8
    detail = ", ".join(f"{name}: gap {gap:.4f} (bound {bound:.3f})" for name, gap, bound in gaps)
    report("C3 dispatch oracle equivalence", ok, f"{detail}; LMP fixture error {lmp_err:.2e}")


def test_criterion_4_table1_substitute_property():
    _, ctx = high_wind_context(seed=1)
    reserve = reserve_order_statistic(ctx.scenarios, 0.05)
    sol_high = solve_dispatch(DispatchProblem(ctx.case, ctx.model, reserve))
    spread = float(sol_high.lmp.max() - sol_high.lmp.min())

    capacities = np.array([f.capacity_mw for f in ctx.case.wind_farms])
    low_model = make_scenario("low-wind", _trace_mw(capacities, seed=1), ctx.case.farm_order())
    low_reserve = reserve_order_statistic(sample(low_model, 1000, seed=1), 0.05)
    sol_low = solve_dispatch(DispatchProblem(ctx.case, ctx.model, low_reserve))

    ok = (
        not sol_high.binding_lines
        and spread <= 1e-4
        and sol_low.objective > sol_high.objective
    )
    report("C4 uncongested prices and scenario ordering", ok,
           f"high-wind LMP spread {spread:.2e}, binding {sol_high.binding_lines}, "
           f"low {sol_low.objective:.2f} > high {sol_high.objective:.2f}")


def _trace_mw(capacities, seed):
    from riskdispatch.experiments import generate_synthetic_trace

    clean, _ = drop_incomplete_rows(generate_synthetic_trace(589, len(capacities), seed=seed))
    return clean * capacities


def test_criterion_5_out_of_sample_risk_within_alpha():
    start = time.perf_counter()
    alphas = (0.01, 0.03, 0.05, 0.1)
    results = []
    for seed in (11, 12, 13, 14, 15):
        _, ctx = high_wind_context(seed=seed, alpha_list=alphas)
        for alpha in alphas:
            reserve = reserve_order_statistic(ctx.scenarios, alpha)
            sol = solve_dispatch(DispatchProblem(ctx.case, ctx.model, reserve))
            rep = validate(sol.w, ctx.forecast, alpha, n_trials=100_000, seed=seed)
            results.append(
                (seed, alpha, rep.empirical_risk, alpha + rep.ci_halfwidth)
            )
    elapsed = time.perf_counter() - start
    violations = [(s, a, r, b) for s, a, r, b in results if r > b]
    worst = max(results, key=lambda t: t[2] - t[3])
    ok = not violations and elapsed < 120.0
    report("C5 out-of-sample risk within alpha", ok,
           f"{len(violations)}/20 runs exceed alpha+ci; worst: seed {worst[0]} "
           f"alpha {worst[1]} risk {worst[2]:.4f} vs bound {worst[3]:.4f}; {elapsed:.0f}s")


def test_criterion_6_cost_trends_over_alpha_beta():
    start = time.perf_counter()
    config = ExperimentConfig(
        case_path=str(IEEE30),
        scenario="high-wind",
        alpha_list=[0.01, 0.03, 0.05, 0.1],
        beta_list=[1.05, 1.1, 1.2, 1.3],
        samples=1000,
        seed=1,
        conventional_scale=0.8,
        penetration=0.2,
    )
    rows = run_beta_sweep(config)
    table = {(r["alpha"], r["beta"]): r["objective"] for r in rows}
    assert all(v is not None for v in table.values())
    alphas = sorted({a for a, _ in table})
    betas = sorted({b for _, b in table})
    row_ok = all(
        table[(a2, b)] <= table[(a1, b)] + 1e-7
        for b in betas
        for a1, a2 in zip(alphas, alphas[1:])
    )
    col_ok = all(
        table[(a, b1)] <= table[(a, b2)] + 1e-7
        for a in alphas
        for b1, b2 in zip(betas, betas[1:])
    )
    elapsed = time.perf_counter() - start
    ok = row_ok and col_ok and elapsed < 60.0
    report("C6 cost trends across the alpha-beta grid", ok,
           f"16 cells, non-increasing in alpha: {row_ok}, "
           f"non-decreasing in beta: {col_ok}, {elapsed:.1f}s")


def test_criterion_7_congestion_emergence():
    _, ctx = high_wind_context(seed=1)
    reserve = reserve_order_statistic(ctx.scenarios, 0.05)
    found = None
    for beta in np.arange(1.2, 1.51, 0.05):
        try:
            sol = solve_dispatch(
                DispatchProblem(scale_loads(ctx.case, float(beta)), ctx.model, reserve)
            )
        except Exception:
            continue
        max_dual = float(sol.flow_duals.max())
        spread = float(sol.lmp.max() - sol.lmp.min())
        if max_dual > 1e-4 and spread > 1e-4:
            found = (float(beta), max_dual, spread)
            break
    report("C7 congestion emergence", found is not None,
           "no congested beta in [1.2, 1.5]" if found is None else
           f"beta {found[0]:.2f}: line dual {found[1]:.3f} $/MWh, LMP spread {found[2]:.3f}")


def test_criterion_8_order_statistic_matches_sort_oracle():
    rng = np.random.default_rng(99)
    mismatches = 0
    for _ in range(1000):
        s = int(rng.integers(1, 501))
        w = int(rng.integers(1, 11))
        alpha = float(rng.uniform(0.005, 0.9))
        scen = ScenarioSet(samples=rng.normal(2.0, 3.0, size=(s, w)), seed=0)
        got = reserve_order_statistic(scen, alpha).z_res
        k = int(np.ceil((1.0 - alpha) * s))
        expected = np.array(
            [max(0.0, np.sort(scen.samples[:, m])[::-1][k - 1]) for m in range(w)]
        )
        if not np.array_equal(got, expected):
            mismatches += 1
    report("C8 order-statistic reduction", mismatches == 0,
           f"{mismatches}/1000 random scenario sets disagree with the sort oracle")


def test_criterion_9_sampler_covariance_statistics():
    base = np.full((7, 7), 0.3)
    np.fill_diagonal(base, 1.0)
    scale = np.array([1.0, 2.0, 0.5, 1.5, 3.0, 1.0, 2.5])
    covariance = base * np.outer(scale, scale)
    from riskdispatch.forecast import ForecastModel

    model = ForecastModel(mean=np.zeros(7), covariance=covariance)
    n = 100_000
    draws = sample(model, n, seed=17).samples
    sample_cov = np.cov(draws, rowvar=False, ddof=1)
    se = np.sqrt(
        (np.outer(np.diag(covariance), np.diag(covariance)) + covariance**2) / n
    )
    deviation = np.abs(sample_cov - covariance) / se
    ok = float(deviation.max()) <= 5.0
    report("C9 sampler covariance statistics", ok,
           f"max entry deviation {deviation.max():.2f} standard errors (limit 5)")


def test_criterion_10_sweep_determinism(tmp_path):
    outputs = []
    for run in ("a", "b"):
        out_dir = tmp_path / run
        config = tmp_path / f"sweep_{run}.toml"
        config.write_text(
            f"""
case_path = "{IEEE30}"
scenario = "high-wind"
alpha_list = [0.03, 0.1]
beta_list = [1.0, 1.25]
samples = 300
n_trials = 2000
seed = 6
output_dir = "{out_dir}"
conventional_scale = 0.8
penetration = 0.2
"""
        )
        proc = subprocess.run(
            [sys.executable, "-m", "riskdispatch.cli", "sweep", "--config", str(config)],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr
        outputs.append(
            {
                name: (out_dir / name).read_bytes()
                for name in ("alpha_sweep.csv", "beta_sweep.csv", "lmp_profiles.csv")
            }
        )
    identical = outputs[0] == outputs[1]
    report("C10 sweep determinism", identical,
           "two sweep runs produced byte-identical CSV outputs" if identical
           else "sweep outputs differ between identical runs")
