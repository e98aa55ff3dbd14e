"""End-to-end acceptance checks, one test per criterion.

Each test appends a PASS/FAIL line (with the measured values) to the terminal
summary before asserting, so a full run prints the whole scorecard even when
some criteria fail.
"""

import time

import numpy as np
import pytest

from anchoropt import campaign, config, streams
from anchoropt.acoustics import PropagationModel, SignalConfig, estimate_range, generate_chirp, simulate_reception
from anchoropt.bounds import fim, fit_range_sigmas, peb_field
from anchoropt.pso import (
    Particle,
    PsoHyperParams,
    SwarmState,
    extensive_search,
    init_swarm,
    optimize,
    random_layout,
    snap_decoder,
    snap_indices,
    step,
)
from anchoropt.positioning import solve_ls
from anchoropt.room import Room, aim_at_centroid, corner_layout, project_layout
from anchoropt.simulation import Simulator

from conftest import ACCEPTANCE_LINES
from oracles import expected_nll, fd_hessian, grid_minimize, non_coplanar_instance

SEED = 1
ROOM = Room()


def report(number, title, ok, detail, seconds=None):
    took = "" if seconds is None else f" [{seconds:.1f} s]"
    ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'}  {number:>2}. {title}: {detail}{took}")
    assert ok, detail


# ---------------------------------------------------------------- shared desk sweep

@pytest.fixture(scope="session")
def desk_sweep():
    """Optimized desk layouts for M = 4, 6, 8, 10 plus the corner baseline, with timings."""
    cfg = config.build("desk", seed=SEED, mode="sweep", anchors={"counts": [4, 6, 8, 10]})
    sim = Simulator.from_config(cfg)
    runs, times = {}, {}
    for m in cfg.anchor_counts:
        t0 = time.perf_counter()
        runs[m] = campaign.run_optimize(cfg, m, sim)
        times[m] = time.perf_counter() - t0
    t0 = time.perf_counter()
    corner = campaign.run_evaluate(cfg, corner_layout(cfg.room), sim)
    times["corner"] = time.perf_counter() - t0
    return cfg, sim, runs, corner, times


# ---------------------------------------------------------------- 1-3: bounds and solver

def test_criterion_01_fim_matches_fd_hessian():
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        m = int(rng.integers(3, 9))
        anchors = rng.uniform([0, 0, 0], [8, 4, 2.4], size=(m, 3))
        p = rng.uniform([0.5, 0.5, 0.3], [7.5, 3.5, 2.1])
        sigmas = rng.uniform(0.005, 0.2, size=m)
        H = fd_hessian(lambda q: expected_nll(q, p, anchors, sigmas), p)
        J = fim(p, anchors, sigmas).fim
        worst = max(worst, np.linalg.norm(J - H) / np.linalg.norm(H))
    took = time.perf_counter() - t0
    report(1, "FIM vs FD Hessian", worst <= 1e-5 and took < 10,
           f"max rel err {worst:.2e} (<= 1e-5) over 100 cases", took)


def test_criterion_02_peb_analytic_cases():
    ortho = fim(np.zeros(3), np.eye(3), np.ones(3)).peb
    ceiling = np.array([[1, 1, 2.37], [7, 1, 2.37], [7, 3, 2.37], [1, 3, 2.37]])
    coplanar = peb_field(ceiling, [[4.0, 2.0, 2.37]], np.full(4, 0.03))
    rng = np.random.default_rng(102)
    worst = 0.0
    for _ in range(50):
        anchors, _ = non_coplanar_instance(rng, m=6)
        grid = rng.uniform([0.5, 0.5, 0.3], [7.5, 3.5, 2.1], size=(10, 3))
        sigmas = rng.uniform(0.005, 0.2, size=6)
        k = float(rng.uniform(0.01, 100))
        a, b = peb_field(anchors, grid, sigmas).peb, peb_field(anchors, grid, k * sigmas).peb
        worst = max(worst, float(np.max(np.abs(b - k * k * a) / (k * k * a))))
    ok = ortho == 3.0 and coplanar.n_undefined == 1 and worst <= 1e-10
    report(2, "PEB analytic cases", ok,
           f"orthogonal PEB {ortho!r} (== 3), coplanar undefined {coplanar.n_undefined}/1, "
           f"k^2 scaling rel err {worst:.1e} (<= 1e-10)")


def test_criterion_03_ls_exactness():
    rng = np.random.default_rng(103)
    exact = 0.0
    for _ in range(1000):
        anchors, p = non_coplanar_instance(rng)
        est = solve_ls(anchors, np.linalg.norm(anchors - p, axis=1)).position
        exact = max(exact, float(np.linalg.norm(est - p)))
    oracle = 0.0
    for _ in range(20):
        anchors, p = non_coplanar_instance(rng, m=6)
        ranges = np.linalg.norm(anchors - p, axis=1) + 0.03 * rng.standard_normal(6)
        est = solve_ls(anchors, ranges).position
        oracle = max(oracle, float(np.linalg.norm(est - grid_minimize(anchors, ranges, p))))
    report(3, "LS exactness", exact <= 1e-9 and oracle <= 2e-3,
           f"zero-noise max err {exact:.1e} m (<= 1e-9) on 1000, grid-oracle max gap {oracle * 1e3:.2f} mm (<= 2) on 20")


# ---------------------------------------------------------------- 4: signal chain

def test_criterion_04_signal_chain_ranging():
    t0 = time.perf_counter()
    cfg_sig = SignalConfig()
    chirp = generate_chirp(cfg_sig)
    direct = PropagationModel(mode="direct_path")
    rng = np.random.default_rng(104)
    quant = cfg_sig.speed_of_sound / cfg_sig.sample_rate
    worst = 0.0
    for _ in range(50):
        layout = random_layout(ROOM, 4, rng)
        anchor = layout.anchors[int(rng.integers(4))]
        mobile = rng.uniform(ROOM.mobile_offset, ROOM.extent - ROOM.mobile_offset)
        window = simulate_reception(chirp, anchor, aim_at_centroid(anchor, ROOM), mobile, direct, cfg_sig, 0.0, rng, ROOM)
        worst = max(worst, abs(estimate_range(window, chirp, cfg_sig) - np.linalg.norm(mobile - anchor)))

    cfg = config.build("desk", seed=SEED)
    ev = Simulator.from_config(cfg).evaluate(corner_layout(cfg.room), 30)
    sigmas = fit_range_sigmas(ev.range_errors).sigmas
    took = time.perf_counter() - t0
    ok = worst <= quant and np.all((sigmas >= 0.005) & (sigmas <= 0.1)) and took < 120
    report(4, "signal-chain ranging", ok,
           f"noise-free max err {worst * 1e3:.3f} mm (<= {quant * 1e3:.3f}); fitted sigma_r at 30 dB "
           f"{np.round(sigmas, 4).tolist()} m (in [0.005, 0.1])", took)


# ---------------------------------------------------------------- 5-6: swarm

def test_criterion_05_pso_mechanics():
    from dataclasses import replace

    hp = PsoHyperParams()
    null = PsoHyperParams(omega=0.0, c1=0.0, c2=0.0)
    swarm = init_swarm(ROOM, 4, null, lambda l: 1.0, seed=1)
    nxt = step(swarm, null, lambda l: 1.0, 1, ROOM)
    null_ok = all(np.array_equal(a.x, b.x) and not np.any(b.v) for a, b in zip(swarm.particles, nxt.particles))

    layout = random_layout(ROOM, 4, np.random.default_rng(5))
    x = layout.stacked
    v0 = np.linspace(-0.01, 0.01, 12).reshape(4, 3)
    for j, plane in enumerate(layout.plane_of):
        v0[j, {"wall_y0": 1, "wall_yMax": 1, "ceiling": 2}[plane]] = 0.0
    part = Particle(x=x, v=v0.ravel(), p_best=x, p_best_cost=1.0, planes=(), cost=1.0)
    moved = step(SwarmState((part, part), x, 1.0, 0, (1.0,)), hp, lambda l: 2.0, 9, ROOM).particles[0]
    attraction_ok = np.array_equal(moved.v, hp.omega * v0.ravel())

    monotone = converged = 0
    for seed in range(20):
        target = random_layout(ROOM, 4, streams.derive_rng(seed, 99)).stacked
        sphere = lambda l, t=target: float(np.sum((l.stacked - t) ** 2))
        hist = optimize(ROOM, 4, replace(hp, max_iterations=15), sphere, seed=seed).cost_history
        monotone += all(b <= a for a, b in zip(hist, hist[1:]))
        res = optimize(ROOM, 4, replace(hp, max_iterations=100, stop_threshold=0.0, stop_patience=100), sphere, seed=seed)
        converged += res.cost < 1e-3 * res.cost_history[0]
    ok = null_ok and attraction_ok and monotone == 20 and converged == 20
    report(5, "PSO mechanics", ok,
           f"null update {null_ok}, attraction vanishes {attraction_ok}, monotone history {monotone}/20, "
           f"sphere converged {converged}/20")


def test_criterion_06_pso_vs_exhaustive():
    cfg = config.build("desk", seed=SEED, propagation={"mode": "abstract"})
    sim = Simulator.from_config(cfg)
    candidates = random_layout(cfg.room, 12, streams.derive_rng(SEED, streams.BASELINE, 12)).anchors
    t0 = time.perf_counter()
    exhaustive = extensive_search(candidates, 4, sim.cost, cfg.room)
    took = time.perf_counter() - t0

    # The snapped cost is a function of the chosen subset; reuse the exhaustive table.
    def subset_cost(layout):
        return exhaustive.table[tuple(sorted(snap_indices(layout, candidates)))]

    ratios = []
    for seed in range(5):
        res = optimize(cfg.room, 4, cfg.pso, subset_cost, seed=seed, decode=snap_decoder(candidates, cfg.room))
        ratios.append(res.cost / exhaustive.cost)
    ok = all(r <= 1.10 for r in ratios) and took < 300
    report(6, "PSO vs exhaustive", ok,
           f"snapped/exhaustive cost ratios {np.round(ratios, 3).tolist()} (<= 1.10 on 5/5), "
           f"exhaustive over {len(exhaustive.table)} subsets", took)


# ---------------------------------------------------------------- 7-8: desk trends

def test_criterion_07_trend_optimization_gain(desk_sweep):
    cfg, sim, runs, corner, times = desk_sweep
    opt = runs[4].summary
    reduction = 1 - opt["sigma_m"] / corner.summary["sigma_m"]
    took = times[4] + times["corner"]
    ok = reduction >= 0.25 and opt["mean_dop"] <= corner.summary["mean_dop"] and took < 600
    report(7, "trend A (corner vs PSO, M=4)", ok,
           f"sigma {corner.summary['sigma_m']:.3f} -> {opt['sigma_m']:.3f} m (reduction {reduction:.1%}, >= 25%), "
           f"mean DOP {corner.summary['mean_dop']:.3f} -> {opt['mean_dop']:.3f} (must not increase)", took)


def test_criterion_08_trend_anchor_scaling(desk_sweep):
    cfg, sim, runs, corner, times = desk_sweep
    counts = sorted(runs)
    sigma = [runs[m].summary["sigma_m"] for m in counts]
    p95 = [runs[m].summary["p95_m"] for m in counts]
    non_increasing = all(b <= a for a, b in zip(sigma, sigma[1:])) and all(b <= a for a, b in zip(p95, p95[1:]))
    total = 1 - sigma[-1] / sigma[0]
    early, late = 1 - sigma[1] / sigma[0], 1 - sigma[3] / sigma[2]
    took = sum(times[m] for m in counts)
    ok = non_increasing and total >= 0.15 and late < early and took < 1800
    report(8, "trend B (M = 4, 6, 8, 10)", ok,
           f"sigma {np.round(sigma, 3).tolist()} m, P95 {np.round(p95, 3).tolist()} m (each non-increasing), "
           f"4->10 reduction {total:.1%} (>= 15%), 4->6 gain {early:.1%} vs 8->10 gain {late:.1%} (late < early)", took)


# ---------------------------------------------------------------- 9: bound comparison

def test_criterion_09_bound_comparison_shape(desk_sweep):
    cfg, sim, runs, corner, times = desk_sweep
    layout = project_layout(np.ravel(runs[4].layout), cfg.room)
    abstract_cfg = config.build("desk", seed=SEED, mode="bounds",
                                propagation={"mode": "abstract", "abstract_range_sigma_m": 0.005})
    small = campaign.run_bounds(abstract_cfg, layout).summary
    median_gap = abs(small["rmse_median_m"] / small["peb_bound_median_m"] - 1)
    reflect = campaign.run_bounds(cfg, layout, sim).summary
    ok = median_gap <= 0.15 and reflect["rmse_p95_m"] > reflect["peb_bound_p95_m"]
    report(9, "bound comparison shape", ok,
           f"abstract median RMSE/PEB-bound gap {median_gap:.1%} (<= 15%); reflections P95 RMSE "
           f"{reflect['rmse_p95_m']:.3f} m vs PEB bound {reflect['peb_bound_p95_m']:.3f} m (RMSE tail above)")


# ---------------------------------------------------------------- 10: determinism

def test_criterion_10_rerun_is_byte_identical(tmp_path):
    small = {"realizations": {"optimize": 5, "final": 30}, "pso": {"max_iterations": 3, "swarm_size": 4}}
    mismatched, checked = [], 0
    runs = [
        ("optimize", config.build("desk", small, seed=SEED, mode="optimize", propagation={"mode": "abstract"})),
        ("evaluate", config.build("desk", small, seed=SEED, mode="evaluate")),
        ("bounds", config.build("desk", small, seed=SEED, mode="bounds")),
    ]
    for verb, cfg in runs:
        first, second = tmp_path / f"{verb}-a", tmp_path / f"{verb}-b"
        campaign.export_tables(getattr(campaign, f"run_{verb}")(cfg), first)
        campaign.export_tables(campaign.rerun(first), second)
        for path in sorted(first.glob("*.csv")):
            checked += 1
            if path.read_bytes() != (second / path.name).read_bytes():
                mismatched.append(f"{verb}/{path.name}")
    ok = not mismatched and checked > 0
    report(10, "determinism", ok, f"{checked - len(mismatched)}/{checked} CSV files byte-identical after rerun")
