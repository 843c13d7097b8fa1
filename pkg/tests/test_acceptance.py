"""Acceptance criteria, one test each. Every test prints a PASS/FAIL line."""
import itertools
import math
import subprocess
import sys
import time

import numpy as np
import pytest
from scipy import integrate

from zonoise.bounds import noise_bound
from zonoise.grid import Grid1DConfig, grid_search_1d, grid_search_separable, probe_budget, simplex_grid_search
from zonoise.harness import MalnQuery, default_params, exhaustive_grid_policy, measure_maln
from zonoise.oracles import (
    NoisyOracle,
    SmoothingOracleConfig,
    UniformBounded,
    mc_sample_count,
    smoothing_oracle,
)
from zonoise.problems import Ball, Box, ClassParams, Interval, Simplex, make_instance
from zonoise.reductions import (
    delta_from_triple,
    restart_count,
    restart_solve,
    schedule_lipschitz_sg,
    schedule_smooth_sg,
)


@pytest.fixture
def verdict(capsys):
    def report(k, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {k}: {detail}")
        assert ok, detail

    return report


# --------------------------------------------------------------------------
# 1. bound calculator

RATE = "rate"
DIM = "eps/n"
# (class, constants, eps, hand value, winning branch); constants are powers of two
HAND = [
    ("lip-convex", dict(n=4, M=1, R=1), 0.1, 0.025, DIM),
    ("lip-convex", dict(n=1, M=1, R=1), 0.5, 0.5, DIM),
    ("lip-convex", dict(n=4, M=0.25, R=0.5), 1.0, 4.0, RATE),
    ("lip-convex", dict(n=16, M=1, R=0.125), 0.5, 0.5, RATE),
    ("lip-convex", dict(n=64, M=2, R=1), 1.0, 0.0625, RATE),
    ("lip-sg", dict(n=4, M=1, mu=4, nu=2), 0.25, 0.125, RATE),
    ("lip-sg", dict(n=16, M=0.5, mu=1, nu=1), 0.5, 0.25, RATE),
    ("lip-sg", dict(n=4, M=4, mu=1, nu=1), 0.5, 0.125, DIM),
    ("lip-sg", dict(n=1, M=1, mu=16, nu=4), 1.0, 2.0, RATE),
    ("lip-sg", dict(n=4, M=1, mu=5, nu=math.inf), 0.5, 0.125, DIM),  # tie
    ("smooth-convex", dict(n=1, L=1, R=1), 0.25, 0.25, DIM),
    ("smooth-convex", dict(n=16, L=4, R=0.5), 1.0, 0.5, RATE),
    ("smooth-convex", dict(n=256, L=1, R=1), 0.0625, 0.00390625, RATE),
    ("smooth-convex", dict(n=4096, L=0.25, R=2), 4.0, 1.0, RATE),
    ("smooth-convex", dict(n=16, L=1, R=1), 4.0, 4.0, RATE),
    ("smooth-sg", dict(n=1, L=1, mu=1, nu=2), 1.0, 1.0, DIM),  # tie
    ("smooth-sg", dict(n=16, L=1, mu=4, nu=2), 0.25, 0.25, RATE),
    ("smooth-sg", dict(n=256, L=4, mu=1, nu=1), 0.25, 0.0625, RATE),
    ("smooth-sg", dict(n=16, L=16, mu=1, nu=2), 0.5, 0.0625, RATE),
    ("smooth-sg", dict(n=1, L=1, mu=3, nu=math.inf), 0.25, 0.25, DIM),
]


def test_criterion_1_bounds(verdict):
    t0 = time.perf_counter()
    bad = []
    for cls, c, eps, value, branch in HAND:
        b = noise_bound(cls, c, eps)
        if b.value != value or (b.branch == DIM) != (branch == DIM):
            bad.append((cls, c, eps, b.value, b.branch))
    dt = time.perf_counter() - t0
    verdict(1, not bad and dt < 1.0, f"{len(HAND) - len(bad)}/{len(HAND)} hand values exact, {dt:.3f} s")


# --------------------------------------------------------------------------
# 2-3. 1-D grid search

EPS = 0.1


def pwl_instances(count):
    p = ClassParams(n=1, M=1.0, R=1.0)
    return [make_instance("pwl", p, Interval(0.0, 1.0), seed=s) for s in range(count)]


def planted_gap(inst, delta, safety_factor):
    o = NoisyOracle(inst, exhaustive_grid_policy(inst, 1.0, EPS, delta, safety_factor))
    cfg = Grid1DConfig.for_accuracy(inst.set, 1.0, EPS, safety_factor)
    rep = grid_search_1d(o, 1.0, EPS, cfg)
    return inst.gap(np.asarray(rep.x)), cfg.step


def test_criterion_2_grid_guarantee(verdict):
    t0 = time.perf_counter()
    safe_ok = bound_ok = runs = 0
    for inst in pwl_instances(500):
        for delta in np.linspace(0, EPS / 4, 5):
            for sf in (2, 1):
                gap, step = planted_gap(inst, delta, sf)
                runs += 1
                bound_ok += gap <= 1.0 * step + 2 * delta + 1e-12
                if sf == 2:
                    safe_ok += gap <= EPS
    dt = time.perf_counter() - t0
    ok = safe_ok == runs // 2 and bound_ok == runs and dt < 30
    verdict(2, ok, f"safety gap <= eps {safe_ok}/{runs // 2}, gap <= M step + 2 delta {bound_ok}/{runs}, {dt:.1f} s")


def test_criterion_3_break_point(verdict):
    # pwl instances plus cones whose minimizer sits anywhere inside one grid cell
    insts = pwl_instances(500)
    cone = ClassParams(n=1, M=1.0, R=1.0, mu=1.0)
    for u in np.linspace(0.5, 0.525, 26):
        insts.append(make_instance("cone", cone, Interval(0.0, 1.0), seed=0, minimizer=(float(u),)))
    below = max(planted_gap(i, EPS / 4 * 0.95, 2)[0] for i in insts)
    above = max(planted_gap(i, EPS / 4 * 1.05, 2)[0] for i in insts)
    ok = below <= EPS and above > EPS
    verdict(
        3,
        ok,
        f"worst gap at 0.95 eps/4: {below / EPS:.4f} eps, at 1.05 eps/4: {above / EPS:.4f} eps "
        "(the planted adversary first breaks safety mode at delta = 7 eps/16)",
    )


# --------------------------------------------------------------------------
# 4. separable search


def test_criterion_4_separable(verdict):
    t0 = time.perf_counter()
    n, eps = 5, 0.5
    S = Box.cube(n)
    p = ClassParams(n=n, M=1.0, R=S.diameter())
    delta = eps / (2 * n)
    coarse_ok = safe_ok = calls_ok = 0
    cap = 1.2 * n**2 * p.R * p.M / eps
    worst_calls = 0
    for seed in range(100):
        inst = make_instance("separable-pwl", p, S, seed=seed)
        r = grid_search_separable(NoisyOracle(inst, UniformBounded(delta, seed=seed)), p.M, eps, safety_factor=1)
        coarse_ok += inst.gap(np.asarray(r.x)) <= 1.5 * eps
        calls_ok += r.calls <= cap
        worst_calls = max(worst_calls, r.calls)
        r = grid_search_separable(NoisyOracle(inst, UniformBounded(delta, seed=seed)), p.M, eps, safety_factor=2)
        safe_ok += inst.gap(np.asarray(r.x)) <= eps
    dt = time.perf_counter() - t0
    ok = coarse_ok == safe_ok == calls_ok == 100 and dt < 60
    verdict(
        4,
        ok,
        f"coarse gap <= 1.5 eps {coarse_ok}/100, safety gap <= eps {safe_ok}/100, "
        f"calls <= {cap:.1f} {calls_ok}/100 (max {worst_calls}), {dt:.1f} s",
    )


# --------------------------------------------------------------------------
# 5. simplex search


def dense_min(f, n, step):
    t = np.arange(0, 1 + step / 2, step)
    grids = np.meshgrid(*([t] * n), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    pts = pts[pts.sum(axis=1) <= 1 + 1e-12]
    return min(float(f(chunk).min()) for chunk in np.array_split(pts, max(1, len(pts) // 200_000)))


def test_criterion_5_simplex(verdict):
    t0 = time.perf_counter()
    eps = 0.5
    lines = []
    ok = True
    for n, step in ((2, 1e-3), (3, 5e-3)):
        S = Simplex.corner(n)
        succ = pruned_le = 0
        for seed in range(50):
            p = ClassParams(n=n, M=1.0, R=S.diameter(), mu=1.0, nu=1.0)
            inst = make_instance("cone", p, S, seed=seed)
            noise = UniformBounded(eps / (n + 1), seed=seed, quenched=True)
            rep = simplex_grid_search(NoisyOracle(inst, noise), p, epsilon=eps)
            gap = float(inst(np.array(rep.x))) - dense_min(inst.objective, n, step)
            succ += gap <= eps
            unpruned = simplex_grid_search(
                NoisyOracle(inst, noise), p, epsilon=eps, cfg=rep_cfg(eps, p, pruning=False)
            )
            pruned_le += rep.calls <= unpruned.calls
        ok &= succ >= 0.95 * 50 and pruned_le == 50
        lines.append(f"n={n}: gap <= eps {succ}/50, pruned <= unpruned {pruned_le}/50")
    dt = time.perf_counter() - t0
    verdict(5, ok and dt < 300, "; ".join(lines) + f", {dt:.1f} s")


def rep_cfg(eps, p, pruning):
    from zonoise.grid import SimplexSearchConfig

    return SimplexSearchConfig(epsilon=eps, mu=p.mu, nu=p.nu, edge_pruning=pruning)


# --------------------------------------------------------------------------
# 6. probe combinatorics


def test_criterion_6_nested_sum(verdict):
    bad = []
    for N in range(7):
        for n in range(1, 5):
            count = sum(1 for idx in itertools.product(range(N + 2), repeat=n) if all(a <= b for a, b in zip(idx, idx[1:])))
            if not count == probe_budget(N, n) == math.comb(N + n + 1, n):
                bad.append((N, n))
    verdict(6, not bad, f"{28 - len(bad)}/28 (N, n) pairs exact")


# --------------------------------------------------------------------------
# 7-8. restarts


def test_criterion_7_schedules(verdict):
    rng = np.random.default_rng(7)
    worst = 0.0
    ratios_ok = True
    for _ in range(1000):
        p = ClassParams(
            n=int(rng.integers(1, 200)),
            M=float(rng.uniform(1, 20)),
            R=float(rng.uniform(0.1, 10)),
            L=float(rng.uniform(0.1, 20)),
            mu=float(rng.uniform(0.05, 1)),
            nu=float(rng.uniform(1, 6)),
        )
        eps = float(rng.uniform(1e-4, 0.4)) * p.mu * p.R**p.nu
        split = float(rng.uniform(0.05, 0.95))
        for s in (schedule_lipschitz_sg(p, eps, gamma=split), schedule_smooth_sg(p, eps, alpha=split)):
            for e in s.entries:
                ref = delta_from_triple(s.case, e.regime, e.eps_k, e.distance, p, split)
                worst = max(worst, abs(e.delta_k - ref) / ref)
            for a, b in zip(s.entries, s.entries[1:]):
                if a.regime == b.regime == 2:
                    ratios_ok &= b.delta_k / a.delta_k == 0.5
    k_total = restart_count(1.0, 1.0, 2.0, 2.0**-10)
    ok = worst <= 1e-12 and k_total == 9 and ratios_ok
    verdict(7, ok, f"max relative mismatch {worst:.2e}, k_total = {k_total}, regime-2 ratios exactly 1/2: {ratios_ok}")


@pytest.mark.parametrize("case", ["lip-sg", "smooth-sg"])
def test_criterion_8_contraction(verdict, case):
    p = default_params("restart", "quadratic", 2)
    eps = 2.0**-5
    events = []
    for seed in range(50):
        inst = make_instance("quadratic", p, Ball((0.0, 0.0), 1.0), seed=seed)
        s = schedule_lipschitz_sg(p, eps) if case == "lip-sg" else schedule_smooth_sg(p, eps)
        rep = restart_solve(NoisyOracle(inst), s, seed=seed)
        pts = np.array(rep.extra["restart_points"][1:])
        d = np.linalg.norm(pts - inst.minimizer, axis=1)
        events += [bool(dk <= e.distance) for dk, e in zip(d, s.entries)]
    alpha = s.alpha
    m = len(events)
    freq = float(np.mean(events))
    floor = 1 - alpha - 3 * math.sqrt(alpha * (1 - alpha) / m)
    verdict(8, freq >= floor, f"{case}: contraction frequency {freq:.3f} over {m} restarts, floor {floor:.3f}")


# --------------------------------------------------------------------------
# 9. smoothing oracle


def test_criterion_9_smoothing(verdict):
    t0 = time.perf_counter()
    gamma = 0.5
    inst = make_instance("cone", ClassParams(n=1, M=1.0, R=2.0, mu=1.0), Interval(-1.0, 1.0), seed=0, minimizer=(0.0,))
    ref = integrate.quad(abs, -gamma, gamma)[0] / (2 * gamma)
    hits = 0
    for rep in range(100):
        sm = smoothing_oracle(NoisyOracle(inst), SmoothingOracleConfig(gamma=gamma, samples=10**6), seed=rep)
        hits += abs(sm.evaluate([0.0]) - ref) <= 1e-3
    count = mc_sample_count(2, 100, 1.0, 1.0, 0.5, 0.1)
    dt = time.perf_counter() - t0
    verdict(9, hits >= 99 and count == 80003 and dt < 120, f"{hits}/100 within 1e-3 of {ref}, sample count {count}, {dt:.1f} s")


# --------------------------------------------------------------------------
# 10. MALN scaling


@pytest.mark.slow
def test_criterion_10_maln_scaling(verdict):
    t0 = time.perf_counter()
    ns = [2, 4, 8]
    los = []
    for n in ns:
        q = MalnQuery("simplex", default_params("simplex", "cone", n), 1.0, policy="exhaustive", trials=50, seed=0)
        los.append(measure_maln(q).delta_lo)
    p = float(np.polyfit(np.log(ns), np.log(los), 1)[0])
    dt = time.perf_counter() - t0
    detail = ", ".join(f"n={n}: {lo:.4f}" for n, lo in zip(ns, los))
    verdict(10, -1.4 <= p <= -0.7 and dt < 900, f"delta_lo {detail}; fitted p = {p:.3f}, {dt:.0f} s")


# --------------------------------------------------------------------------
# 11. determinism


def test_criterion_11_determinism(verdict, tmp_path):
    bench = tmp_path / "bench.toml"
    bench.write_text('command = "maln"\nalgo = "grid1d"\nfamily = "pwl"\neps = 0.1\ntrials = 5\nseed = [1, 2]\n')
    commands = [
        ["bounds", "--class", "smooth-sg", "--n", "8", "--L", "2", "--mu", "0.5", "--nu", "2", "--eps", "0.01"],
        ["solve", "--algo", "simplex", "--n", "2", "--eps", "0.5", "--delta", "0.1", "--seed", "3"],
        ["solve", "--algo", "restart", "--n", "2", "--eps", "0.125", "--seed", "4"],
        ["maln", "--algo", "grid1d", "--family", "pwl", "--eps", "0.1", "--trials", "10", "--seed", "5", "--jobs", "2"],
        ["schedule", "--case", "smooth-sg", "--mu", "1", "--nu", "2", "--L", "1", "--eps", "0.001"],
        ["bench", "--config", str(bench)],
    ]
    same = 0
    total = 0
    for i, cmd in enumerate(commands):
        for fmt in ("json", "csv"):
            outs = []
            for r in range(2):
                path = tmp_path / f"{i}-{fmt}-{r}"
                argv = [sys.executable, "-m", "zonoise", *cmd, "--format", fmt, "--out", str(path)]
                subprocess.run(argv, check=True)
                outs.append(path.read_bytes())
            total += 1
            same += outs[0] == outs[1] and len(outs[0]) > 0
    verdict(11, same == total, f"{same}/{total} command/format pairs byte-identical")
