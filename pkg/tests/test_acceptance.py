"""Acceptance criteria 1-9.

Each test records one ``criterion N: PASS|FAIL`` line, shown in the terminal summary and
on standard output, and then asserts the criterion at its stated tolerance.
"""

import os
import time
from dataclasses import replace

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, blobs
from gbftsvm import (BUNDLED, BoxQP, Dataset, GenerationConfig, TrainConfig, generate_balls,
                     load_bundled, make_folds, normalize_min_max, predict, solve, train_gbftsvm,
                     train_gbtwsvm, train_twsvm)
from gbftsvm.classifiers import TwinModel
from gbftsvm.dataset_io import bundled_path
from gbftsvm.evaluation import (DEFAULT_GRID, friedman_test, grid_search, noise_sweep,
                                read_acc_matrix)
from gbftsvm.granular_ball import check_partition, overlap_violations, singleton_family
from gbftsvm.scoring import PythagoreanScore, closeness, score_family
from oracles import box_qp_enumerate, random_box_qp

THREADS = os.cpu_count() or 1


def verdict(n, ok, detail, elapsed, budget):
    ok = bool(ok) and elapsed < budget
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} ({detail}; {elapsed:.2f}s of {budget}s)"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def random_dataset(seed, n_lo=10, n_hi=150):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(n_lo, n_hi))
    d = int(rng.integers(1, 5))
    X = rng.uniform(size=(n, d))
    w = rng.normal(size=d)
    s = X @ w + 0.25 * rng.normal(size=n)
    y = np.where(s > np.median(s), 1, -1)
    return Dataset(X, y)


def unit_scores(fam):
    return [PythagoreanScore(1.0, 0.0, 1.0, 1.0, b.region) for b in fam.balls]


def unit_planes(model):
    out = []
    for w, b in ((model.w1, model.b1), (model.w2, model.b2)):
        v = np.r_[w, b]
        out.append(v / np.linalg.norm(w))
    return out


# --------------------------------------------------------------- criterion 1


def test_criterion_1_statistics_fixture():
    t0 = time.perf_counter()
    A, models, _ = read_acc_matrix(bundled_path("table3_accuracy"))
    rep = friedman_test(A, q_alpha=2.949, models=models)
    elapsed = time.perf_counter() - t0
    r_ft = rep.avg_ranks[models.index("GBFTSVM")]
    r_tw = rep.avg_ranks[models.index("GBTWSVM")]
    checks = {
        "F_F": abs(rep.F_F - 28.6) <= 0.5,
        "dof": rep.dof == (6, 114),
        "rank GBFTSVM": abs(r_ft - 1.35) <= 0.01,
        "rank GBTWSVM": abs(r_tw - 2.825) <= 0.01,
        "CD": abs(rep.CD - 2.0146) <= 0.001,
    }
    failed = [k for k, v in checks.items() if not v]
    detail = (f"F_F={rep.F_F:.3f} dof={rep.dof} rank GBFTSVM={r_ft:.4f} "
              f"rank GBTWSVM={r_tw:.4f} CD={rep.CD:.4f}; off: {', '.join(failed) or 'none'}")
    verdict(1, not failed, detail, elapsed, 1)


# --------------------------------------------------------------- criterion 2


def test_criterion_2_qp_oracle_equivalence():
    rng = np.random.default_rng(20240)
    worst_a = worst_f = 0.0
    converged = True
    t0 = time.perf_counter()
    for _ in range(200):
        m = int(rng.integers(1, 7))
        Q, q, upper = random_box_qp(rng, m)
        sol = solve(BoxQP(Q, q, upper))
        ref, f_ref = box_qp_enumerate(Q, q, upper)
        converged &= sol.converged
        worst_a = max(worst_a, float(np.abs(sol.alpha - ref).max()))
        worst_f = max(worst_f, abs(sol.objective_value - f_ref) / (1 + abs(f_ref)))
    elapsed = time.perf_counter() - t0
    ok = converged and worst_a <= 1e-4 and worst_f <= 1e-8
    verdict(2, ok, f"max |alpha diff|={worst_a:.2e}, max rel objective diff={worst_f:.2e}",
            elapsed, 10)


# --------------------------------------------------------------- criterion 3


def test_criterion_3_reduction_identities():
    worst_planes = worst_alpha = 0.0
    assembly_equal = True
    cfg = TrainConfig()
    t0 = time.perf_counter()
    for seed in range(50):
        rng = np.random.default_rng(seed)
        ds = blobs(rng, n=int(rng.integers(4, 40)), d=int(rng.integers(1, 4)), gap=1.5)
        a = train_twsvm(ds, cfg)
        b = train_gbtwsvm(singleton_family(ds), cfg)
        for pa, pb in zip(unit_planes(a), unit_planes(b)):
            worst_planes = max(worst_planes, float(np.abs(pa - pb).max()))

        fam = generate_balls(random_dataset(1000 + seed))
        cfg2 = TrainConfig(C1=2.0 ** rng.integers(-3, 4), C2=2.0 ** rng.integers(-3, 4))
        g = train_gbtwsvm(fam, cfg2)
        f = train_gbftsvm(fam, unit_scores(fam), replace(cfg2, C3=cfg2.C1, C4=cfg2.C2))
        for (qa, sa), (qb, sb) in zip(g.duals, f.duals):
            assembly_equal &= (np.array_equal(qa.Q, qb.Q) and np.array_equal(qa.q, qb.q)
                               and np.array_equal(qa.upper, qb.upper))
            worst_alpha = max(worst_alpha, float(np.abs(sa.alpha - sb.alpha).max()))
    elapsed = time.perf_counter() - t0
    ok = worst_planes <= 1e-6 and assembly_equal and worst_alpha <= cfg.qp_tol
    verdict(3, ok, f"(a) max plane diff={worst_planes:.2e}; (b) assembly bitwise equal="
            f"{assembly_equal}, max alpha diff={worst_alpha:.2e}", elapsed, 30)


# --------------------------------------------------------------- criterion 4


def test_criterion_4_pythagorean_invariants():
    bad = 0
    n_balls = 0
    t0 = time.perf_counter()
    for seed in range(20):
        fam = generate_balls(random_dataset(seed), GenerationConfig(seed=seed))
        for s, b in zip(score_family(fam), fam.balls):
            n_balls += 1
            ok = (0 < s.mu <= 1 and 0 <= s.nu < 1 and s.mu ** 2 + s.nu ** 2 <= 1 + 1e-12
                  and (b.purity != 1.0 or s.nu == 0.0))
            bad += not ok
    theta_ok = closeness(1.0, 0.0) == 1.0
    elapsed = time.perf_counter() - t0
    verdict(4, bad == 0 and theta_ok,
            f"{n_balls} balls, {bad} violations, theta(1,0)={closeness(1.0, 0.0)}", elapsed, 5)


# --------------------------------------------------------------- criterion 5


def test_criterion_5_ball_structure():
    problems = []
    modes = ("strict", "paper-literal", "off")
    t0 = time.perf_counter()
    for seed in range(20):
        ds = random_dataset(seed)
        cfg = GenerationConfig(initial_purity=(1.0, 0.9, 0.8)[seed % 3],
                               de_overlap=modes[seed % 3], seed=seed)
        fam = generate_balls(ds, cfg)
        if not check_partition(fam) or sorted(
                np.concatenate([b.member_indices for b in fam.balls]).tolist()) != list(range(ds.n)):
            problems.append(f"{seed}: partition")
        for b in fam.balls:
            rows = ds.features[b.member_indices]
            splittable = b.size > cfg.min_split_size and np.ptp(rows, axis=0).max() > 0
            if splittable and b.purity < cfg.initial_purity:
                problems.append(f"{seed}: quality {b.purity:.3f} < {cfg.initial_purity}")
        if overlap_violations(fam.balls, cfg.de_overlap):
            problems.append(f"{seed}: overlap ({cfg.de_overlap})")
        again = generate_balls(ds, cfg)
        same = len(again) == len(fam) and all(
            np.array_equal(x.member_indices, y.member_indices)
            and np.array_equal(x.center, y.center) and x.radius == y.radius
            for x, y in zip(fam.balls, again.balls))
        if not same:
            problems.append(f"{seed}: not deterministic")
    elapsed = time.perf_counter() - t0
    verdict(5, not problems, f"violations: {problems[:3] or 'none'}", elapsed, 20)


# --------------------------------------------------------------- criterion 6


def test_criterion_6_fourclass_accuracy():
    ds = normalize_min_max(load_bundled("fourclass_synth"))
    assert (ds.n, ds.d) == (682, 2)
    t0 = time.perf_counter()
    g = grid_search(ds, "gbftsvm", DEFAULT_GRID, GenerationConfig(seed=0),
                    make_folds(ds.n, 10, seed=0), n_jobs=THREADS)
    elapsed = time.perf_counter() - t0
    verdict(6, g.best_accuracy >= 0.79,
            f"GBFTSVM 10-fold accuracy={g.best_accuracy:.4f} at (C1, C2)={g.best_params}, "
            f"required >= 0.79", elapsed, 60)


# --------------------------------------------------------------- criterion 7


def best_time(fn, repeats=5):
    times = []
    for _ in range(repeats):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def test_criterion_7_speed_direction():
    ds = normalize_min_max(load_bundled("fourclass_synth"))
    cfg = TrainConfig(C1=1.0, C2=1.0)
    gen = GenerationConfig(seed=0)
    fam = generate_balls(ds, gen)
    t0 = time.perf_counter()
    t_tw = best_time(lambda: train_twsvm(ds, cfg))
    t_gb = best_time(lambda: train_gbtwsvm(fam, cfg))
    t_gb_total = best_time(lambda: train_gbtwsvm(generate_balls(ds, gen), cfg))
    elapsed = time.perf_counter() - t0
    verdict(7, t_gb < t_tw,
            f"TWSVM {t_tw * 1e3:.1f} ms on {ds.n} points, GBTWSVM {t_gb * 1e3:.1f} ms on "
            f"{len(fam)} balls ({t_gb_total * 1e3:.1f} ms including ball generation)",
            elapsed, 30)


# --------------------------------------------------------------- criterion 8


def test_criterion_8_noise_robustness():
    gen = GenerationConfig()
    gaps = {"gbtwsvm": [], "gbftsvm": []}
    t0 = time.perf_counter()
    for name in BUNDLED:
        ds = normalize_min_max(load_bundled(name))
        folds = make_folds(ds.n, 10, seed=0)
        for method in gaps:
            g = grid_search(ds, method, DEFAULT_GRID, gen, folds, n_jobs=THREADS)
            rows = noise_sweep(ds, [method], [0.0, 0.1], [0, 1, 2], gen, folds,
                               params={method: g.best_params})
            clean = {r.seed: r.report.accuracy for r in rows if r.rate == 0.0}
            noisy = {r.seed: r.report.accuracy for r in rows if r.rate == 0.1}
            gaps[method] += [abs(clean[s] - noisy[s]) for s in clean]
    elapsed = time.perf_counter() - t0
    means = {m: float(np.mean(v)) for m, v in gaps.items()}
    verdict(8, all(v <= 0.05 for v in means.values()),
            ", ".join(f"{m} mean |Acc(0%) - Acc(10%)|={v:.4f}" for m, v in means.items()),
            elapsed, 120)


# --------------------------------------------------------------- criterion 9


def test_criterion_9_prediction_invariance():
    rng = np.random.default_rng(9)
    changed = 0
    t0 = time.perf_counter()
    for _ in range(1000):
        d = int(rng.integers(1, 6))
        m = TwinModel(rng.normal(size=d), float(rng.normal()), rng.normal(size=d),
                      float(rng.normal()))
        x = rng.normal(size=d) * 3
        k1, k2 = np.exp(rng.uniform(-5, 5, size=2))
        base = predict(m, x)
        changed += predict(replace(m, w1=k1 * m.w1, b1=k1 * m.b1), x) != base
        changed += predict(replace(m, w2=k2 * m.w2, b2=k2 * m.b2), x) != base
    elapsed = time.perf_counter() - t0
    verdict(9, changed == 0, f"{changed} of 2000 rescaled predictions changed", elapsed, 1)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
