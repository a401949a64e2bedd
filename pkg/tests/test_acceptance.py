"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the summary lines.
The thresholds on the synthetic criteria (5, 6, 7) were measured during
development on the seeded benchmarks in ``stratum.benchmarks`` and are frozen.
"""

import math
import time
from fractions import Fraction

import numpy as np
import pytest

import oracles
from stratum.baselines import tca_transform
from stratum.benchmarks import TRANSFER_SAT, scrambled_selection_task, selection_task, transfer_task
from stratum.cli import main
from stratum.data import Domain
from stratum.experiment import predict_with
from stratum.features import FEATURE_NAMES, extract_sensor_features
from stratum.kernels import KernelSpec, gram, kernel_matrix, median_heuristic, mmd_global, mmd_stratified
from stratum.metrics import accuracy, f1_macro
from stratum.sat import SatConfig, build_intra_class_mmd, run_sat, solve_transform
from stratum.sds import rank_sources_global, select_source

SEEDS = range(20)


@pytest.fixture(scope="module", autouse=True)
def suite_clock():
    return time.perf_counter()


def report(number, title, ok, detail=""):
    print(f"\nAC{number:<2} {'PASS' if ok else 'FAIL'}  {title}" + (f"  [{detail}]" if detail else ""))
    assert ok, f"criterion {number} failed: {detail}"


def labeled_pair(rng, ns, nt, d=10, classes=3):
    ys = np.resize(np.arange(1, classes + 1), ns)
    yt = np.resize(np.arange(1, classes + 1), nt)
    rng.shuffle(ys)
    rng.shuffle(yt)
    means = 2 * rng.normal(size=(classes, d))
    S = means[ys - 1] + rng.normal(size=(ns, d))
    T = means[yt - 1] + rng.normal(0.5, 1.0, size=(nt, d))
    return Domain(S, ys), Domain(T, yt)


def test_ac01_mmd_oracle_equivalence():
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        ns, nt = rng.integers(3, 41, size=2)
        s, t = labeled_pair(rng, int(ns), int(nt))
        sigma = oracles.median_distance(np.vstack([s.features, t.features]))
        for spec, kind, sg in ((KernelSpec.linear(), "linear", None), (KernelSpec.rbf(), "rbf", sigma)):
            g = mmd_global(s.features, t.features, spec)
            worst = max(worst, abs(g - max(oracles.mmd_double_sum(s.features, t.features, kind, sg), 0.0)))
            st = mmd_stratified(s, t, spec)
            ref = oracles.stratified_oracle(s.features, s.labels, t.features, t.labels, kind, sg)
            worst = max(worst, abs(st - ref))
    elapsed = time.perf_counter() - start
    report(1, "MMD matches double-sum oracles", worst <= 1e-10 and elapsed < 5.0,
           f"max err {worst:.1e}, {elapsed:.2f}s")


def test_ac02_intra_class_matrix_structure():
    rng = np.random.default_rng(102)
    failures = []
    worst = 0.0
    for trial in range(100):
        ns, nt = (int(v) for v in rng.integers(2, 25, size=2))
        ys, yt = rng.integers(1, 4, ns), rng.integers(1, 4, nt)
        X = rng.normal(size=(ns + nt, 4))
        spec = KernelSpec.rbf(1.0 + rng.random())
        K = kernel_matrix(X[:ns], X[ns:], spec).values
        for c in sorted(set(ys.tolist()) & set(yt.tolist())):
            L = build_intra_class_mmd(ys, yt, c)
            ok = (
                np.array_equal(L, L.T)
                and np.linalg.matrix_rank(L) <= 1
                and np.linalg.eigvalsh(L).min() >= -1e-12
                and np.all(np.abs(L.sum(axis=1)) <= 1e-15)
            )
            mmd_c = mmd_global(X[:ns][ys == c], X[ns:][yt == c], spec)
            err = abs(np.trace(K @ L) - mmd_c)
            worst = max(worst, err)
            if not ok or err > 1e-10:
                failures.append((trial, c))
    report(2, "L_c symmetric, rank<=1, PSD, zero row sums, tr(K L_c) = class MMD", not failures,
           f"{len(failures)} failures, max trace err {worst:.1e}")


def test_ac03_eigenproblem_correctness():
    rng = np.random.default_rng(103)
    start = time.perf_counter()
    worst_res = worst_orth = 0.0
    for i in range(20):
        ns, nt = (int(v) for v in rng.integers(10, 61, size=2))
        s, t = labeled_pair(rng, ns, nt)
        m = int(rng.integers(1, 11))
        kernel = KernelSpec.linear() if i % 2 else KernelSpec.rbf()
        model = solve_transform(s, t, SatConfig(num_dims=m, kernel=kernel))
        A, B, W, mu = model.A, model.B, model.W, model.eigenvalues
        for j in range(m):
            Aw, Bw = A @ W[:, j], B @ W[:, j]
            res = np.linalg.norm(Aw - mu[j] * Bw) / max(np.linalg.norm(Aw), np.linalg.norm(Bw))
            worst_res = max(worst_res, res)
        worst_orth = max(worst_orth, np.abs(W.T @ B @ W - np.eye(m)).max())
    elapsed = time.perf_counter() - start
    ok = worst_res <= 1e-6 and worst_orth <= 1e-6 and elapsed < 10.0
    report(3, "generalized eigenpairs: residual and B-orthonormality", ok,
           f"residual {worst_res:.1e}, orth {worst_orth:.1e}, {elapsed:.2f}s")


def test_ac04_tca_reduction():
    rng = np.random.default_rng(104)
    worst = 0.0
    for i in range(10):
        ns, nt = (int(v) for v in rng.integers(10, 40, size=2))
        S, T = rng.normal(size=(ns, 6)), rng.normal(0.7, 1.0, size=(nt, 6))
        cfg = SatConfig(num_dims=4, kernel=KernelSpec.linear() if i % 2 else KernelSpec.rbf())
        a = solve_transform(Domain(S, np.ones(ns, dtype=int)), Domain(T, np.ones(nt, dtype=int)), cfg)
        b = tca_transform(S, T, cfg)
        Za, Zb = a.train_embedding(), b.train_embedding()
        signs = np.sign(np.sum(Za * Zb, axis=0))
        worst = max(worst, np.abs(Za - Zb * signs).max())
    report(4, "single-class solve_transform equals TCA up to column sign", worst <= 1e-6, f"max diff {worst:.1e}")


def test_ac05_source_selection_fidelity():
    sd_hits = gd_hits = 0
    for seed in SEEDS:
        task = selection_task(seed)
        target = task.target.unlabeled()
        sd_hits += select_source(task.sources, target).selected == task.truth
        gd_hits += rank_sources_global(task.sources, target).selected == task.truth
    scrambled_wins = 0
    for seed in SEEDS:
        task = scrambled_selection_task(seed)
        target = task.target.unlabeled()
        sd = select_source(task.sources, target).selected
        gd = rank_sources_global(task.sources, target).selected
        scrambled_wins += sd == task.truth and gd != task.truth
    ok = sd_hits >= 18 and sd_hits >= gd_hits and scrambled_wins >= 10
    report(5, "SD selects the class-wise nearest source", ok,
           f"SD {sd_hits}/20, GD {gd_hits}/20, scrambled SD-right-GD-wrong {scrambled_wins}/20")


@pytest.fixture(scope="module")
def transfer_runs():
    runs = []
    for seed in SEEDS:
        source, target = transfer_task(seed)
        nn = accuracy(target.labels, predict_with("source-only-1nn", source, target, TRANSFER_SAT, seed))
        tca = accuracy(target.labels, predict_with("tca", source, target, TRANSFER_SAT, seed))
        sat = run_sat(source, target.unlabeled(), cfg=TRANSFER_SAT, truth=target.labels)
        runs.append(dict(nn=nn, tca=tca, sat=accuracy(target.labels, sat.labels), trace=sat.trace))
    return runs


def test_ac06_transfer_gain(transfer_runs):
    nn = np.mean([r["nn"] for r in transfer_runs])
    tca = np.mean([r["tca"] for r in transfer_runs])
    sat = np.mean([r["sat"] for r in transfer_runs])
    ok = sat - nn >= 0.10 and sat - tca >= 0.03
    report(6, "STL-SAT beats source-only 1NN by >=10 and TCA by >=3 points", ok,
           f"SAT {sat:.3f}, 1NN {nn:.3f}, TCA {tca:.3f}")


def test_ac07_convergence(transfer_runs):
    monotone = 0
    bounded = True
    for r in transfer_runs:
        changes = [rec.labels_changed for rec in r["trace"]]
        bounded &= len(changes) <= TRANSFER_SAT.max_iterations
        tail = changes[1:]  # iteration 2 onward, so the check starts at iteration 3
        monotone += all(b <= a for a, b in zip(tail, tail[1:]))
    report(7, "label changes non-increasing from iteration 3, T <= 10", monotone >= 18 and bounded,
           f"{monotone}/20 monotone")


def test_ac08_feature_golden_values():
    F = {n: i for i, n in enumerate(FEATURE_NAMES)}
    errors = []

    def check(values, expected, label):
        for name, want in expected.items():
            if abs(values[F[name]] - want) > 1e-9:
                errors.append(f"{label}.{name}={values[F[name]]!r}")

    check(extract_sensor_features(np.full(64, 2.0), 32.0),
          dict(mean=2, std=0, min=2, max=2, mode=2, range=0, mean_crossing_rate=0, dc=2, energy=4,
               peak1_magnitude=0, amplitude_skewness=0, amplitude_kurtosis=0), "constant")
    check(extract_sensor_features(np.array([1.0, -1.0] * 32), 32.0),
          dict(mean=0, std=1, min=-1, max=1, range=2, mean_crossing_rate=1, dc=0, energy=1,
               peak1_magnitude=1, peak1_frequency=16, amplitude_kurtosis=1), "alternating")
    t = np.arange(320) / 32.0
    check(extract_sensor_features(np.sin(2 * np.pi * 2.0 * t), 32.0),
          dict(mean=0, std=1 / math.sqrt(2), min=-1, max=1, dc=0, energy=0.5, peak1_magnitude=0.5,
               peak1_frequency=2.0, peak2_magnitude=0, amplitude_skewness=0, amplitude_kurtosis=1.5), "sinusoid")
    report(8, "feature extractor analytic values", not errors, ", ".join(errors) or "3 windows")


def test_ac09_metrics_scenarios():
    # (truth, predicted, accuracy, macro F1) computed by hand
    scenarios = [
        ([1, 2, 1], [1, 2, 2], Fraction(2, 3), Fraction(1, 2) * (Fraction(2, 3) + Fraction(2, 3))),
        ([1, 2, 3], [1, 2, 3], Fraction(1), Fraction(1)),
        ([1, 1, 2, 2], [2, 2, 1, 1], Fraction(0), Fraction(0)),
        ([1, 3, 2], [1, 1, 2], Fraction(2, 3), (Fraction(2, 3) + 1 + 0) / 3),
        ([1, 1, 1, 2], [1, 1, 2, 2], Fraction(3, 4), (Fraction(4, 5) + Fraction(2, 3)) / 2),
    ]
    bad = []
    for i, (t, p, acc, f1) in enumerate(scenarios):
        if Fraction(accuracy(t, p)).limit_denominator(1000) != acc:
            bad.append(f"acc#{i}")
        if abs(f1_macro(t, p) - float(f1)) > 1e-12:
            bad.append(f"f1#{i}")
    report(9, "accuracy and macro F1 on 5 hand-computed scenarios", not bad, ", ".join(bad) or "5/5")


def test_ac10_determinism_and_speed(tmp_path):
    for sub in ("a", "b"):
        assert main(["experiment", "--synthetic", "11", "--report-dir", str(tmp_path / sub), "--no-timing",
                     "--emit", str(tmp_path / sub / "table.csv")]) == 0
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    identical = all((tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes() for n in names)

    X = np.random.default_rng(110).normal(size=(2000, 81))
    start = time.perf_counter()
    spec = KernelSpec.rbf(median_heuristic(X))
    K = gram(X, X, spec)
    build = time.perf_counter() - start
    ok = identical and len(names) == 5 and build < 10.0 and K.shape == (2000, 2000)
    report(10, "byte-identical reports and 2000x2000 kernel build", ok,
           f"{len(names)} files identical={identical}, kernel {build:.2f}s")


def test_ac10_suite_wall_time(suite_clock):
    # defined last, so it runs after every other criterion in this module
    elapsed = time.perf_counter() - suite_clock
    report(10, "acceptance suite wall time under 2 minutes", elapsed < 120.0, f"{elapsed:.1f}s")
