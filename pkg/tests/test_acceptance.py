"""Acceptance criteria, one test per criterion.

Each test records its clauses through the ``criterion`` fixture, which prints
a PASS/FAIL line per clause and a per-criterion summary at the end of the run.
A criterion passes only if every clause does; tolerances are the stated ones.
"""

import json
import math
import subprocess
import sys
import time

import mpmath
import numpy as np
import pytest

from gradient_cases import CASES, run_case
from robustgrasp.corruption import (
    affected_count,
    apply_multiplicative_noise,
    plan_corruption,
)
from robustgrasp.grasp_repr import (
    approach_angle_deg,
    compose_rotation,
    decouple_rotation,
)
from robustgrasp.harness.experiment import ExperimentConfig, run_experiment
from robustgrasp.losses import (
    LabeledBatch,
    MissingLossConfig,
    NoisyLossConfig,
    UnlabeledBatch,
    ce_supervised,
    combined_missing_loss,
    cross_entropy_rows,
    pseudo_label_loss,
    smoothed_ce,
    smoothed_unlabeled_loss,
    symmetric_noisy_loss,
)
from robustgrasp.prob_core import smooth_distribution, softmax

slow = pytest.mark.slow


def _mcar_config(kappas):
    return ExperimentConfig.from_dict({
        "corruption": {"kind": "mcar", "ratio": 0.0},
        "sweep": [["kappa1", list(kappas)]],
    })


def test_criterion_1_desk_scale_substitution(criterion):
    # Benchmark AP on large grasp datasets needs full point-cloud networks;
    # the directional experiments below stand in for it.
    criterion(1, "substitution acknowledged", True,
              "benchmark AP not reproducible here; criteria 4-6 are the directional stand-ins")


def test_criterion_2_gradient_suite(criterion):
    start = time.perf_counter()
    ok = True
    for name in sorted(CASES):
        _, tol = CASES[name]
        worst, rejected = run_case(name, instances=100)
        passed = worst < tol
        ok &= passed
        criterion(2, name, passed,
                  f"worst rel err {worst:.2e} (tol {tol:g}) over 100 instances, {rejected} rejected")
    elapsed = time.perf_counter() - start
    criterion(2, "runtime", elapsed < 30.0, f"{elapsed:.1f}s (limit 30s)")
    assert ok and elapsed < 30.0


def test_criterion_3_algebraic_identities(criterion):
    rng = np.random.default_rng(3)
    results = []

    p = softmax(rng.normal(scale=3, size=(2000, 5)))
    worst = max(np.max(np.abs(smooth_distribution(p, xi).sum(-1) - 1))
                for xi in (0.0, 0.2, 0.5, 0.9, 1.0))
    results.append(criterion(3, "smoothing sums to one", worst <= 1e-12, f"max |sum-1| {worst:.1e}"))

    logits = rng.normal(scale=3, size=(50, 4))
    labels = rng.integers(0, 4, size=50)
    batch = LabeledBatch.from_labels(logits, labels)
    gap = abs(smoothed_ce(batch, NoisyLossConfig(delta=1.0)).value - ce_supervised(batch).value)
    results.append(criterion(3, "delta=1 gives plain CE", gap <= 1e-12, f"|diff| {gap:.1e}"))

    confident = logits.copy()
    confident[np.arange(50), labels] += 12.0
    unl = UnlabeledBatch(confident)
    soft = smoothed_unlabeled_loss(unl, MissingLossConfig(gamma=0.5, xi=1.0)).value
    q = softmax(confident)
    gate = q.max(-1) > 0.5
    values, _ = cross_entropy_rows(confident[gate], q[gate])
    gap = abs(soft - values.sum() / 50)
    results.append(criterion(3, "xi=1 gives CE on the prediction", gap <= 1e-12,
                             f"|diff| {gap:.1e}"))

    cfg = MissingLossConfig(lambda1=0.7)
    empty = UnlabeledBatch(np.zeros((0, 4)))
    gap = abs(combined_missing_loss(batch, empty, cfg).value - 0.7 * ce_supervised(batch).value)
    results.append(criterion(3, "L_m with no unlabeled rows is lambda1 L_w", gap <= 1e-12,
                             f"|diff| {gap:.1e}"))

    flips = 0
    for c in (2, 3, 5, 10):
        pp = softmax(rng.normal(scale=2, size=(500, c)))
        for xi in (1 / c + 1e-3, 0.5 + 0.5 / c, 0.95, 1.0):
            if xi <= 1 / c:
                continue
            flips += int(np.sum(np.argmax(smooth_distribution(pp, xi), -1) != np.argmax(pp, -1)))
    results.append(criterion(3, "argmax kept for xi > 1/C", flips == 0, f"{flips} changes"))

    # Literal clause: no flooring anywhere on [0, 1).
    bad = []
    p_rows = softmax(rng.normal(size=(20, 3)))
    y = one_hot_rows(rng.integers(0, 3, size=20), 3)
    for delta in np.linspace(0.0, 0.99, 100):
        s = smooth_distribution(y, delta)
        with np.errstate(divide="ignore", invalid="ignore"):
            rce = -(p_rows * np.log(s)).sum()
        if not np.isfinite(rce):
            bad.append(round(float(delta), 4))
    results.append(criterion(3, "unfloored reverse CE finite on delta in [0,1)", not bad,
                             f"non-finite at delta={bad}; the smoothed label puts delta on the "
                             "observed class, so delta=0 needs log 0" if bad else "finite"))

    gamma = 0.9
    flat = rng.normal(scale=0.1, size=(30, 4))
    sharp = flat.copy()
    sharp[:10, 0] += 10.0
    gated_zero = True
    for loss in (lambda b: pseudo_label_loss(b, gamma),
                 lambda b: smoothed_unlabeled_loss(b, MissingLossConfig(gamma=gamma))):
        rep = loss(UnlabeledBatch(sharp))
        gated_zero &= bool(np.all(rep.grad_logits[10:] == 0))
        gated_zero &= loss(UnlabeledBatch(flat)).value == 0.0
    results.append(criterion(3, "gated-out rows contribute exactly zero", gated_zero, ""))
    assert all(results)


def one_hot_rows(labels, c):
    out = np.zeros((len(labels), c))
    out[np.arange(len(labels)), labels] = 1.0
    return out


@slow
def test_criterion_4_noisy_labels_directional(criterion):
    cfg = ExperimentConfig()
    assert cfg.corruption == {"kind": "label_flip", "ratio": 0.4, "factor": 1.0}
    start = time.perf_counter()
    row = run_experiment(cfg)[0]
    elapsed = time.perf_counter() - start
    diff = np.array(row.per_seed_robust) - np.array(row.per_seed_baseline)
    margin = 100 * (row.mean_acc_robust - row.mean_acc_baseline)
    wins = int((diff > 0).sum())
    results = [
        criterion(4, "mean margin >= 3 points", margin >= 3.0,
                  f"CE {row.mean_acc_baseline:.4f} vs L_n {row.mean_acc_robust:.4f} "
                  f"({margin:+.2f} points)"),
        criterion(4, "positive in >= 8/10 seeds", wins >= 8, f"{wins}/10"),
        criterion(4, "runtime", elapsed < 60.0, f"{elapsed:.1f}s (limit 60s)"),
    ]
    assert all(results)


@slow
def test_criterion_5_missing_labels_directional(criterion):
    start = time.perf_counter()
    rows = run_experiment(_mcar_config([0.5, 0.7]))
    elapsed = time.perf_counter() - start
    results = []
    for row in rows:
        k = row.params["kappa1"]
        results.append(criterion(
            5, f"mean L_m >= baseline at kappa1={k}",
            row.mean_acc_robust >= row.mean_acc_baseline,
            f"baseline {row.mean_acc_baseline:.4f} vs L_m {row.mean_acc_robust:.4f}"))
    diff = np.array(rows[1].per_seed_robust) - np.array(rows[1].per_seed_baseline)
    wins = int((diff > 0).sum())
    results.append(criterion(5, "strict improvement at kappa1=0.7 in >= 7/10 seeds", wins >= 7,
                             f"{wins}/10, mean paired diff {100 * diff.mean():+.2f} points"))
    results.append(criterion(5, "runtime", elapsed < 90.0, f"{elapsed:.1f}s (limit 90s)"))
    assert all(results)


def _monotone(means, slack_points=0.5):
    """Non-increasing, allowing one rise of at most ``slack_points``."""
    rises = [100 * (b - a) for a, b in zip(means, means[1:]) if b > a]
    return len(rises) == 0 or (len(rises) == 1 and rises[0] <= slack_points), rises


@slow
def test_criterion_6_monotone_degradation(criterion):
    rows = run_experiment(_mcar_config([0.0, 0.5, 0.6, 0.7]))
    results = []
    for label, attr in (("baseline", "mean_acc_baseline"), ("L_m", "mean_acc_robust")):
        means = [getattr(r, attr) for r in rows]
        ok, rises = _monotone(means)
        results.append(criterion(6, f"{label} non-increasing", ok,
                                 " ".join(f"{m:.4f}" for m in means)
                                 + (f" rises {rises}" if rises else "")))
    assert all(results)


def _binomial_tail_outside(trials, p, low, high):
    """P(X < low) + P(X > high) for X ~ Binomial(trials, p), in high precision."""
    inside = mpmath.fsum(mpmath.binomial(trials, k) * mpmath.mpf(p) ** k
                         * (1 - mpmath.mpf(p)) ** (trials - k) for k in range(low, high + 1))
    return float(1 - inside)


def _poisson_interval(mean, coverage=0.999):
    lo_tail = (1 - coverage) / 2
    cdf, k, lo = 0.0, 0, None
    while True:
        cdf += math.exp(-mean + k * math.log(mean) - math.lgamma(k + 1))
        if lo is None and cdf > lo_tail:
            lo = k
        if cdf >= 1 - lo_tail:
            return lo, k
        k += 1


def _selection_counts(n=10000, ratio=0.5, seeds=100):
    counts = np.zeros(n, dtype=np.int64)
    for seed in range(seeds):
        counts[list(plan_corruption(n, "mcar", ratio, seed=seed).affected_indices)] += 1
    return counts


def test_criterion_7_corruption_statistics(criterion):
    rng = np.random.default_rng(7)
    exact = all(len(plan_corruption(int(n), "mcar", float(r), seed=int(s)).affected_indices)
                == math.floor(r * n + 0.5)
                for n, r, s in zip(rng.integers(0, 5000, 200), rng.uniform(0, 1, 200),
                                   rng.integers(0, 2**63, 200)))
    exact &= affected_count(10000, 0.5) == 5000
    results = [criterion(7, "affected count equals round(kappa1 N)", exact, "200 random (N, ratio)")]

    counts = _selection_counts()
    mean, sd = 50.0, 5.0
    low, high = math.ceil(mean - 3 * sd), math.floor(mean + 3 * sd)
    outside = int(((counts < low) | (counts > high)).sum())
    expected = 10000 * _binomial_tail_outside(100, 0.5, low, high)
    results.append(criterion(
        7, "every index within 3 sigma", outside == 0,
        f"{outside} of 10000 indices outside [{low}, {high}] (min {counts.min()}, max "
        f"{counts.max()}); about {expected:.1f} are expected by chance"))

    t = rng.normal(size=(5000, 3))
    plan = plan_corruption(5000, "multiplicative", 0.3, 1.37, seed=11)
    out = apply_multiplicative_noise(t, plan)
    keep = ~plan.mask()
    results.append(criterion(7, "multiplicative noise leaves others bitwise equal",
                             out[keep].tobytes() == t[keep].tobytes(), f"{int(keep.sum())} rows"))
    assert all(results)


def test_selection_frequencies_match_binomial_exceedance():
    # Companion check for the 3-sigma clause: the number of indices outside
    # the band should look like a Poisson draw with the binomial tail mass.
    counts = _selection_counts()
    outside = int(((counts < 35) | (counts > 65)).sum())
    expected = 10000 * _binomial_tail_outside(100, 0.5, 35, 65)
    lo, hi = _poisson_interval(expected)
    assert lo <= outside <= hi, (outside, expected, lo, hi)
    assert counts.sum() == 100 * 5000
    assert abs(counts.mean() - 50) < 1e-12 and abs(counts.std() - 5) < 0.2


def test_criterion_8_grasp_geometry(criterion):
    rng = np.random.default_rng(8)
    worst_trip, worst_orth, worst_det = 0.0, 0.0, 0.0
    for _ in range(1000):
        v = rng.normal(size=3)
        v /= np.linalg.norm(v)
        R = compose_rotation(v, rng.uniform(-math.pi, math.pi))
        worst_orth = max(worst_orth, np.max(np.abs(R.T @ R - np.eye(3))))
        worst_det = max(worst_det, abs(np.linalg.det(R) - 1.0))
        v2, r2 = decouple_rotation(R)
        worst_trip = max(worst_trip, np.max(np.abs(compose_rotation(v2, r2) - R)))
    a = math.radians(5.0)
    gate = abs(approach_angle_deg([1.0, 0.0, 0.0], [math.cos(a), math.sin(a), 0.0]) - 5.0)
    results = [
        criterion(8, "round trip", worst_trip < 1e-9, f"max entry error {worst_trip:.1e}"),
        criterion(8, "det and orthonormality", max(worst_orth, worst_det) <= 1e-9,
                  f"|R^T R - I| {worst_orth:.1e}, |det - 1| {worst_det:.1e}"),
        criterion(8, "5 degree gate boundary", gate <= 1e-9, f"error {gate:.1e}"),
    ]
    assert all(results)


def _cli(*args, cwd):
    return subprocess.run([sys.executable, "-m", "robustgrasp", *map(str, args)],
                          capture_output=True, cwd=cwd, check=True)


def test_criterion_9_determinism(criterion, tmp_path):
    cfg = ExperimentConfig.from_dict({
        "data": {"n_train": 200, "n_test": 200, "dimension": 10},
        "train": {"epochs": 10},
        "sweep": [["kappa2", [0.2, 0.4]], ["delta", [0.7, 0.9]]],
        "seeds": [0, 1, 2],
    })
    path = tmp_path / "sweep.json"
    path.write_text(json.dumps(cfg.to_dict()))
    first = _cli("sweep", "--config", path, cwd=tmp_path).stdout
    second = _cli("sweep", "--config", path, cwd=tmp_path).stdout
    results = [criterion(9, "sweep CSV byte-identical across processes",
                         first == second and len(first) > 0,
                         f"{len(first.splitlines())} lines, {len(first)} bytes")]

    data = tmp_path / "data.json"
    _cli("gen-data", "--config", path, "--seed", 5, "--out", data, cwd=tmp_path)
    one, two = tmp_path / "one.json", tmp_path / "two.json"
    plan = tmp_path / "plan.json"
    _cli("corrupt", "--config", path, "--kappa1", 0.5, "--seed", 9, "--data", data,
         "--plan-out", plan, "--out", one, cwd=tmp_path)
    # A different seed and ratio prove the second process takes the plan as given.
    _cli("corrupt", "--config", path, "--kappa1", 0.1, "--seed", 1, "--data", data,
         "--plan", plan, "--out", two, cwd=tmp_path)
    same = one.read_bytes() == two.read_bytes()
    results.append(criterion(9, "serialized plan reproduces the corrupted dataset", same,
                             f"{len(json.loads(plan.read_text())['affected_indices'])} "
                             "labels removed"))
    assert all(results)
