"""Exit criteria, one test per criterion, tolerances fixed up front.

Run with ``pytest tests/test_acceptance.py -v``; a PASS/FAIL line per
criterion is printed in the terminal summary.  Criteria 4 and 7 need the
QAPLIB file nug30.dat, looked up at ``$CELLGRID_NUG30`` and then
``tests/data/nug30.dat``.
"""
import math
import os
from functools import lru_cache
from pathlib import Path

import numpy as np
import pytest
from scipy import stats

from cellgrid.cli import main
from cellgrid.engine import EngineConfig, run
from cellgrid.grid import GridShape
from cellgrid.measures import TakeoverConfig, axis_diversity, global_diversity, takeover_time, t_test
from cellgrid.qap import brute_force_optimum, evaluate, load_qaplib, random_instance
from cellgrid.selection import Anisotropic, BinaryTournament, StochasticTournament, anisotropic_probabilities, select
from cellgrid.variation import crossover_batch, draw_mutation_positions, mutate_batch

from conftest import ACCEPTANCE_LINES, reference_cost

REPLICATIONS = 1000
ALPHA_SWEEP = (0.0, 0.2, 0.4, 0.6, 0.8, 0.9, 0.92, 0.94, 0.96, 0.98)
RATE_SWEEP = tuple(round(0.1 * i, 1) for i in range(11))
NUG30_ALPHAS = (0.0, 0.5, 0.92, 0.98)
NUG30_RATES = (0.0, 0.5, 0.85, 1.0)


def report(criterion: str, ok: bool, detail: str):
    ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}")
    assert ok, detail


@lru_cache(maxsize=None)
def takeover(op):
    seed = int(round(op.parameter * 1000)) + (0 if isinstance(op, Anisotropic) else 10_000)
    return takeover_time(np.random.default_rng(seed), TakeoverConfig(op, GridShape(20, 20), REPLICATIONS))


def within(value, target, rel):
    return abs(value - target) <= rel * target


# ---------------------------------------------------------------- 1 - 3


def test_criterion_1_takeover_anisotropic_anchor():
    res = takeover(Anisotropic(0.92, k=2))
    report("1", res.n_censored == 0 and within(res.mean, 65.7, 0.10),
           f"alpha=0.92 k=2 mean takeover {res.mean:.2f} (target 65.7 +/-10%), censored {res.n_censored}")


def test_criterion_2_takeover_stochastic_anchors():
    r85 = takeover(StochasticTournament(0.85))
    r80 = takeover(StochasticTournament(0.8))
    ok = within(r85.mean, 79.6, 0.10) and within(r80.mean, 70.4, 0.10)
    report("2", ok, f"r=0.85 mean {r85.mean:.2f} (target 79.6 +/-10%); r=0.8 mean {r80.mean:.2f} (target 70.4 +/-10%)")


def _monotone_violations(results):
    bad = []
    for (va, a), (vb, b) in zip(results, results[1:]):
        slack = 2 * math.hypot(a.sem, b.sem)
        if b.mean < a.mean - slack:
            bad.append(f"{va}->{vb}: {a.mean:.2f} > {b.mean:.2f}")
    return bad


def test_criterion_3_takeover_monotone_sweeps():
    alphas = [(a, takeover(Anisotropic(a))) for a in ALPHA_SWEEP]
    rates = [(r, takeover(StochasticTournament(r))) for r in RATE_SWEEP]
    full = takeover(Anisotropic(1.0))
    bad = _monotone_violations(alphas) + _monotone_violations(rates)
    censored = sum(res.n_censored for _, res in alphas + rates)
    ok = not bad and censored == 0 and full.n_censored == REPLICATIONS
    curve = ", ".join(f"{v}:{res.mean:.1f}" for v, res in alphas)
    curve_r = ", ".join(f"{v}:{res.mean:.1f}" for v, res in rates)
    report("3", ok, f"alpha [{curve}] r [{curve_r}] alpha=1 censored {full.n_censored}/{REPLICATIONS}"
                    + (f"; violations {bad}" if bad else ""))


# --------------------------------------------------------------- 4 and 7


def nug30_path() -> Path:
    env = os.environ.get("CELLGRID_NUG30")
    return Path(env) if env else Path(__file__).parent / "data" / "nug30.dat"


def require_nug30(criterion):
    path = nug30_path()
    if not path.is_file():
        report(criterion, False, f"QAPLIB instance nug30 not found at {path} (set CELLGRID_NUG30)")
    inst = load_qaplib(path)
    assert inst.n == 30
    return inst


@lru_cache(maxsize=None)
def nug30_runs(op, runs, generations, metric_every=0):
    inst = load_qaplib(nug30_path())
    return [run(EngineConfig(inst, GridShape(20, 20), op, generations, seed=1000 + i, metric_every=metric_every))
            for i in range(runs)]


def _threshold_check(label, ops, best_key, against, require_min):
    costs = {v: [rec.best_cost for rec in nug30_runs(op, 20, 2000)] for v, op in ops}
    means = {v: float(np.mean(c)) for v, c in costs.items()}
    ok = True
    notes = []
    for other in against:
        res = t_test(costs[best_key], costs[other], alternative="less")
        passed = means[best_key] < means[other] and res.p < 0.10
        ok &= passed
        notes.append(f"vs {label}={other}: p={res.p:.3g}")
    if require_min:
        ok &= all(means[best_key] < m for v, m in means.items() if v != best_key)
    summary = ", ".join(f"{label}={v}: {m:.1f}" for v, m in means.items())
    return ok, f"{summary}; " + "; ".join(notes)


def test_criterion_4_threshold_performance_on_nug30():
    require_nug30("4")
    ok_a, note_a = _threshold_check("alpha", [(a, Anisotropic(a)) for a in NUG30_ALPHAS], 0.92, (0.0, 0.98), False)
    ok_r, note_r = _threshold_check("r", [(r, StochasticTournament(r)) for r in NUG30_RATES], 0.85, (0.0, 1.0), True)
    report("4", ok_a and ok_r, f"{note_a} | {note_r}")


def _diversity_order(ops, label):
    bad = []
    notes = []
    at = {}
    for v, op in ops:
        recs = nug30_runs(op, 10, 1000, metric_every=500)
        series = np.array([[row.gD for row in rec.series] for rec in recs])  # generations 0, 500, 1000
        at[v] = series
    for gi, g in ((1, 500), (2, 1000)):
        notes.append(f"g{g}: " + ", ".join(f"{v}:{at[v][:, gi].mean():.3f}" for v, _ in ops))
        for i, (va, _) in enumerate(ops):
            for vb, _ in ops[i + 1:]:
                a, b = at[va][:, gi], at[vb][:, gi]
                se = math.hypot(a.std(ddof=1) / math.sqrt(a.size), b.std(ddof=1) / math.sqrt(b.size))
                if b.mean() < a.mean() - 2 * se:
                    bad.append(f"{label} {va}>{vb} at g{g}")
    return bad, notes


def test_criterion_7_diversity_ordering_on_nug30():
    require_nug30("7")
    bad_a, notes_a = _diversity_order([(a, Anisotropic(a)) for a in NUG30_ALPHAS], "alpha")
    bad_r, notes_r = _diversity_order([(r, StochasticTournament(r)) for r in NUG30_RATES], "r")
    bad = bad_a + bad_r
    report("7", not bad, "; ".join(notes_a + notes_r) + (f"; violations {bad}" if bad else ""))


# -------------------------------------------------------------------- 5


def test_criterion_5_oracle_equivalence():
    rng = np.random.default_rng(5150)
    # exact objective against the double loop on 10^4 pairs
    mismatches = 0
    for _ in range(10_000):
        n = int(rng.integers(1, 9))
        inst = random_instance(rng, n, high=100, symmetric=bool(rng.integers(2)))
        p = rng.permutation(n)
        mismatches += evaluate(inst, p) != reference_cost(inst.dist, inst.flow, p)

    worst = 1.0
    rates = []
    for i in range(25):
        n = 4 + i % 4
        inst = random_instance(rng, n, high=10)
        _, optimum = brute_force_optimum(inst)
        hits = sum(
            run(EngineConfig(inst, GridShape(5, 5), BinaryTournament(), 500, seed=10_000 * i + s)).best_cost == optimum
            for s in range(20)
        )
        rates.append(hits / 20)
        worst = min(worst, hits / 20)
    below = sum(r < 0.80 for r in rates)
    ok = mismatches == 0 and worst >= 0.80
    report("5", ok, f"evaluate mismatches {mismatches}/10000; per-instance optimum hit rate min {worst:.2f} "
                    f"({below}/25 instances below 0.80), pooled {np.mean(rates):.3f} over 25 x 20 runs")


# -------------------------------------------------------------------- 6


def test_criterion_6_property_suites(tmp_path):
    rng = np.random.default_rng(606)
    failures = []

    # closure of crossover then mutation over 10^5 pairs
    trials, n = 100_000, 12
    p1 = rng.permuted(np.tile(np.arange(n), (trials, 1)), axis=1)
    p2 = rng.permuted(np.tile(np.arange(n), (trials, 1)), axis=1)
    a, b = crossover_batch(p1, p2, rng.integers(0, n, (trials, n // 3)))
    m = mutate_batch(a, draw_mutation_positions(rng, trials, n))
    ident = np.arange(n)
    for name, arr in (("child a", a), ("child b", b), ("mutant", m)):
        if not (np.sort(arr, axis=1) == ident).all():
            failures.append(f"{name} not a permutation")

    # normalisation on a 10^3-point alpha grid
    worst = max(abs(anisotropic_probabilities(float(x)).as_array().sum() - 1) for x in np.linspace(0, 1, 1000))
    if worst > 1e-12:
        failures.append(f"probability sum off by {worst}")

    # alpha = 0, k = 2 against binary tournament
    costs = np.tile([3, 1, 4, 1, 5], (100_000, 1))
    ca = np.bincount(select(np.random.default_rng(1), BinaryTournament(), costs), minlength=5)
    cb = np.bincount(select(np.random.default_rng(2), Anisotropic(0.0, 2), costs), minlength=5)
    chi_p = stats.chi2_contingency(np.vstack([ca, cb]))[1]
    if chi_p < 0.001:
        failures.append(f"chi-square p={chi_p:.2e}")

    # diversity bounds, converged value, fresh-population expectation
    fresh = rng.permuted(np.tile(np.arange(30), (20, 20, 1)), axis=2)
    converged = np.tile(rng.permutation(30), (20, 20, 1))
    g = global_diversity(fresh)
    v, h = axis_diversity(fresh)
    expected = (1 - 1 / 30) * (1 - 1 / 400)
    if not all(0 <= x <= 1 for x in (g, v, h)):
        failures.append("diversity outside [0, 1]")
    if global_diversity(converged) != 0 or axis_diversity(converged) != (0.0, 0.0):
        failures.append("converged population has nonzero diversity")
    if abs(g - expected) > 0.005:
        failures.append(f"fresh gD {g:.4f} vs {expected:.4f}")

    # same spec and seed give byte-identical CSVs
    inst_file = Path(__file__).parent / "golden" / "rand6.dat"
    args = ["optimize", "--instance", str(inst_file), "--selection", "stochastic", "--sweep", "0.3,0.9",
            "--runs", "2", "--generations", "15", "--grid", "4x4", "--seed", "3", "--jobs", "1"]
    main([*args, "--out", str(tmp_path / "a")])
    main([*args, "--out", str(tmp_path / "b")])
    for name in ("runs.csv", "aggregate.csv"):
        if (tmp_path / "a" / name).read_bytes() != (tmp_path / "b" / name).read_bytes():
            failures.append(f"{name} differs between identical runs")

    report("6", not failures, f"chi-square p={chi_p:.3f}, fresh gD {g:.4f} (expected {expected:.4f}), "
                              f"max sum error {worst:.1e}" + (f"; failures {failures}" if failures else ""))


# ------------------------------------------------------- extended (hours)


@pytest.mark.extended
@pytest.mark.skipif(os.environ.get("CELLGRID_EXTENDED") != "1", reason="set CELLGRID_EXTENDED=1 for the 200-run reproduction")
def test_extended_full_nug30_comparison():
    require_nug30("4-extended")
    aniso = [rec.best_cost for rec in nug30_runs(Anisotropic(0.92), 200, 2000)]
    stoch = [rec.best_cost for rec in nug30_runs(StochasticTournament(0.85), 200, 2000)]
    ma, ms = float(np.mean(aniso)), float(np.mean(stoch))
    ok = abs(ma - 6156.3) <= 18.6 and abs(ms - 6152.6) <= 18.5
    report("4-extended", ok, f"alpha=0.92 mean {ma:.1f} (6156.3 +/- 18.6); r=0.85 mean {ms:.1f} (6152.6 +/- 18.5)")
