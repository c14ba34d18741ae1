"""Acceptance criteria 1 to 11.

Each test prints one ``PASS``/``FAIL`` line (also collected into the pytest
terminal summary).  Run standalone with ``python tests/test_acceptance.py``.
"""

import math
import subprocess
import sys
import time
from functools import lru_cache

import numpy as np

from statemerge.entropy import subset_entropy
from statemerge.invariants import run_suite
from statemerge.merge import (
    entanglement_ledger_check,
    lemma3_average_check,
    run_merging,
    twirl_analytic,
    twirl_monte_carlo,
)
from statemerge.qlin import (
    KrausChannel,
    basis_state,
    ghz,
    maximally_entangled,
    random_density,
    random_pure_state,
    tensor,
)
from statemerge.regions import covering_experiment, distributed_compression_region, mac_rates, min_cut_assistance
from statemerge.typ import certify_c1_to_c6, typical_projector

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # standalone run
    ACCEPTANCE_LINES = []

SEEDS = range(50)


def record(num: int, title: str, ok: bool, detail: str) -> bool:
    line = f"criterion {num}: {'PASS' if ok else 'FAIL'} | {title} | {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def epr_ab():
    return tensor(maximally_entangled(2, ("A", "B")), basis_state([("R", 1)], [0]))


def epr_ar():
    return tensor(maximally_entangled(2, ("A", "R")), basis_state([("B", 2)], [0])).permute(["A", "B", "R"])


@lru_cache(maxsize=None)
def epr_runs():
    t0 = time.perf_counter()
    reports = [run_merging(epr_ab(), 6, 4, K=1, trials=1, rng=s) for s in SEEDS]
    return reports, time.perf_counter() - t0


@lru_cache(maxsize=None)
def positive_runs():
    return run_merging(epr_ar(), 2, 1, K=4, trials=20, rng=5)


def _mean_se(xs):
    a = np.asarray(xs, dtype=float)
    return float(a.mean()), float(a.std(ddof=1) / math.sqrt(a.size))


def test_criterion_1_twirl():
    t0 = time.perf_counter()
    gaps = {}
    for d in (2, 3, 4):
        for L in range(1, d + 1):
            mc = twirl_monte_carlo(d, L, 2000, np.random.default_rng([1, d, L]))
            gaps[(d, L)] = float(np.max(np.abs(mc - twirl_analytic(d, L))))
    dt = time.perf_counter() - t0
    worst = max(gaps, key=gaps.get)
    ok = max(gaps.values()) <= 0.02 and dt < 30
    assert record(1, "twirl formula, 2000 Haar samples", ok,
                  f"max entrywise gap {gaps[worst]:.4f} at (d,L)={worst} (<= 0.02), {dt:.1f}s (< 30s)")


def test_criterion_2_partial_isometry_average():
    t0 = time.perf_counter()
    worst_margin, cases, fails = -np.inf, 0, 0
    for s in SEEDS:
        rng = np.random.default_rng([2, s])
        d_a = 4 if s % 2 == 0 else 8
        rho = random_density([("A", d_a), ("R", 2)], rng, rank=int(rng.integers(1, 2 * d_a + 1)))
        for L in (1, 2, 4):
            chk = lemma3_average_check(rho, L, 500, rng)
            cases += 1
            fails += not chk.holds
            worst_margin = max(worst_margin, chk.mc_mean - chk.bound - 3 * chk.stderr)
    dt = time.perf_counter() - t0
    ok = fails == 0 and dt < 120
    assert record(2, "random partial isometry 2-norm average", ok,
                  f"{cases} cases, {fails} above bound + 3 stderr (worst margin {worst_margin:.2e}), {dt:.1f}s (< 120s)")


def test_criterion_3_one_shot_bound_chain():
    reports, dt = epr_runs()
    q_mean, q_se = _mean_se([r.q_e for r in reports])
    f_mean, _ = _mean_se([r.mean_fidelity for r in reports])
    bound = reports[0].q_e_bound
    chain = f_mean >= 1 - 2 * math.sqrt(q_mean)
    ok = chain and q_mean <= bound + 3 * q_se and f_mean >= 0.9 and dt < 300 and abs(bound - 0.625) < 1e-12
    assert record(3, "EPR^6, L=4, 50 seeds", ok,
                  f"mean F {f_mean:.6f} (>= 1-2sqrt(Qe) and >= 0.9), mean Qe {q_mean:.2e} "
                  f"(<= {bound:.3f} + 3*{q_se:.1e}), total dim {reports[0].d_A ** 2}, {dt:.1f}s (< 300s)")


def test_criterion_4_negative_partial_information():
    reports, _ = epr_runs()
    produced = {r.ebits_out for r in reports}
    consumed = {r.ebits_in for r in reports}
    rate = (reports[0].ebits_out - reports[0].ebits_in) / reports[0].n
    cond = subset_entropy(epr_ab(), ["A", "B"]) - subset_entropy(epr_ab(), ["B"])
    ok = produced == {2.0} and consumed == {0.0} and all(r.K == 1 for r in reports) and abs(rate - 1 / 3) < 1e-12
    ok = ok and abs(cond + 1) < 1e-12
    assert record(4, "entanglement gained when S(A|B) = -1", ok,
                  f"ebits produced {sorted(produced)}, consumed {sorted(consumed)}, per-copy rate {rate:.4f}")


def test_criterion_5_positive_partial_information():
    rep = positive_runs()
    ok = rep.mean_fidelity >= 0.9
    assert record(5, "EPR_AR x |0>_B, n=2, K=4, L=1", ok,
                  f"mean F {rep.mean_fidelity:.4f} +/- {rep.fidelity_stderr:.4f} over {rep.trials} trials "
                  f"(target >= 0.9), Qe {rep.q_e:.3f}, Qe bound {rep.q_e_bound:.3f}")


def test_criterion_6_entanglement_ledger():
    checks = [entanglement_ledger_check(r, epr_ab()) for r in epr_runs()[0]]
    pos = positive_runs()
    checks.append(entanglement_ledger_check(pos, epr_ar()))
    for s in range(10):
        psi = random_pure_state([("A", 2), ("B", 2), ("R", 2)], np.random.default_rng([6, s]))
        rep = run_merging(psi, 2, 2, K=2, trials=3, rng=s)
        checks.append(entanglement_ledger_check(rep, psi))
    # per-trial values as well as the means
    per_trial = all(e <= c.e_in + c.tolerance for c, r in zip(checks[:50], epr_runs()[0]) for e in r.trial_e_out)
    per_trial = per_trial and all(e <= checks[50].e_in + checks[50].tolerance for e in pos.trial_e_out)
    bad = sum(not c.holds for c in checks)
    worst = max(c.e_out - c.e_in for c in checks)
    ok = bad == 0 and per_trial
    assert record(6, "E_out <= E_in + 0.05 n", ok,
                  f"{len(checks)} seeded runs, {bad} violations, max E_out - E_in = {worst:+.4f}")


def test_criterion_7_covering():
    results = []
    for s in range(20):
        psi = random_pure_state([("A", 8), ("B", 8), ("R", 2)], np.random.default_rng([7, s]))
        results.append(covering_experiment(psi, 1, 20, rng=s))
    fails = sum(not r.holds for r in results)
    worst = max(results, key=lambda r: r.mean_error - r.bound)
    assert record(7, "random rank-1 measurement covering, d=(8,8,2)", fails == 0,
                  f"20 states, {fails} above bound at 3 sigma; worst mean {worst.mean_error:.3f} "
                  f"vs bound {worst.bound:.3f}")


def test_criterion_8_typicality():
    t0 = time.perf_counter()
    tp20 = typical_projector([0.2, 0.8], 20, 0.1, mode="enumerate")
    tp10 = typical_projector([0.2, 0.8], 10, 0.1, mode="enumerate")
    cert = certify_c1_to_c6(tp20, baseline=tp10)
    dt = time.perf_counter() - t0
    exact = all(cert[k] for k in ("C2", "C3", "C4", "C5", "C6"))
    trend = tp20.weight > tp10.weight and cert["C1"]
    ok = exact and trend and dt < 10
    assert record(8, "typical projector p=(0.2,0.8), n=20, delta=0.1", ok,
                  f"C2-C6 {exact}, weight {tp10.weight:.4f} -> {tp20.weight:.4f}, rank {tp20.rank}, {dt:.2f}s (< 10s)")


def test_criterion_9_inequality_suites():
    names = ["ssa", "fuchs_van_de_graaf", "fannes", "gentle_measurement", "norm_dimension", "chain_rule"]
    results = [run_suite(n, 1000, 9) for n in names]
    ok = all(r.passed and r.count == 1000 for r in results)
    assert record(9, "inequality suites, 1000 instances each", ok,
                  ", ".join(f"{r.name} {r.violations}" for r in results) + " violations")


def test_criterion_10_regions():
    psi = random_pure_state([("A", 2), ("B", 3)], np.random.default_rng(10))
    s_a, s_b = subset_entropy(psi, ["A"]), subset_entropy(psi, ["B"])
    reg = distributed_compression_region(psi, ["A", "B"])
    corners = {c.ordering: c.rates for c in reg.corners}
    comp = (max(abs(corners[("A", "B")][0] - s_a), abs(corners[("A", "B")][1] + s_a),
                abs(corners[("B", "A")][0] + s_b), abs(corners[("B", "A")][1] - s_b)))
    cut = min_cut_assistance(ghz(["A", "B", "C"]), "A", "B").value
    ch = KrausChannel((np.eye(4),), [("Ap", 2), ("Bp", 2)], [("C", 4)])
    mac = mac_rates(ch, maximally_entangled(2, ("A", "Ap")), maximally_entangled(2, ("B", "Bp")))
    mac_dev = max(abs(x - 1.0) for c in mac.corners for x in c.rates)
    total = [q.bound for q in mac.inequalities if len(q.coeffs) == 2][0]
    sum_dev = max(abs(sum(c.rates) - total) for c in mac.corners)
    ok = comp <= 1e-9 and cut == 1.0 and mac_dev <= 1e-9 and sum_dev <= 1e-12
    assert record(10, "region geometry", ok,
                  f"compression corner dev {comp:.1e}, GHZ3 min-cut {cut!r}, MAC corner dev {mac_dev:.1e}, "
                  f"corner-sum vs I(AB>C) dev {sum_dev:.1e}")


def test_criterion_11_determinism():
    cmd = [sys.executable, "-m", "statemerge", "selftest", "--seed", "7"]
    a = subprocess.run(cmd, capture_output=True, check=False)
    b = subprocess.run(cmd, capture_output=True, check=False)
    ok = a.returncode == 0 and b.returncode == 0 and a.stdout == b.stdout and len(a.stdout) > 0
    assert record(11, "selftest --seed 7 byte-identical", ok,
                  f"exit codes {a.returncode}/{b.returncode}, {len(a.stdout)} bytes, identical {a.stdout == b.stdout}")


if __name__ == "__main__":
    failed = 0
    for name, fn in sorted(((k, v) for k, v in globals().items() if k.startswith("test_criterion_")),
                           key=lambda kv: int(kv[0].split("_")[2])):
        try:
            fn()
        except AssertionError:
            failed += 1
    sys.exit(1 if failed else 0)
