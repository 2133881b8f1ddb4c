"""Acceptance criteria, one test per criterion.

Each test runs its criterion at the stated tolerance, enforces the stated
runtime budget (kernels are pre-compiled by the session fixture), and prints
one pass/fail line; the lines are echoed in the pytest terminal summary.
"""

import math
import time

import mpmath as mp
import numpy as np

import boxcascade as bc
from boxcascade import experiments as ex

from conftest import ACCEPTANCE_LINES
from oracle_tools import full_tables

SEED = 20260808
WORKERS = 2


def _record(num, name, ok, elapsed, budget, detail):
    line = (f"criterion {num} ({name}): {'PASS' if ok else 'FAIL'} "
            f"[{elapsed:.1f}s / {budget:.0f}s] {detail}")
    ACCEPTANCE_LINES.append(line)
    print("\n" + line)


def test_criterion_1_constants_exact():
    budget = 1.0
    t0 = time.perf_counter()
    law = bc.uniform_stick()
    prof = law.profile()
    cc = bc.compute_constants(prof)
    c2 = bc.height_constant(cc, prof, ("fixed", 2))
    c3 = bc.height_constant(cc, prof, ("fixed", 3))
    checks = {
        "C2": abs(c2 - 2.0 / math.log(1.5)) <= 1e-9 * c2,
        "C3": abs(c3 - 3.0 / math.log(2.0)) <= 1e-9 * c3,
        "eq_upper": abs(math.log(2.0 / cc.c_upper) + (cc.c_upper - 1.0) / cc.c_upper) <= 1e-10,
        "eq_lower": abs(math.log(2.0 / cc.c_lower) + (cc.c_lower - 1.0) / cc.c_lower) <= 1e-10,
        "C*": abs(cc.c_upper - 4.31107) <= 1e-4,
        "C-": abs(cc.c_lower - 0.37336) <= 1e-4,
        "transition": 3.0 < cc.theta_star_upper < 4.0,
    }
    elapsed = time.perf_counter() - t0
    ok = all(checks.values()) and elapsed < budget
    _record(1, "constants, exact", ok, elapsed, budget,
            f"C*={cc.c_upper:.6f} C-={cc.c_lower:.6f} theta*={cc.theta_star_upper:.6f} "
            + ("" if all(checks.values()) else f"failed={sorted(k for k, v in checks.items() if not v)}"))
    assert all(checks.values())
    assert elapsed < budget


def test_criterion_2_constants_regimes():
    budget = 5.0
    t0 = time.perf_counter()
    mix = bc.two_three_mixture(0.5)
    cm = bc.compute_constants(mix.profile())
    l75 = bc.compute_constants(bc.law_075u().profile())
    heavy = bc.heavytail(samples=100_000, seed=2)
    hp = heavy.profile()
    hyp2, _ = bc.check_hypotheses(hp, bc.critical_exponents(hp))
    checks = {
        "mix_inf": math.isinf(cm.theta_star_upper) and cm.theta_star_upper > 0,
        "mix_c": abs(cm.c_upper - 1.0 / math.log(2.0)) <= 1e-6,
        "l75_transition": l75.theta_star_upper < 1.99,
        "heavy_hyp2": hyp2 == "fails",
    }
    elapsed = time.perf_counter() - t0
    ok = all(checks.values()) and elapsed < budget
    _record(2, "constants, regimes", ok, elapsed, budget,
            f"mix C*={cm.c_upper:.9f} law075u theta*={l75.theta_star_upper:.4f} "
            f"heavytail hyp2={hyp2}")
    assert all(checks.values())
    assert elapsed < budget


def test_criterion_3_simulator_exactness():
    budget = 30.0
    t0 = time.perf_counter()
    # analytic mean height of two balls under deterministic halving
    env = bc.build_environment(bc.dirac_half(), env_seed=5)
    hs = np.array([bc.height(bc.throw_balls(env, 2, ball_seed=s), 2)
                   for s in range(100_000)], dtype=float)
    se = hs.std(ddof=1) / math.sqrt(hs.size)
    mean_ok = abs(hs.mean() - 2.0) <= 3.0 * se

    # pruned algorithms versus full-table recomputation
    laws = [bc.uniform_stick(), bc.dirac_half(), bc.two_three_mixture(0.5),
            bc.heavytail()]
    rng = np.random.default_rng(SEED)
    matched = 0
    attempts = 0
    mismatches = 0
    while matched < 200 and attempts < 2000:
        attempts += 1
        law = laws[attempts % 4]
        env = bc.build_environment(law, int(rng.integers(2 ** 62)))
        occ = bc.throw_balls(env, int(rng.integers(2, 65)),
                             mode=("exact", "poisson")[attempts % 2],
                             ball_seed=int(rng.integers(2 ** 62)))
        j = int(rng.integers(2, 6))
        h_o, g_o, _, _ = full_tables(occ, j, depth_cap=12)
        if h_o is None:
            continue
        h, g = bc.height_and_saturation(occ, j)
        if h != h_o or g != g_o:
            mismatches += 1
        matched += 1
    elapsed = time.perf_counter() - t0
    ok = mean_ok and matched == 200 and mismatches == 0 and elapsed < budget
    _record(3, "simulator exactness", ok, elapsed, budget,
            f"mean H={hs.mean():.4f} (3SE={3 * se:.4f}), "
            f"{matched} cross-checks, {mismatches} mismatches")
    assert mean_ok
    assert matched == 200 and mismatches == 0
    assert elapsed < budget


def test_criterion_4_structural_invariants():
    budget = 60.0
    t0 = time.perf_counter()
    laws = [bc.uniform_stick(), bc.dirac_half(), bc.two_three_mixture(0.5),
            bc.heavytail()]
    rng = np.random.default_rng(SEED + 1)
    violations = []
    instances = 0
    while instances < 1000:
        instances += 1
        law = laws[int(rng.integers(4))]
        env = bc.build_environment(law, int(rng.integers(2 ** 62)))
        n = int(rng.integers(0, 400))
        j = int(rng.integers(2, 7))
        occ = bc.throw_balls(env, n, mode=("exact", "poisson")[instances % 2],
                             ball_seed=int(rng.integers(2 ** 62)))
        for k in (1, 2, 3):
            st = bc.generation_stats(occ, k)
            if st.counts.sum() != occ.realized_total:
                violations.append(("ball conservation", law.name, n, j, k))
            if abs(st.masses.sum() - 1.0) > 1e-9:
                violations.append(("mass conservation", law.name, n, j, k))
        hs = bc.heights_multi(occ, [j, j + 1])
        g1 = bc.saturation(occ, j)
        g2 = bc.saturation(occ, j + 1)
        if hs[j] < hs[j + 1]:
            violations.append(("H monotone in j", law.name, n, j))
        if g2 > g1:
            violations.append(("G monotone in j", law.name, n, j))
        if g1 > hs[j]:
            violations.append(("G <= H", law.name, n, j))
        if instances % 25 == 0:
            _h, _g, n_list, m_list = full_tables(occ, j, depth_cap=10)
            if any(a > b for a, b in zip(m_list, m_list[1:])):
                violations.append(("M nondecreasing in k", law.name, n, j))
            if 0 in n_list and any(v != 0 for v in n_list[n_list.index(0):]):
                violations.append(("N absorbing at 0", law.name, n, j))
    elapsed = time.perf_counter() - t0
    ok = not violations and elapsed < budget
    _record(4, "structural invariants", ok, elapsed, budget,
            f"{instances} instances, {len(violations)} violations"
            + (f": {violations[:3]}" if violations else ""))
    assert not violations
    assert elapsed < budget


def test_criterion_5_martingale_and_poissonization():
    budget = 60.0
    t0 = time.perf_counter()
    zs = {}
    for theta in (0.5, 2.0):
        res = bc.martingale_step_check(bc.uniform_stick(), theta, k=6,
                                       resamples=10_000, env_seed=101,
                                       resample_seed=202)
        zs[theta] = res["z"]
    mart_ok = all(abs(z) <= 4.0 for z in zs.values())

    env = bc.build_environment(bc.uniform_stick(), env_seed=55)
    reps = 10_000
    counts_by_box = None
    masses_sorted = None
    for s in range(reps):
        occ = bc.throw_balls(env, 100, mode="poisson", ball_seed=s)
        st = bc.generation_stats(occ, 2)
        order = np.argsort(st.masses)
        if counts_by_box is None:
            masses_sorted = st.masses[order]
            counts_by_box = np.empty((reps, order.size))
        counts_by_box[s] = st.counts[order]
    poiss_ok = True
    worst = 0.0
    for b in range(masses_sorted.size):
        lam = 100.0 * masses_sorted[b]
        arr = counts_by_box[:, b]
        se_mean = arr.std(ddof=1) / math.sqrt(reps)
        z_mean = abs(arr.mean() - lam) / se_mean
        m2 = arr.var(ddof=1)
        m4 = ((arr - arr.mean()) ** 4).mean()
        se_var = math.sqrt(max(m4 - m2 ** 2 * (reps - 3) / (reps - 1), 1e-12) / reps)
        z_var = abs(m2 - lam) / se_var
        worst = max(worst, z_mean, z_var)
        poiss_ok &= (z_mean < 5.0) and (z_var < 5.0)
    elapsed = time.perf_counter() - t0
    ok = mart_ok and poiss_ok and elapsed < budget
    _record(5, "martingale and Poissonization", ok, elapsed, budget,
            f"martingale |z|={max(abs(z) for z in zs.values()):.2f} (<=4), "
            f"poisson worst |z|={worst:.2f} (<=5)")
    assert mart_ok and poiss_ok
    assert elapsed < budget


def test_criterion_6_window_counts():
    budget = 120.0
    t0 = time.perf_counter()
    ratios = []
    for s in range(200):
        env = bc.build_environment(bc.uniform_stick(), env_seed=7000 + s)
        emp, pred = bc.biggins_check(env, 16, 1.0, 0.0, math.log(2.0))
        ratios.append(emp / pred)
    mean_ratio = float(np.mean(ratios))
    elapsed = time.perf_counter() - t0
    ok = 0.7 <= mean_ratio <= 1.3 and elapsed < budget
    _record(6, "window counts", ok, elapsed, budget,
            f"mean empirical/predicted = {mean_ratio:.3f} over 200 environments")
    assert 0.7 <= mean_ratio <= 1.3
    assert elapsed < budget


def test_criterion_7_asymptotic_slopes():
    budget = 900.0
    t0 = time.perf_counter()
    grid_full = tuple(2 ** k for k in range(10, 24))
    grid_pow = tuple(2 ** k for k in range(12, 24))
    grid_scan = tuple(2 ** k for k in range(10, 23))

    h2 = ex.slope_run(ex.ExperimentConfig(
        law="uniform-stick", target="height", threshold=("fixed", 2),
        n_grid=grid_full, replicas=50, base_seed=SEED, workers=WORKERS))
    hpow = ex.slope_run(ex.ExperimentConfig(
        law="uniform-stick", target="height", threshold=("power", 0.5),
        n_grid=grid_pow, replicas=50, base_seed=SEED, workers=WORKERS))
    g1 = ex.slope_run(ex.ExperimentConfig(
        law="uniform-stick", target="saturation", threshold=("fixed", 1),
        n_grid=grid_full, replicas=50, base_seed=SEED, workers=WORKERS))
    scan = ex.phase_scan("uniform-stick", [2, 3, 4, 5], grid_scan,
                         replicas=50, base_seed=SEED, workers=WORKERS)
    s = {e.threshold[1]: e.slope for e in scan}
    checks = {
        "H2": abs(h2.relative_gap) <= 0.20,
        "Hpow": abs(hpow.relative_gap) <= 0.25,
        "G1": abs(g1.relative_gap) <= 0.20,
        "ordering": s[2] > s[3] > s[4],
        "flattening": abs(s[4] - s[5]) < abs(s[3] - s[4]),
    }
    elapsed = time.perf_counter() - t0
    ok = all(checks.values()) and elapsed < budget
    _record(7, "asymptotic slopes", ok, elapsed, budget,
            f"H2={h2.slope:.3f}/{h2.reference_constant:.3f} ({h2.relative_gap:+.1%}), "
            f"Hpow={hpow.slope:.3f}/{hpow.reference_constant:.3f} ({hpow.relative_gap:+.1%}), "
            f"G1={g1.slope:.3f}/{g1.reference_constant:.3f} ({g1.relative_gap:+.1%}), "
            f"scan=({s[2]:.3f}, {s[3]:.3f}, {s[4]:.3f}, {s[5]:.3f})"
            + ("" if all(checks.values()) else f" failed={sorted(k for k, v in checks.items() if not v)}"))
    assert all(checks.values())
    assert elapsed < budget


def test_criterion_8_spacing_exponents():
    budget = 120.0
    t0 = time.perf_counter()
    res = ex.spacing_experiment([2 ** k for k in range(14, 25)], j=2,
                                alpha_list=[0.5], replicas=20, seed=SEED)
    gap2 = abs(res.slope_min_cluster - (-2.0)) / 2.0
    gap_a = abs(res.slopes_pow[0.5] - (-0.5)) / 0.5
    elapsed = time.perf_counter() - t0
    ok = gap2 <= 0.10 and gap_a <= 0.10 and elapsed < budget
    _record(8, "spacing exponents", ok, elapsed, budget,
            f"min-2-cluster slope={res.slope_min_cluster:.4f} ({gap2:.1%}), "
            f"sqrt-cluster slope={res.slopes_pow[0.5]:.4f} ({gap_a:.1%})")
    assert gap2 <= 0.10
    assert gap_a <= 0.10
    assert elapsed < budget


def test_criterion_9_poisson_tail_envelope():
    budget = 10.0
    t0 = time.perf_counter()
    xs = [2.0 ** e for e in range(-10, 11)]
    js = list(range(2, 65))
    worst_upper = 0.0
    worst_lower = 0.0
    for x in xs:
        for j in js:
            tail = bc.poisson_tail(x, j)
            worst_upper = max(worst_upper, tail * j ** 2 / x ** 2)
            worst_lower = max(worst_lower, (1.0 - tail) * x ** 2 / j ** 2)
    mp.mp.dps = 60
    worst_rel = 0.0
    for x in (2.0 ** -10, 2.0 ** -3, 1.0, 2.0 ** 5, 2.0 ** 10):
        for j in (2, 5, 16, 64):
            want = mp.gammainc(j, 0, mp.mpf(x), regularized=True)
            got = bc.poisson_tail(x, j)
            worst_rel = max(worst_rel, abs(got - float(want)) / float(want))
    elapsed = time.perf_counter() - t0
    ok = worst_upper <= 10.0 and worst_lower <= 10.0 and worst_rel <= 1e-12 \
        and elapsed < budget
    _record(9, "poisson tail envelope", ok, elapsed, budget,
            f"sup tail*j^2/x^2 = {worst_upper:.3f}, sup comp*x^2/j^2 = {worst_lower:.3f}, "
            f"worst rel err vs oracle = {worst_rel:.2e}")
    assert worst_upper <= 10.0 and worst_lower <= 10.0
    assert worst_rel <= 1e-12
    assert elapsed < budget
