"""Acceptance suite: one reported pass/fail line per criterion.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines inline; they
are also collected in the ``acceptance criteria`` terminal summary section.
"""

import functools
import json
import math

import numpy as np
import pytest
from scipy import stats

import oracle
from conftest import random_sample
from pairperm import PartiallyPairedSample, apply_draw, randomization, statistics
from pairperm.cli import main
from pairperm.distributions import CovarianceSpec, ScenarioConfig, generate_sample
from pairperm.harness import StudyGrid, run_study

STUDY_SEED = 2024
NSIM = 5000
B = 1000
ALPHA = 0.05


@functools.lru_cache(maxsize=None)
def study(scenarios, methods):
    grid = StudyGrid(scenarios, methods, alpha=ALPHA, nsim=NSIM, B=B, seed=STUDY_SEED)
    return run_study(grid)


def combined_se(*rows):
    return math.sqrt(sum(r.mc_stderr**2 for r in rows))


# ---------------------------------------------------------------------------
# 1. finite exactness


def test_criterion_1_finite_exactness(report):
    rng = np.random.default_rng(101)
    fixtures = [PartiallyPairedSample([(1.2, 0.4), (2.5, 2.9), (3.1, 1.7)], [0.3, 2.2], [1.4, 3.6])]
    fixtures += [random_sample(rng, 3, 2, 2) for _ in range(2)]
    # tied data exercise the randomization weight
    fixtures.append(PartiallyPairedSample([(1, 0), (2, 0), (3, 0)], [0, 2], [1, 3]))
    worst = 0.0
    for sample in fixtures:
        group = list(randomization.iter_group(3, 4))
        assert len(group) == 192
        for alpha in (0.05, 0.1):
            mass = math.fsum(
                randomization.exact_permutation_test(apply_draw(sample, g), alpha=alpha).randomized_decision()
                for g in group
            ) / len(group)
            worst = max(worst, abs(mass - alpha))
    passed = worst <= 1e-12
    report(1, passed, f"max |rejection mass - alpha| = {worst:.2e} over {len(fixtures)} fixtures (limit 1e-12)")
    assert passed


# ---------------------------------------------------------------------------
# 2. permutation distribution approaches the standard normal


def test_criterion_2_permutation_distribution_normal(report):
    config = ScenarioConfig("normal", CovarianceSpec.homoscedastic(0.5), 200, 200, 200)
    sample = generate_sample(config, np.random.default_rng(202))
    res = randomization.mc_permutation_test(sample, B=10_000, seed=7, keep_replicates=True)
    distance = stats.kstest(res.values, "norm").statistic
    passed = distance < 0.03
    report(2, passed, f"sup |ECDF - Phi| = {distance:.4f} for B = 10000 replicates (limit 0.03)")
    assert passed


# ---------------------------------------------------------------------------
# 3. asymptotic normality of T


def test_criterion_3_asymptotic_normality(report):
    config = ScenarioConfig("normal", CovarianceSpec.homoscedastic(0.0), 200, 200, 200)
    streams = np.random.SeedSequence(303).spawn(2000)
    values = [statistics.weighted_statistic(generate_sample(config, np.random.default_rng(s))) for s in streams]
    distance = stats.kstest(values, "norm").statistic
    passed = distance < 0.05
    report(3, passed, f"KS distance of 2000 null T values = {distance:.4f} (limit 0.05)")
    assert passed


# ---------------------------------------------------------------------------
# 4-7. simulation studies

RHOS = (-0.5, 0.0, 0.5, 0.9)
HOMOSCEDASTIC_10 = tuple(ScenarioConfig("normal", CovarianceSpec.homoscedastic(r), 10, 10, 10) for r in RHOS)
HETEROSCEDASTIC_30 = (ScenarioConfig("normal", CovarianceSpec.heteroscedastic(0.5), 30, 10, 10),)
SKEWED_POWER = tuple(
    ScenarioConfig("asymmetric_laplace", CovarianceSpec.heteroscedastic(0.9), 30, 10, 10, delta=d) for d in (0.5, 1.0)
)


@pytest.mark.slow
def test_criterion_4_type_one_error_homoscedastic(report):
    table = study(HOMOSCEDASTIC_10, ("Tp",))
    rates = [row.rejection_rate for row in table]
    passed = all(0.04 <= r <= 0.06 for r in rates)
    detail = ", ".join(f"rho={rho:+.1f}: {r:.4f}" for rho, r in zip(RHOS, rates))
    report(4, passed, f"Tp level at (10,10,10) {detail} (band [0.04, 0.06])")
    assert passed


@pytest.mark.slow
def test_criterion_5_liberal_lin_stivers(report):
    table = study(HETEROSCEDASTIC_30, ("Tp", "T_LS"))
    tp, tls = table.rows
    gap = tls.rejection_rate - tp.rejection_rate
    se = combined_se(tp, tls)
    passed = gap > 3 * se and tls.rejection_rate > 0.065
    report(
        5, passed,
        f"level T_LS = {tls.rejection_rate:.4f}, Tp = {tp.rejection_rate:.4f}, "
        f"gap {gap:.4f} vs 3 SE = {3 * se:.4f}, T_LS > 0.065",
    )
    assert passed


@pytest.mark.slow
def test_criterion_6_liberal_asymptotic(report):
    table = study(HOMOSCEDASTIC_10[1:2], ("Tp", "T"))
    tp, t = table.rows
    gap = t.rejection_rate - tp.rejection_rate
    se = combined_se(tp, t)
    passed = gap > 2 * se
    report(6, passed, f"level T = {t.rejection_rate:.4f}, Tp = {tp.rejection_rate:.4f}, gap {gap:.4f} vs 2 SE = {2 * se:.4f}")
    assert passed


@pytest.mark.slow
def test_criterion_7_power(report):
    table = study(SKEWED_POWER, ("Tp", "t3"))
    parts, not_worse, strictly = [], True, False
    for scenario in SKEWED_POWER:
        tp, t3 = table.lookup(scenario, "Tp"), table.lookup(scenario, "t3")
        se = combined_se(tp, t3)
        not_worse &= tp.rejection_rate >= t3.rejection_rate - 2 * se
        strictly |= tp.rejection_rate > t3.rejection_rate
        parts.append(f"delta={scenario.delta}: Tp {tp.rejection_rate:.4f} vs t3 {t3.rejection_rate:.4f} (2 SE {2 * se:.4f})")
    passed = not_worse and strictly
    report(7, passed, "; ".join(parts))
    assert passed


# ---------------------------------------------------------------------------
# 8. large-split dataset through the command line against straight-line formulas


def _rel_error(value, expected):
    expected = float(expected)
    return abs(value - expected) / abs(expected) if expected else abs(value)


def test_criterion_8_reference_p_values(report, tmp_path, capsys):
    rng = np.random.default_rng(808)
    worst = 0.0
    for k in range(5):
        complete = rng.normal(size=(9, 2)).round(4).tolist()
        first = (rng.normal(size=28) + 0.4 * k).round(4).tolist()
        second = rng.normal(size=23).round(4).tolist()
        path = tmp_path / f"split{k}.csv"
        rows = ["x1,x2"] + [f"{a},{b}" for a, b in complete] + [f"{a},NA" for a in first] + [f"NA,{b}" for b in second]
        path.write_text("\n".join(rows) + "\n")
        assert main(["test", str(path), "--method", "all", "--format", "record", "--side", "one"]) == 0
        record = json.loads(capsys.readouterr().out)
        assert (record["n1"], record["n2"], record["n3"]) == (9, 28, 23)
        results = {r["method"]: r for r in record["results"]}
        assert set(results) == {"perm", "asymptotic", "lin-stivers", "kim"}

        a = oracle.default_weight(9, 28, 23)
        t = oracle.weighted(complete, first, second, a)
        tls, df = oracle.lin_stivers(complete, first, second)
        t3 = oracle.kim_t3(complete, first, second)
        expected = {
            "asymptotic": (t, oracle.normal_sf),
            "lin-stivers": (tls, lambda x: oracle.t_sf(x, df)),
            "kim": (t3, oracle.normal_sf),
        }
        for method, (value, sf) in expected.items():
            got = results[method]
            worst = max(
                worst,
                _rel_error(got["statistic"], value),
                _rel_error(got["p_one_sided"], sf(value)),
                _rel_error(got["p_two_sided"], 2 * sf(abs(value))),
            )
    passed = worst <= 1e-9
    report(8, passed, f"5 synthetic 9/28/23 datasets, all four methods run; max relative error {worst:.2e} (limit 1e-9)")
    assert passed


# ---------------------------------------------------------------------------
# 9. invariance suite

STATISTICS = {
    "T1": statistics.paired_t_statistic,
    "T2": statistics.welch_statistic,
    "T": statistics.weighted_statistic,
    "T_LS": lambda s: statistics.lin_stivers_statistic(s).value,
    "t3": lambda s: statistics.kim_t3_statistic(s).value,
}


def _close(x, y):
    return abs(x - y) <= 1e-9 * max(abs(x), abs(y)) + 1e-12


def test_criterion_9_invariances(report):
    rng = np.random.default_rng(909)
    failures = {(name, prop): 0 for name in STATISTICS for prop in ("location", "scale", "swap")}
    for _ in range(100):
        n1, n2, n3 = rng.integers(3, 15), rng.integers(2, 15), rng.integers(2, 15)
        sample = random_sample(rng, n1, n2, n3, shift=rng.normal())
        shift, scale = rng.uniform(-50, 50), rng.uniform(0.01, 100)
        shifted = sample.map_values(lambda x: x + shift)
        scaled = sample.map_values(lambda x: x * scale)
        swapped = sample.swapped()
        for name, fn in STATISTICS.items():
            value = fn(sample)
            failures[name, "location"] += not _close(fn(shifted), value)
            failures[name, "scale"] += not _close(fn(scaled), value)
            failures[name, "swap"] += not _close(fn(swapped), -value)
    broken = {k: v for k, v in failures.items() if v}
    passed = not broken
    detail = "all hold" if passed else ", ".join(f"{n} {p} fails on {v}/100" for (n, p), v in broken.items())
    report(9, passed, f"location, scale and swap over 100 fixtures for T1, T2, T, T_LS, t3: {detail}")
    assert passed


# ---------------------------------------------------------------------------
# 10. Monte Carlo p-value against full enumeration


def test_criterion_10_mc_against_exact(report):
    rng = np.random.default_rng(1010)
    inside, sizes = 0, []
    for _ in range(20):
        while True:
            n1, n2, n3 = rng.integers(2, 8), rng.integers(2, 6), rng.integers(2, 6)
            if randomization.group_size(n1, n2, n3) <= 10**5:
                break
        sample = random_sample(rng, n1, n2, n3, shift=rng.uniform(0, 1.5))
        sizes.append(randomization.group_size(n1, n2, n3))
        exact = randomization.exact_permutation_test(sample).p_one_sided
        mc = randomization.mc_permutation_test(sample, B=20_000, seed=int(rng.integers(2**32))).p_one_sided
        inside += abs(mc - exact) <= 3 * math.sqrt(exact * (1 - exact) / 20_000)
    passed = inside >= 19
    report(10, passed, f"{inside}/20 fixtures within 3 SE (need 19); group sizes {min(sizes)}..{max(sizes)}")
    assert passed
