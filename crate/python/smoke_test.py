"""Smoke test for the bagvm Python module.

Build and install first:  maturin develop -m crates/py/Cargo.toml --release
"""

import math

import bagvm


def close(a, b, tol=1e-12):
    return abs(a - b) <= tol * max(1.0, abs(b))


def main():
    f2 = bagvm.Distribution([-1, 1])
    thr = bagvm.Statistic("threshold_mean:c=0")
    eng = bagvm.Engine()

    assert eng.exact_bagged(thr, f2, 2) == 0.25
    assert eng.influence(bagvm.Statistic("mean"), f2, 2, [0, 0, 0]) == 0.0

    g = bagvm.Distribution.empirical([-1, -1, 1])
    r = eng.vonmises_eval(thr, f2, 2, g)
    for c, want in zip(r["contributions"], [0.25, -1 / 6, 1 / 36]):
        assert close(c, want), r
    assert close(r["total"], 1 / 9)

    assert close(eng.first_order_approx(thr, f2, 2, [1, 1]), 0.75)

    base = bagvm.Distribution([-1, 0, 1], [0.2, 0.5, 0.3])
    for stat in bagvm.Statistic.builtins():
        sample = [1, -1, 0, 1]
        assert close(eng.anova_reconstruct(stat, base, sample), stat(sample), 1e-9), stat
        psi = eng.influence(stat, base, 3, [1, -1])
        assert close(eng.influence_numeric(stat, base, 3, [1, -1]), psi, 1e-6), stat
        rep = eng.superset_compare(stat, base, [1, 0, -1])
        assert abs(rep["totals"]["raw_total"] - rep["references"]["raw_statistic_value"]) <= 1e-9

    path = eng.smoothing_path(thr, f2, 1.0, [2])
    assert all(close(v, ((1 + s) / 2) ** 2, 1e-10) for s, v in zip(path["s"], path["bagged"][0]))

    mc = bagvm.mc_bagged(thr, f2, 2, 10_000, 42)
    assert mc == bagvm.mc_bagged(thr, f2, 2, 10_000, 42)
    assert abs(mc["estimate"] - 0.25) <= 4 * mc["stderr"]

    d = bagvm.Distribution.from_json('{"points":[1,-1,1]}')
    assert d.support == [-1.0, 1.0] and d.weights == [1 / 3, 2 / 3]
    e = bagvm.Distribution([0.1, -2.5, 3], [0.25, 0.125, 0.625])
    assert bagvm.Distribution.from_json(e.to_json()) == e
    assert math.isclose(base.mixture([(0.5, 2.0)]).mean(), 0.5 * base.mean() + 1.0)

    try:
        bagvm.Engine(budget=10).exact_bagged(thr, f2, 30)
    except bagvm.BudgetExceeded:
        pass
    else:
        raise AssertionError("budget not enforced")
    try:
        bagvm.Statistic("bogus")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown statistic accepted")

    checks = bagvm.verify(3)
    assert checks and all(c["passed"] for c in checks), [c for c in checks if not c["passed"]]

    print("smoke test passed")


if __name__ == "__main__":
    main()
