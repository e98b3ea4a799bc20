"""Smoke test for the giantwalk Python extension.

Build and install first:
    pip install maturin
    maturin build --release -m crates/python/Cargo.toml -o dist
    pip install dist/giantwalk-*.whl
then run `python python/smoke_test.py`.
"""

import math

import giantwalk as gw


def main():
    print("giantwalk", gw.__version__, gw.ALGORITHM_ID)

    rho = gw.solve_rho(2.0)
    assert abs(rho - 0.7968121300) < 1e-9, rho
    assert abs(1 - rho - math.exp(-2 * rho)) < 1e-12

    th = gw.theory(100_000, 1.5)
    assert abs(th.t1 - 100_000 * th.rho) < 1e-6
    assert abs(th.sigma ** 2 - th.sigma2) < 1e-6 * th.sigma2
    f, df = gw.trajectory_f(1000, 2.0, 0.0)
    assert f == 0.0 and abs(df - 1.0) < 1e-12

    params = gw.Params(1000, 1.5)
    assert params.p == 1.5 / 1000

    walk = gw.run_walk(3, seed=1, p=1.0)
    assert walk.x == [0, 1, 0, -1]
    assert walk.component_sizes() == [3]

    walk = gw.run_walk(20_000, 1.5, seed=7)
    assert len(walk.x) == 20_001 and len(walk.eta) == 20_000
    assert walk.check() == 0
    assert sum(walk.component_sizes()) == 20_000
    summary = walk.summary()
    assert summary["L1"] == walk.component_sizes()[0]
    again = gw.run_walk(20_000, 1.5, seed=7)
    assert again.x == walk.x

    pmf = gw.enumerate_pmf(4, 0.5)
    assert {k: round(v * 64) for k, v in pmf.items()} == {1: 1, 2: 9, 3: 16, 4: 38}

    l1, l2, count = gw.sample_graph(200, 1.5 / 200, seed=3)
    assert l1 >= l2 and count >= 1

    report = gw.run_experiment(5_000, 2.0, 50, seed=1)
    assert report["config"]["master_seed"] == 1
    assert report["rng_algorithm"] == gw.ALGORITHM_ID
    print("mean offset", report["mean_offset"], "variance ratio", report["variance_ratio"])

    val = gw.validate("enum", 3, 0.5, 4_000, seed=2)
    assert val["pass"], val

    assert abs(gw.normal_cdf(0.0) - 0.5) < 1e-15
    assert gw.ks_normal([-1.0, 0.0, 1.0]) < 0.5
    assert gw.ks_two_sample([1.0, 2.0], [1.0, 2.0]) == 0.0

    try:
        gw.theory(1000, 0.5)
    except ValueError as err:
        print("rejected:", err)
    else:
        raise AssertionError("subcritical lambda accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
