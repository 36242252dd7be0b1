"""Smoke test for the `rankset` extension module.

Build first:  pip install --no-build-isolation ./crates/python
"""

import math

import rankset


def close(a, b, tol):
    assert abs(a - b) <= tol, (a, b)


def main():
    close(rankset.beta_cdf(2.0, 3.0, 0.4), 0.5248, 1e-12)
    close(rankset.beta_pdf(1.0, 1.0, 0.3), 1.0, 0.0)

    normal = rankset.Distribution("normal:0,1")
    close(normal.quantile(0.975), 1.959963984540054, 1e-12)
    close(normal.cdf(0.0), 0.5, 1e-15)
    print(repr(normal))

    values = [float(v) for v in range(1, 12)]
    close(rankset.emp_quantile(values, 0.5), 6.0, 0.0)
    close(rankset.hd_quantile(values, 0.5), 6.0, 1e-12)
    close(rankset.hd_quantile([2.5] * 7, 0.3), 2.5, 0.0)

    counts = rankset.count_distribution(2, 3, 0.4)
    assert len(counts) == 7
    close(sum(counts), 1.0, 1e-14)

    w = rankset.orss_weights(5, 5, 0.5, "orss-hd")
    assert len(w) == 25 and min(w) >= 0.0
    close(sum(w), 1.0, 1e-8)
    lf = rankset.orss_weights(5, 3, 0.5, "orss-lf")
    assert len(lf) == 15

    cols = rankset.rss_sample(normal, 5, 3, rho=1.0, seed=9)
    assert len(cols) == 3 and all(len(c) == 5 for c in cols)
    assert cols == rankset.rss_sample(normal, 5, 3, rho=1.0, seed=9)
    for f in (rankset.rss_emp, rankset.rss_lf, rankset.rss_hd):
        assert math.isfinite(f(cols, 0.5))

    close(rankset.spearman([1, 2, 3, 4, 5], [2, 1, 4, 3, 5]), 0.8, 1e-12)
    close(rankset.kendall([1, 2, 3], [1, 2, 3]), 1.0, 0.0)

    rows = rankset.simulate(normal, [(5, 3)], [0.5], replicates=2000, seed=1)
    assert len(rows) == 8
    by_id = {r["estimator"]: r for r in rows}
    assert by_id["srs_emp"]["re"] == 1.0
    assert by_id["rss_hd"]["re"] > 1.0
    again = rankset.simulate(normal, [(5, 3)], [0.5], replicates=2000, seed=1)
    assert rows == again

    try:
        rankset.Distribution("cauchy")
    except ValueError as e:
        print("rejected:", e)
    else:
        raise AssertionError("bad distribution accepted")

    print("smoke test ok:", {k: round(v["re"], 3) for k, v in by_id.items()})


if __name__ == "__main__":
    main()
