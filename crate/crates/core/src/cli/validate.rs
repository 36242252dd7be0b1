//! Fast identity checks behind `rankset validate`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::distributions::{stratum_cdf, Distribution, StratumLaw};
use crate::estimators::{
    emp_quantile_pooled, emp_quantile_srs, hd_srs, hd_srs_weights, lf_srs, pooled_hd_weights, rss_hd, rss_lf,
    stratum_targets, OrderedSample,
};
use crate::orss::{brute_force_orss_cdf, orss_cdf, orss_pdf_probscale};
use crate::quad::adaptive_simpson;
use crate::sampler::{Design, RssSample};
use crate::specfun::BetaParams;

#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    /// Largest discrepancy seen by the check.
    pub max_error: f64,
    pub tolerance: f64,
}

/// Beta cdf under test; `validate --inject-fault` swaps in a corrupted one.
pub type BetaCdf<'a> = &'a dyn Fn(f64, f64, f64) -> f64;

pub fn reference_beta_cdf(a: f64, b: f64, t: f64) -> f64 {
    BetaParams::new(a, b).and_then(|b| b.cdf(t)).expect("validate only uses valid shapes")
}

/// Deliberately wrong beta cdf used to prove the suite can fail.
pub fn corrupted_beta_cdf(a: f64, b: f64, t: f64) -> f64 {
    reference_beta_cdf(a, b, t) + 1e-4 * t * (1.0 - t)
}

fn check(name: &'static str, tolerance: f64, errors: impl IntoIterator<Item = f64>) -> CheckResult {
    let max_error = errors.into_iter().fold(0.0, |m: f64, e| if e.is_nan() { f64::INFINITY } else { m.max(e) });
    CheckResult { name, passed: max_error <= tolerance, max_error, tolerance }
}

fn unit_grid(points: usize) -> impl Iterator<Item = f64> {
    (0..=points).map(move |i| i as f64 / points as f64)
}

fn binomial_tail(n: usize, j: usize, t: f64) -> f64 {
    let mut coef = 1.0;
    let mut total = 0.0;
    for i in 0..=n {
        if i > 0 {
            coef = coef * (n - i + 1) as f64 / i as f64;
        }
        if i >= j {
            total += coef * t.powi(i as i32) * (1.0 - t).powi((n - i) as i32);
        }
    }
    total
}

pub fn run_checks(cdf: BetaCdf) -> Vec<CheckResult> {
    let shapes = [0.5, 1.0, 2.0, 3.5, 7.0];
    let mut out = Vec::new();

    out.push(check(
        "beta-complement",
        1e-12,
        shapes.iter().flat_map(|&a| {
            shapes.iter().flat_map(move |&b| unit_grid(50).map(move |t| (cdf(a, b, t) + cdf(b, a, 1.0 - t) - 1.0).abs()))
        }),
    ));

    out.push(check(
        "beta-binomial-tail",
        1e-12,
        (1..=10usize).flat_map(|n| {
            (1..=n).flat_map(move |j| {
                unit_grid(20).map(move |t| (cdf(j as f64, (n - j + 1) as f64, t) - binomial_tail(n, j, t)).abs())
            })
        }),
    ));

    out.push(check(
        "beta-density-integral",
        1e-9,
        [(2.0, 3.0), (3.5, 1.5), (7.0, 7.0)].into_iter().flat_map(|(a, b)| {
            [0.2, 0.5, 0.9].into_iter().map(move |t| {
                let law = BetaParams::new(a, b).unwrap();
                let f = |x: f64| law.pdf(x).unwrap();
                (adaptive_simpson(&f, 0.0, t, 1e-12, 40).unwrap() - cdf(a, b, t)).abs()
            })
        }),
    ));

    out.push(check(
        "mixture-identity",
        1e-12,
        (1..=8usize).flat_map(|k| {
            unit_grid(40).map(move |u| {
                let mean = (1..=k).map(|r| cdf(r as f64, (k - r + 1) as f64, u)).sum::<f64>() / k as f64;
                (mean - u).abs()
            })
        }),
    ));

    let normal = Distribution::standard_normal();
    out.push(check(
        "stratum-mixture",
        1e-12,
        [2usize, 3, 5].into_iter().flat_map(|k| {
            let normal = normal.clone();
            [-2.0, -0.3, 0.0, 1.1].into_iter().map(move |y| {
                let mix = (1..=k)
                    .map(|r| stratum_cdf(&StratumLaw::new(normal.clone(), r, k).unwrap(), y))
                    .sum::<f64>()
                    / k as f64;
                (mix - normal.cdf(y)).abs()
            })
        }),
    ));

    let mut telescoping = Vec::new();
    for n in [1usize, 2, 7, 15, 25, 50] {
        for p in [0.05, 0.3, 0.5, 0.95] {
            telescoping.push((hd_srs_weights(n, p).unwrap().iter().sum::<f64>() - 1.0).abs());
        }
    }
    for (m, k) in [(5, 3), (5, 5), (10, 5)] {
        let d = Design::new(m, k).unwrap();
        for t in stratum_targets(d, 0.3).unwrap() {
            telescoping.push((pooled_hd_weights(d, &t).iter().sum::<f64>() - 1.0).abs());
        }
    }
    out.push(check("hd-telescoping", 8.0 * f64::EPSILON, telescoping));

    let mut oracle = Vec::new();
    for (m, k) in [(1, 2), (2, 2), (4, 2), (2, 3), (1, 4), (2, 4), (1, 8)] {
        let d = Design::new(m, k).unwrap();
        for t in (1..=9).map(|i| i as f64 / 10.0) {
            for i in 1..=d.n() {
                oracle.push((orss_cdf(d, i, t).unwrap() - brute_force_orss_cdf(d, i, t).unwrap()).abs());
            }
        }
    }
    out.push(check("orss-oracle", 1e-10, oracle));

    let mut psi = Vec::new();
    for (m, k) in [(2, 2), (2, 3)] {
        let d = Design::new(m, k).unwrap();
        for i in 1..=d.n() {
            let f = |u: f64| orss_pdf_probscale(d, i, u).unwrap();
            psi.push((adaptive_simpson(&f, 0.0, 1.0, 1e-9, 25).unwrap() - 1.0).abs());
        }
    }
    out.push(check("psi-normalization", 1e-6, psi));

    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let values: Vec<f64> = (0..9).map(|_| rng.random_range(-3.0..3.0)).collect();
    let rss = RssSample::new(Design::new(9, 1).unwrap(), values.clone()).unwrap();
    let srs = OrderedSample::from_unsorted(values).unwrap();
    let mut degeneracy = Vec::new();
    for p in [0.1, 0.37, 0.5, 0.9] {
        degeneracy.push((rss_hd(&rss, p).unwrap() - hd_srs(&srs, p).unwrap()).abs());
        degeneracy.push((rss_lf(&rss, p).unwrap() - lf_srs(&srs, p).unwrap()).abs());
        degeneracy.push((emp_quantile_pooled(&OrderedSample::pooled(&rss), p).unwrap() - emp_quantile_srs(&srs, p).unwrap()).abs());
    }
    out.push(check("k1-degeneracy", 0.0, degeneracy));

    let constant = RssSample::new(Design::new(5, 3).unwrap(), vec![2.75; 15]).unwrap();
    let const_srs = OrderedSample::from_unsorted(vec![2.75; 15]).unwrap();
    out.push(check(
        "constant-sample",
        0.0,
        [0.1, 0.5, 0.85].into_iter().flat_map(|p| {
            [rss_hd(&constant, p).unwrap(), hd_srs(&const_srs, p).unwrap()].map(|v| (v - 2.75).abs())
        }),
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_suite_passes() {
        let checks = run_checks(&reference_beta_cdf);
        assert!(checks.len() >= 6);
        for c in &checks {
            assert!(c.passed, "{c:?}");
        }
    }

    #[test]
    fn corrupted_cdf_is_caught() {
        let checks = run_checks(&corrupted_beta_cdf);
        let failed: Vec<_> = checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
        assert!(failed.contains(&"beta-complement"), "{failed:?}");
        assert!(failed.contains(&"mixture-identity"));
    }
}
