//! Parent laws and the rank-stratum laws they induce under perfect ranking.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use libm::erfc;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::quad::adaptive_simpson;
use crate::specfun::{cdf_unchecked, pdf_unchecked};

/// User-supplied parent law for populations outside the shipped families.
pub trait ParentLaw: Send + Sync + fmt::Debug {
    /// Label used in result files.
    fn name(&self) -> String;
    fn pdf(&self, y: f64) -> f64;
    fn cdf(&self, y: f64) -> f64;
    fn quantile(&self, p: f64) -> f64;
    fn mean_sd(&self) -> (f64, f64);
}

#[derive(Clone, Debug)]
pub enum Distribution {
    Normal { mean: f64, sd: f64 },
    Exponential { rate: f64 },
    Weibull { shape: f64, scale: f64 },
    Custom(Arc<dyn ParentLaw>),
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Domain(format!("{name} must be positive and finite, got {v}")))
    }
}

impl Distribution {
    pub fn normal(mean: f64, sd: f64) -> Result<Self> {
        if !mean.is_finite() {
            return Err(Error::Domain(format!("mean must be finite, got {mean}")));
        }
        Ok(Self::Normal { mean, sd: positive("sd", sd)? })
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        Ok(Self::Exponential { rate: positive("rate", rate)? })
    }

    pub fn weibull(shape: f64, scale: f64) -> Result<Self> {
        Ok(Self::Weibull {
            shape: positive("shape", shape)?,
            scale: positive("scale", scale)?,
        })
    }

    pub fn custom(law: Arc<dyn ParentLaw>) -> Self {
        Self::Custom(law)
    }

    pub fn standard_normal() -> Self {
        Self::Normal { mean: 0.0, sd: 1.0 }
    }

    pub fn pdf(&self, y: f64) -> f64 {
        match *self {
            Self::Normal { mean, sd } => {
                let z = (y - mean) / sd;
                (-0.5 * z * z).exp() / (sd * (2.0 * PI).sqrt())
            }
            Self::Exponential { rate } => {
                if y < 0.0 {
                    0.0
                } else {
                    rate * (-rate * y).exp()
                }
            }
            Self::Weibull { shape, scale } => {
                if y < 0.0 {
                    return 0.0;
                }
                let z = y / scale;
                shape / scale * z.powf(shape - 1.0) * (-z.powf(shape)).exp()
            }
            Self::Custom(ref law) => law.pdf(y),
        }
    }

    pub fn cdf(&self, y: f64) -> f64 {
        match *self {
            Self::Normal { mean, sd } => {
                if y == f64::INFINITY {
                    return 1.0;
                }
                if y == f64::NEG_INFINITY {
                    return 0.0;
                }
                0.5 * erfc(-(y - mean) / sd * FRAC_1_SQRT_2)
            }
            Self::Exponential { rate } => {
                if y <= 0.0 {
                    0.0
                } else {
                    -(-rate * y).exp_m1()
                }
            }
            Self::Weibull { shape, scale } => {
                if y <= 0.0 {
                    0.0
                } else {
                    -(-(y / scale).powf(shape)).exp_m1()
                }
            }
            Self::Custom(ref law) => law.cdf(y),
        }
    }

    /// `inf { y : F(y) >= p }` for `p` in (0, 1).
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!("quantile level {p} outside (0, 1)")));
        }
        Ok(self.quantile_unchecked(p))
    }

    pub(crate) fn quantile_unchecked(&self, p: f64) -> f64 {
        match *self {
            Self::Normal { mean, sd } => mean + sd * std_normal_quantile(p),
            Self::Exponential { rate } => -(-p).ln_1p() / rate,
            Self::Weibull { shape, scale } => scale * (-(-p).ln_1p()).powf(1.0 / shape),
            Self::Custom(ref law) => law.quantile(p),
        }
    }

    /// Population mean and standard deviation.
    pub fn mean_sd(&self) -> (f64, f64) {
        match *self {
            Self::Normal { mean, sd } => (mean, sd),
            Self::Exponential { rate } => (1.0 / rate, 1.0 / rate),
            Self::Weibull { shape, scale } => {
                let g1 = gamma(1.0 + 1.0 / shape);
                let g2 = gamma(1.0 + 2.0 / shape);
                (scale * g1, scale * (g2 - g1 * g1).sqrt())
            }
            Self::Custom(ref law) => law.mean_sd(),
        }
    }

    /// Lower and upper bound of the effective support, used as integration
    /// limits. Cuts the tails at probability 1e-15.
    pub fn effective_support(&self) -> (f64, f64) {
        let eps = 1e-15;
        (self.quantile_unchecked(eps), self.quantile_unchecked(1.0 - eps))
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Normal { mean, sd } => write!(f, "normal:{mean},{sd}"),
            Self::Exponential { rate } => write!(f, "exp:{rate}"),
            Self::Weibull { shape, scale } => write!(f, "weibull:{shape},{scale}"),
            Self::Custom(law) => f.write_str(&law.name()),
        }
    }
}

impl FromStr for Distribution {
    type Err = Error;

    /// Parses `normal:mean,sd`, `exp:rate` or `weibull:shape,scale`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, args) = s.split_once(':').unwrap_or((s, ""));
        let nums = args
            .split(',')
            .filter(|a| !a.trim().is_empty())
            .map(|a| {
                a.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad number `{a}` in distribution `{s}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        match (kind.trim().to_ascii_lowercase().as_str(), nums.as_slice()) {
            ("normal", [mean, sd]) => Self::normal(*mean, *sd),
            ("normal", []) => Ok(Self::standard_normal()),
            ("exp" | "exponential", [rate]) => Self::exponential(*rate),
            ("exp" | "exponential", []) => Self::exponential(1.0),
            ("weibull", [shape, scale]) => Self::weibull(*shape, *scale),
            _ => Err(Error::Config(format!(
                "unknown distribution `{s}` (expected normal:mean,sd | exp:rate | weibull:shape,scale)"
            ))),
        }
    }
}

/// Standard normal quantile: Acklam's rational approximation polished by one
/// Newton step against the erfc-based cdf.
fn std_normal_quantile(p: f64) -> f64 {
    if p > 0.5 {
        // 1 - p is exact for p >= 0.5.
        return -std_normal_quantile(1.0 - p);
    }
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.38357751867269e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };
    let cdf = 0.5 * erfc(-x * FRAC_1_SQRT_2);
    let pdf = (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
    x - (cdf - p) / pdf
}

/// Marginal law of the rank-`r` unit of a perfectly ranked set of size `k`.
#[derive(Clone, Debug)]
pub struct StratumLaw {
    parent: Distribution,
    rank: usize,
    set_size: usize,
}

impl StratumLaw {
    pub fn new(parent: Distribution, rank: usize, set_size: usize) -> Result<Self> {
        if set_size == 0 || rank == 0 || rank > set_size {
            return Err(Error::Domain(format!(
                "rank {rank} invalid for set size {set_size}"
            )));
        }
        Ok(Self { parent, rank, set_size })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn set_size(&self) -> usize {
        self.set_size
    }

    pub fn parent(&self) -> &Distribution {
        &self.parent
    }

    fn shapes(&self) -> (f64, f64) {
        (self.rank as f64, (self.set_size - self.rank + 1) as f64)
    }

    /// `I_{r, k-r+1}(F(y))`.
    pub fn cdf(&self, y: f64) -> f64 {
        let (a, b) = self.shapes();
        cdf_unchecked(a, b, self.parent.cdf(y))
    }

    pub fn pdf(&self, y: f64) -> f64 {
        let (a, b) = self.shapes();
        let f = self.parent.pdf(y);
        if f == 0.0 {
            return 0.0;
        }
        pdf_unchecked(a, b, self.parent.cdf(y)) * f
    }

    /// `E[Y_(r:k)]` by adaptive quadrature over the effective support.
    pub fn mean(&self) -> Result<f64> {
        let (lo, hi) = self.parent.effective_support();
        adaptive_simpson(&|y: f64| y * self.pdf(y), lo, hi, 1e-11, 40)
    }
}

/// Free-function form of [`StratumLaw::cdf`].
pub fn stratum_cdf(s: &StratumLaw, y: f64) -> f64 {
    s.cdf(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn trio() -> Vec<Distribution> {
        vec![
            Distribution::standard_normal(),
            Distribution::exponential(1.0).unwrap(),
            Distribution::weibull(2.0, 1.0).unwrap(),
        ]
    }

    #[test]
    fn pdf_examples() {
        assert_abs_diff_eq!(
            Distribution::standard_normal().pdf(0.0),
            1.0 / (2.0 * PI).sqrt(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(Distribution::standard_normal().pdf(0.0), 0.3989422804, epsilon = 1e-9);
        assert_eq!(Distribution::exponential(1.0).unwrap().pdf(0.0), 1.0);
        assert_eq!(Distribution::weibull(2.0, 1.0).unwrap().pdf(0.0), 0.0);
        assert_eq!(Distribution::exponential(1.0).unwrap().pdf(-1.0), 0.0);
    }

    #[test]
    fn cdf_examples() {
        assert_eq!(Distribution::standard_normal().cdf(0.0), 0.5);
        assert_abs_diff_eq!(Distribution::exponential(1.0).unwrap().cdf(2f64.ln()), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(
            Distribution::weibull(2.0, 1.0).unwrap().cdf(1.0),
            1.0 - (-1f64).exp(),
            epsilon = 1e-15
        );
        assert_eq!(Distribution::exponential(1.0).unwrap().cdf(-3.0), 0.0);
        assert_eq!(Distribution::weibull(2.0, 1.0).unwrap().cdf(0.0), 0.0);
    }

    #[test]
    fn quantile_examples() {
        assert_abs_diff_eq!(Distribution::standard_normal().quantile(0.5).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(Distribution::exponential(1.0).unwrap().quantile(0.9).unwrap(), 10f64.ln(), epsilon = 1e-14);
        assert_abs_diff_eq!(
            Distribution::weibull(2.0, 1.0).unwrap().quantile(0.5).unwrap(),
            2f64.ln().sqrt(),
            epsilon = 1e-14
        );
        assert!(Distribution::standard_normal().quantile(0.0).is_err());
        assert!(Distribution::standard_normal().quantile(1.0).is_err());
    }

    #[test]
    fn normal_quantile_is_sharp() {
        // Reference values of the standard normal quantile.
        let cases = [
            (0.975, 1.959963984540054),
            (0.9, 1.2815515655446004),
            (0.01, -2.3263478740408408),
            (1e-10, -6.361340902404056),
        ];
        for (p, z) in cases {
            assert_abs_diff_eq!(std_normal_quantile(p), z, epsilon = 1e-12);
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        for d in trio() {
            for i in 1..=99 {
                let p = i as f64 / 100.0;
                let q = d.quantile(p).unwrap();
                assert!((d.cdf(q) - p).abs() <= 1e-10, "{d} p={p}");
            }
        }
    }

    #[test]
    fn moments() {
        assert_eq!(Distribution::standard_normal().mean_sd(), (0.0, 1.0));
        assert_eq!(Distribution::exponential(1.0).unwrap().mean_sd(), (1.0, 1.0));
        let (mu, sd) = Distribution::weibull(2.0, 1.0).unwrap().mean_sd();
        assert_abs_diff_eq!(mu, 0.886226925452758, epsilon = 1e-12);
        assert_abs_diff_eq!(sd, 0.463251375, epsilon = 1e-9);
    }

    #[test]
    fn moments_match_numerical_integration() {
        for d in trio() {
            let (lo, hi) = d.effective_support();
            let mu = adaptive_simpson(&|y: f64| y * d.pdf(y), lo, hi, 1e-12, 40).unwrap();
            let m2 = adaptive_simpson(&|y: f64| y * y * d.pdf(y), lo, hi, 1e-12, 40).unwrap();
            let (want_mu, want_sd) = d.mean_sd();
            assert_abs_diff_eq!(mu, want_mu, epsilon = 1e-8);
            assert_abs_diff_eq!((m2 - mu * mu).sqrt(), want_sd, epsilon = 1e-8);
        }
    }

    #[test]
    fn parse_and_display_round_trip() {
        for s in ["normal:0,1", "exp:1", "weibull:2,1", "normal:1.5,0.25"] {
            let d: Distribution = s.parse().unwrap();
            assert_eq!(d.to_string(), s);
        }
        assert!("cauchy:0,1".parse::<Distribution>().is_err());
        assert!("normal:0,-1".parse::<Distribution>().is_err());
        assert!("exp:x".parse::<Distribution>().is_err());
    }

    #[test]
    fn stratum_examples() {
        let n = Distribution::standard_normal();
        let s = StratumLaw::new(n.clone(), 1, 1).unwrap();
        for y in [-1.3, 0.0, 0.4] {
            assert_abs_diff_eq!(stratum_cdf(&s, y), n.cdf(y), epsilon = 1e-15);
        }
        assert_abs_diff_eq!(StratumLaw::new(n.clone(), 1, 3).unwrap().cdf(0.0), 0.875, epsilon = 1e-14);
        assert_abs_diff_eq!(StratumLaw::new(n.clone(), 3, 3).unwrap().cdf(0.0), 0.125, epsilon = 1e-14);
        assert!(StratumLaw::new(n.clone(), 0, 3).is_err());
        assert!(StratumLaw::new(n, 4, 3).is_err());
    }

    #[test]
    fn mixture_identity() {
        for d in trio() {
            for k in 1..=6 {
                for i in 0..=40 {
                    let y = d.quantile_unchecked(0.0125 + 0.0243 * i as f64);
                    let mix: f64 = (1..=k)
                        .map(|r| StratumLaw::new(d.clone(), r, k).unwrap().cdf(y))
                        .sum::<f64>()
                        / k as f64;
                    assert_abs_diff_eq!(mix, d.cdf(y), epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn strata_are_stochastically_ordered() {
        let d = Distribution::exponential(1.0).unwrap();
        for k in 2..=6 {
            for r in 1..k {
                let lo = StratumLaw::new(d.clone(), r, k).unwrap();
                let hi = StratumLaw::new(d.clone(), r + 1, k).unwrap();
                let mut prev = 0.0;
                for i in 0..200 {
                    let y = i as f64 * 0.05;
                    assert!(hi.cdf(y) <= lo.cdf(y) + 1e-15);
                    assert!(lo.cdf(y) >= prev);
                    prev = lo.cdf(y);
                }
            }
        }
    }

    #[test]
    fn exponential_order_statistic_means() {
        // E[Y_(r:3)] for Exp(1): sums of 1/(3-i) for i < r.
        let d = Distribution::exponential(1.0).unwrap();
        let want = [1.0 / 3.0, 1.0 / 3.0 + 0.5, 1.0 / 3.0 + 0.5 + 1.0];
        for (r, w) in (1..=3).zip(want) {
            let mu = StratumLaw::new(d.clone(), r, 3).unwrap().mean().unwrap();
            assert_abs_diff_eq!(mu, w, epsilon = 1e-8);
        }
    }

    #[derive(Debug)]
    struct Uniform01;

    impl ParentLaw for Uniform01 {
        fn name(&self) -> String {
            "uniform:0,1".into()
        }
        fn pdf(&self, y: f64) -> f64 {
            if (0.0..=1.0).contains(&y) { 1.0 } else { 0.0 }
        }
        fn cdf(&self, y: f64) -> f64 {
            y.clamp(0.0, 1.0)
        }
        fn quantile(&self, p: f64) -> f64 {
            p
        }
        fn mean_sd(&self) -> (f64, f64) {
            (0.5, (1.0f64 / 12.0).sqrt())
        }
    }

    #[test]
    fn custom_law_hook() {
        let d = Distribution::custom(Arc::new(Uniform01));
        assert_eq!(d.to_string(), "uniform:0,1");
        assert_eq!(d.quantile(0.25).unwrap(), 0.25);
        let s = StratumLaw::new(d, 2, 2).unwrap();
        assert_abs_diff_eq!(s.cdf(0.5), 0.25, epsilon = 1e-15);
    }
}
