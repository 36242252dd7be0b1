//! Quantile L-estimators for SRS and RSS data.
//!
//! Every estimator except the empirical quantiles is a dot product of a
//! weight vector with the sorted sample. The weights depend only on the
//! design and the level `p`, so they are exposed separately and can be built
//! once per experiment cell.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::orss::{OrssKind, WeightTable};
use crate::sampler::{Design, RssSample};
use crate::specfun::{cdf_unchecked, pdf_unchecked};

// Products like n * p that should be integers are treated as such when
// within this distance of one.
const INTEGRAL_SLACK: f64 = 1e-9;

fn snapped_floor(x: f64) -> (f64, bool) {
    let r = x.round();
    if (x - r).abs() <= INTEGRAL_SLACK {
        (r, true)
    } else {
        (x.floor(), false)
    }
}

fn check_level(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("quantile level {p} outside (0, 1)")))
    }
}

/// Sorted measurements, ascending. Ties keep their input order.
#[derive(Clone, Debug, PartialEq)]
pub struct OrderedSample(Vec<f64>);

impl OrderedSample {
    pub fn from_unsorted(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain("sample is empty".into()));
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::Domain("sample contains NaN".into()));
        }
        values.sort_by(f64::total_cmp);
        Ok(Self(values))
    }

    pub fn from_sorted(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain("sample is empty".into()));
        }
        if values.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err(Error::Domain("values are not sorted ascending".into()));
        }
        Ok(Self(values))
    }

    /// Pooled and sorted RSS measurements.
    pub fn pooled(sample: &RssSample) -> Self {
        let mut v = sample.values().to_vec();
        v.sort_by(f64::total_cmp);
        Self(v)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// 1-based order statistic.
    pub fn order_stat(&self, i: usize) -> f64 {
        self.0[i - 1]
    }

    /// Weighted sum `sum_i w_i Y_(i)`.
    pub fn dot(&self, weights: &[f64]) -> Result<f64> {
        if weights.len() != self.0.len() {
            return Err(Error::Dimension { expected: self.0.len(), got: weights.len() });
        }
        Ok(weights.iter().zip(&self.0).map(|(w, y)| w * y).sum())
    }

    /// Weighted sum for weights that sum to one, anchored at the minimum:
    /// `Y_(1) + sum_i w_i (Y_(i) - Y_(1))`. A constant sample maps to itself
    /// exactly.
    pub fn convex(&self, weights: &[f64]) -> Result<f64> {
        if weights.len() != self.0.len() {
            return Err(Error::Dimension { expected: self.0.len(), got: weights.len() });
        }
        let base = self.0[0];
        Ok(base + weights.iter().zip(&self.0).map(|(w, y)| w * (y - base)).sum::<f64>())
    }
}

/// Index bookkeeping for level `p` in a sample of size `n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuantileTarget {
    pub p: f64,
    pub n: usize,
    /// `np` when integral, otherwise `floor(np) + 1`; clamped to `[1, n]`.
    pub r_p: usize,
    /// `floor((n + 1) p)` clamped to `[1, n]`.
    pub j_star: usize,
    /// Set when either index hit the clamp.
    pub clamped: bool,
}

impl QuantileTarget {
    pub fn new(n: usize, p: f64) -> Result<Self> {
        check_level(p)?;
        if n == 0 {
            return Err(Error::Domain("sample size must be positive".into()));
        }
        let (fl, integral) = snapped_floor(n as f64 * p);
        let raw_r = if integral { fl } else { fl + 1.0 } as i64;
        let raw_j = snapped_floor((n + 1) as f64 * p).0 as i64;
        let r_p = raw_r.clamp(1, n as i64) as usize;
        let j_star = raw_j.clamp(1, n as i64) as usize;
        Ok(Self {
            p,
            n,
            r_p,
            j_star,
            clamped: r_p as i64 != raw_r || j_star as i64 != raw_j,
        })
    }
}

/// Per-stratum target of the pooled transformed-scale estimators.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StratumTarget {
    pub rank: usize,
    /// `p_r = I_{r, k-r+1}(p)`.
    pub p_r: f64,
    pub a_r: f64,
    pub b_r: f64,
    /// `floor((m + 1) p_r)` clamped to `[1, m]`.
    pub j_star: usize,
    pub clamped: bool,
}

/// The `k` stratum targets of level `p`; `p_r` decreases in `r`.
pub fn stratum_targets(design: Design, p: f64) -> Result<Vec<StratumTarget>> {
    check_level(p)?;
    let (m, k) = (design.cycles(), design.set_size());
    Ok((1..=k)
        .map(|r| {
            let p_r = cdf_unchecked(r as f64, (k - r + 1) as f64, p);
            let raw = snapped_floor((m + 1) as f64 * p_r).0 as i64;
            let j_star = raw.clamp(1, m as i64) as usize;
            StratumTarget {
                rank: r,
                p_r,
                a_r: (m + 1) as f64 * p_r,
                b_r: (m + 1) as f64 * (1.0 - p_r),
                j_star,
                clamped: j_star as i64 != raw,
            }
        })
        .collect())
}

/// Beta density `J_{a,b}` with integer-free shapes.
fn beta_density(a: f64, b: f64, t: f64) -> f64 {
    pdf_unchecked(a, b, t)
}

fn rescale(mut weights: Vec<f64>, normalize: bool) -> Vec<f64> {
    if normalize {
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
    }
    weights
}

/// Stigler-type weights `J_{j*, n-j*+1}(i/n) / n`.
pub fn lf_srs_weights(n: usize, p: f64, normalize: bool) -> Result<Vec<f64>> {
    let t = QuantileTarget::new(n, p)?;
    let (a, b) = (t.j_star as f64, (n - t.j_star + 1) as f64);
    let nf = n as f64;
    let w = (1..=n).map(|i| beta_density(a, b, i as f64 / nf) / nf).collect();
    Ok(rescale(w, normalize))
}

/// Harrell-Davis weights `I_{a,b}(i/n) - I_{a,b}((i-1)/n)` with
/// `a = (n+1)p`, `b = (n+1)(1-p)`.
pub fn hd_srs_weights(n: usize, p: f64) -> Result<Vec<f64>> {
    check_level(p)?;
    let (a, b) = ((n + 1) as f64 * p, (n + 1) as f64 * (1.0 - p));
    Ok(telescoped(n, |u| cdf_unchecked(a, b, u)))
}

fn telescoped(n: usize, cdf: impl Fn(f64) -> f64) -> Vec<f64> {
    let nf = n as f64;
    let mut prev = cdf(0.0);
    (1..=n)
        .map(|i| {
            let cur = if i == n { cdf(1.0) } else { cdf(i as f64 / nf) };
            let w = cur - prev;
            prev = cur;
            w
        })
        .collect()
}

/// Pooled LF weights `psi_{m,r}(i/n) / n` for one stratum target.
pub fn pooled_lf_weights(design: Design, target: &StratumTarget, normalize: bool) -> Vec<f64> {
    let (m, k, n) = (design.cycles(), design.set_size(), design.n());
    let (ga, gb) = (target.rank as f64, (k - target.rank + 1) as f64);
    let (ja, jb) = (target.j_star as f64, (m - target.j_star + 1) as f64);
    let nf = n as f64;
    let w = (1..=n)
        .map(|i| {
            let u = i as f64 / nf;
            beta_density(ja, jb, cdf_unchecked(ga, gb, u)) * pdf_unchecked(ga, gb, u) / nf
        })
        .collect();
    rescale(w, normalize)
}

/// Pooled HD weights: increments of `I_{a_r,b_r}(g_r(u))` over `((i-1)/n, i/n]`.
pub fn pooled_hd_weights(design: Design, target: &StratumTarget) -> Vec<f64> {
    let k = design.set_size();
    let (ga, gb) = (target.rank as f64, (k - target.rank + 1) as f64);
    let (a, b) = (target.a_r, target.b_r);
    telescoped(design.n(), |u| cdf_unchecked(a, b, cdf_unchecked(ga, gb, u)))
}

/// Empirical quantile: `Y_(np)` when `np` is integral, else `Y_(floor(np)+1)`.
pub fn emp_quantile_srs(s: &OrderedSample, p: f64) -> Result<f64> {
    let t = QuantileTarget::new(s.len(), p)?;
    Ok(s.order_stat(t.r_p))
}

/// Stigler-type LF estimator, weights not renormalized.
pub fn lf_srs(s: &OrderedSample, p: f64) -> Result<f64> {
    s.dot(&lf_srs_weights(s.len(), p, false)?)
}

/// Harrell-Davis estimator.
pub fn hd_srs(s: &OrderedSample, p: f64) -> Result<f64> {
    s.convex(&hd_srs_weights(s.len(), p)?)
}

/// Generalized inverse of the pooled RSS empirical cdf at `p`.
pub fn emp_quantile_pooled(s: &OrderedSample, p: f64) -> Result<f64> {
    emp_quantile_srs(s, p)
}

fn check_design(s: &OrderedSample, design: Design) -> Result<()> {
    if s.len() != design.n() {
        return Err(Error::Dimension { expected: design.n(), got: s.len() });
    }
    Ok(())
}

pub fn pooled_lf_component(s: &OrderedSample, design: Design, t: &StratumTarget) -> Result<f64> {
    check_design(s, design)?;
    s.dot(&pooled_lf_weights(design, t, false))
}

pub fn pooled_hd_component(s: &OrderedSample, design: Design, t: &StratumTarget) -> Result<f64> {
    check_design(s, design)?;
    s.convex(&pooled_hd_weights(design, t))
}

/// Which family of component estimators a set of estimates came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ComponentKind {
    Lf,
    Hd,
}

/// The `k` per-stratum estimates, in rank order.
#[derive(Clone, Debug, PartialEq)]
pub struct ComponentEstimates {
    pub kind: ComponentKind,
    pub values: Vec<f64>,
}

/// Interpolates between the ordered components at position `(k-1)p + 1`.
pub fn combine_components(c: &ComponentEstimates, p: f64) -> Result<f64> {
    check_level(p)?;
    let k = c.values.len();
    if k == 0 {
        return Err(Error::Domain("no component estimates".into()));
    }
    let mut sorted = c.values.clone();
    sorted.sort_by(f64::total_cmp);
    let pos = (k - 1) as f64 * p;
    let (fl, integral) = snapped_floor(pos);
    let ell = fl as usize + 1;
    let w = if integral { 0.0 } else { pos - fl };
    if ell >= k || w == 0.0 {
        return Ok(sorted[ell.min(k) - 1]);
    }
    Ok((1.0 - w) * sorted[ell - 1] + w * sorted[ell])
}

fn rss_combined(s: &RssSample, p: f64, kind: ComponentKind) -> Result<f64> {
    let design = s.design();
    let pooled = OrderedSample::pooled(s);
    let values = stratum_targets(design, p)?
        .iter()
        .map(|t| match kind {
            ComponentKind::Lf => pooled_lf_component(&pooled, design, t),
            ComponentKind::Hd => pooled_hd_component(&pooled, design, t),
        })
        .collect::<Result<Vec<_>>>()?;
    combine_components(&ComponentEstimates { kind, values }, p)
}

/// Pooled transformed-scale LF estimator, combined across strata.
pub fn rss_lf(s: &RssSample, p: f64) -> Result<f64> {
    rss_combined(s, p, ComponentKind::Lf)
}

/// Pooled transformed-scale HD estimator, combined across strata.
pub fn rss_hd(s: &RssSample, p: f64) -> Result<f64> {
    rss_combined(s, p, ComponentKind::Hd)
}

fn orss_apply(s: &OrderedSample, w: &WeightTable, kind: OrssKind) -> Result<f64> {
    if w.kind != kind {
        return Err(Error::Config(format!("expected a {kind} weight table, got {}", w.kind)));
    }
    match kind {
        OrssKind::Lf => s.dot(&w.weights),
        // Quadrature leaves the HD weight sum within ~1e-10 of 1; the
        // anchored form still returns constant samples exactly.
        OrssKind::Hd => s.convex(&w.weights),
    }
}

pub fn orss_lf(s: &OrderedSample, w: &WeightTable) -> Result<f64> {
    orss_apply(s, w, OrssKind::Lf)
}

pub fn orss_hd(s: &OrderedSample, w: &WeightTable) -> Result<f64> {
    orss_apply(s, w, OrssKind::Hd)
}

/// The eight estimator identifiers, in reporting order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EstimatorId {
    SrsEmp,
    SrsLf,
    SrsHd,
    RssEmp,
    RssLf,
    RssHd,
    OrssLf,
    OrssHd,
}

impl EstimatorId {
    pub const ALL: [EstimatorId; 8] = [
        Self::SrsEmp,
        Self::SrsLf,
        Self::SrsHd,
        Self::RssEmp,
        Self::RssLf,
        Self::RssHd,
        Self::OrssLf,
        Self::OrssHd,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::SrsEmp => "srs_emp",
            Self::SrsLf => "srs_lf",
            Self::SrsHd => "srs_hd",
            Self::RssEmp => "rss_emp",
            Self::RssLf => "rss_lf",
            Self::RssHd => "rss_hd",
            Self::OrssLf => "orss_lf",
            Self::OrssHd => "orss_hd",
        }
    }

    pub fn is_srs(&self) -> bool {
        matches!(self, Self::SrsEmp | Self::SrsLf | Self::SrsHd)
    }

    pub fn is_orss(&self) -> bool {
        matches!(self, Self::OrssLf | Self::OrssHd)
    }

    /// Parses `all` or a comma-separated list of identifiers.
    pub fn parse_list(s: &str) -> Result<Vec<Self>> {
        if s.trim() == "all" {
            return Ok(Self::ALL.to_vec());
        }
        let mut ids = s
            .split(',')
            .map(|t| t.trim().parse())
            .collect::<Result<Vec<Self>>>()?;
        ids.sort();
        ids.dedup();
        if ids.is_empty() {
            return Err(Error::Config("empty estimator list".into()));
        }
        Ok(ids)
    }
}

impl fmt::Display for EstimatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown estimator `{s}`")))
    }
}

/// All weights needed to evaluate the estimators of one `(design, p)` cell.
#[derive(Clone, Debug)]
pub struct EstimatorPlan {
    pub design: Design,
    pub target: QuantileTarget,
    pub strata: Vec<StratumTarget>,
    srs_lf: Vec<f64>,
    srs_hd: Vec<f64>,
    pooled_lf: Vec<Vec<f64>>,
    pooled_hd: Vec<Vec<f64>>,
    orss_lf: Option<WeightTable>,
    orss_hd: Option<WeightTable>,
}

impl EstimatorPlan {
    /// Builds the SRS and pooled weights; ORSS tables are attached with
    /// [`EstimatorPlan::with_orss`].
    pub fn new(design: Design, p: f64) -> Result<Self> {
        let n = design.n();
        let strata = stratum_targets(design, p)?;
        Ok(Self {
            design,
            target: QuantileTarget::new(n, p)?,
            srs_lf: lf_srs_weights(n, p, false)?,
            srs_hd: hd_srs_weights(n, p)?,
            pooled_lf: strata.iter().map(|t| pooled_lf_weights(design, t, false)).collect(),
            pooled_hd: strata.iter().map(|t| pooled_hd_weights(design, t)).collect(),
            strata,
            orss_lf: None,
            orss_hd: None,
        })
    }

    pub fn with_orss(mut self, lf: WeightTable, hd: WeightTable) -> Result<Self> {
        for t in [&lf, &hd] {
            if t.design != self.design || t.p != self.target.p {
                return Err(Error::Config("ORSS table does not match the plan's design and level".into()));
            }
        }
        self.orss_lf = Some(lf);
        self.orss_hd = Some(hd);
        Ok(self)
    }

    pub fn p(&self) -> f64 {
        self.target.p
    }

    /// Whether any index of this cell was clamped into range.
    pub fn clamped(&self) -> bool {
        self.target.clamped || self.strata.iter().any(|t| t.clamped)
    }

    fn combined(&self, pooled: &OrderedSample, weights: &[Vec<f64>], kind: ComponentKind) -> Result<f64> {
        let values = weights
            .iter()
            .map(|w| match kind {
                ComponentKind::Lf => pooled.dot(w),
                ComponentKind::Hd => pooled.convex(w),
            })
            .collect::<Result<Vec<_>>>()?;
        combine_components(&ComponentEstimates { kind, values }, self.target.p)
    }

    /// Evaluates one estimator. `srs` is the sorted SRS sample and `pooled`
    /// the sorted pooled RSS sample, both of size `n`.
    pub fn estimate(&self, id: EstimatorId, srs: &OrderedSample, pooled: &OrderedSample) -> Result<f64> {
        let p = self.target.p;
        match id {
            EstimatorId::SrsEmp => emp_quantile_srs(srs, p),
            EstimatorId::SrsLf => srs.dot(&self.srs_lf),
            EstimatorId::SrsHd => srs.convex(&self.srs_hd),
            EstimatorId::RssEmp => emp_quantile_pooled(pooled, p),
            EstimatorId::RssLf => self.combined(pooled, &self.pooled_lf, ComponentKind::Lf),
            EstimatorId::RssHd => self.combined(pooled, &self.pooled_hd, ComponentKind::Hd),
            EstimatorId::OrssLf => orss_lf(pooled, self.orss_lf.as_ref().ok_or_else(missing_orss)?),
            EstimatorId::OrssHd => orss_hd(pooled, self.orss_hd.as_ref().ok_or_else(missing_orss)?),
        }
    }
}

fn missing_orss() -> Error {
    Error::Config("ORSS weights were not built for this plan".into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn ordered(v: &[f64]) -> OrderedSample {
        OrderedSample::from_unsorted(v.to_vec()).unwrap()
    }

    fn one_to(n: usize) -> OrderedSample {
        ordered(&(1..=n).map(|i| i as f64).collect::<Vec<_>>())
    }

    #[test]
    fn empirical_quantile_examples() {
        let s = one_to(10);
        assert_eq!(emp_quantile_srs(&s, 0.5).unwrap(), 5.0);
        assert_eq!(emp_quantile_srs(&s, 0.55).unwrap(), 6.0);
        assert_eq!(emp_quantile_srs(&ordered(&[3.25]), 0.9).unwrap(), 3.25);
        assert_eq!(emp_quantile_srs(&ordered(&[3.25]), 0.1).unwrap(), 3.25);
        assert!(emp_quantile_srs(&s, 1.0).is_err());
        assert!(emp_quantile_srs(&s, 0.0).is_err());
    }

    #[test]
    fn pooled_empirical_examples() {
        let s = one_to(15);
        assert_eq!(emp_quantile_pooled(&s, 1.0 / 3.0).unwrap(), 5.0);
        assert_eq!(emp_quantile_pooled(&s, 0.5).unwrap(), 8.0);
    }

    #[test]
    fn targets() {
        let t = QuantileTarget::new(15, 0.5).unwrap();
        assert_eq!((t.r_p, t.j_star, t.clamped), (8, 8, false));
        let t = QuantileTarget::new(10, 0.7).unwrap();
        assert_eq!((t.r_p, t.j_star), (7, 7));
        let t = QuantileTarget::new(5, 0.1).unwrap();
        assert_eq!((t.r_p, t.j_star, t.clamped), (1, 1, true));
        // (n + 1) p < n + 1 for p < 1, so only the lower clamp can trigger.
        let t = QuantileTarget::new(5, 0.95).unwrap();
        assert_eq!((t.r_p, t.j_star, t.clamped), (5, 5, false));
    }

    #[test]
    fn lf_weight_sum_for_constant_sample() {
        // Oracle: direct summation of the Beta(8, 8) density on the grid i/15.
        let n = 15;
        let c = 2.5;
        let s = ordered(&vec![c; n]);
        let b = statrs::function::beta::beta(8.0, 8.0);
        let sum: f64 = (1..=n)
            .map(|i| {
                let t = i as f64 / n as f64;
                t.powi(7) * (1.0 - t).powi(7) / b
            })
            .sum::<f64>()
            / n as f64;
        let got = lf_srs(&s, 0.5).unwrap();
        assert_abs_diff_eq!(got, c * sum, epsilon = 1e-12);
        assert!((got / c - 1.0).abs() < 0.07);
        // Near the ends j* hits 1 or n and the grid misses the density's
        // peak at the boundary, so only central levels keep their mass.
        for p in [0.1, 0.3, 0.7, 0.9] {
            let total: f64 = lf_srs_weights(n, p, false).unwrap().iter().sum();
            if (0.25..=0.75).contains(&p) {
                assert!((total - 1.0).abs() < 0.07, "p={p}: {total}");
            } else {
                assert!(total < 1.0, "p={p}: {total}");
            }
            let total: f64 = lf_srs_weights(n, p, true).unwrap().iter().sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn lf_on_one_to_ten() {
        // j* = floor(11 * 0.5) = 5, Beta(5, 6) density evaluated directly.
        let b = statrs::function::beta::beta(5.0, 6.0);
        let want: f64 = (1..=10)
            .map(|i| {
                let t = i as f64 / 10.0;
                t.powi(4) * (1.0 - t).powi(5) / b * i as f64
            })
            .sum::<f64>()
            / 10.0;
        let got = lf_srs(&one_to(10), 0.5).unwrap();
        assert_abs_diff_eq!(got, want, epsilon = 1e-12);
        assert!(got > 4.0 && got < 6.0);
        let w = lf_srs_weights(10, 0.5, false).unwrap();
        let argmax = (0..10).max_by(|&a, &b| w[a].total_cmp(&w[b])).unwrap() + 1;
        // Beta(5, 6) mode (a-1)/(a+b-2) = 4/9: nearest grid point is 0.4.
        assert_eq!(argmax, 4);
    }

    #[test]
    fn hd_examples() {
        assert_eq!(hd_srs(&ordered(&[4.0; 7]), 0.3).unwrap(), 4.0);
        assert_eq!(hd_srs(&ordered(&[1.5]), 0.3).unwrap(), 1.5);
        let w = hd_srs_weights(25, 0.2).unwrap();
        // a = 26 * 0.2 = 5.2, b = 20.8
        let a = 26.0 * 0.2;
        assert_abs_diff_eq!(a, 5.2, epsilon = 1e-14);
        assert_abs_diff_eq!(w[0], statrs::function::beta::beta_reg(5.2, 20.8, 1.0 / 25.0), epsilon = 1e-13);
        assert_eq!(w.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn hd_weights_telescope_exactly() {
        for n in [1, 2, 7, 15, 25, 50] {
            for p in [0.05, 0.1, 0.5, 0.77, 0.9] {
                let w = hd_srs_weights(n, p).unwrap();
                let total = w.iter().fold(0.0, |acc, x| acc + x);
                assert!((total - 1.0).abs() <= 4.0 * f64::EPSILON, "n={n} p={p}: {total}");
                assert!(w.iter().all(|&x| x >= 0.0));
            }
        }
    }

    #[test]
    fn stratum_target_examples() {
        let d = Design::new(5, 3).unwrap();
        let t = stratum_targets(d, 0.5).unwrap();
        let got: Vec<f64> = t.iter().map(|t| t.p_r).collect();
        for (g, w) in got.iter().zip([0.875, 0.5, 0.125]) {
            assert_abs_diff_eq!(*g, w, epsilon = 1e-14);
        }
        assert_eq!(t[0].j_star, 5); // floor(6 * 0.875)
        assert_eq!(stratum_targets(Design::new(4, 1).unwrap(), 0.37).unwrap()[0].p_r, 0.37);
        let t = stratum_targets(Design::new(5, 2).unwrap(), 0.5).unwrap();
        assert_abs_diff_eq!(t[0].p_r, 1.0 - 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(t[1].p_r, 0.25, epsilon = 1e-15);
        for k in 2..=6 {
            let t = stratum_targets(Design::new(5, k).unwrap(), 0.3).unwrap();
            assert!(t.windows(2).all(|w| w[0].p_r > w[1].p_r));
            assert!(t.iter().all(|t| t.p_r > 0.0 && t.p_r < 1.0));
        }
    }

    #[test]
    fn combine_examples() {
        let c = ComponentEstimates { kind: ComponentKind::Hd, values: vec![3.0, 1.0, 2.0] };
        assert_eq!(combine_components(&c, 0.5).unwrap(), 2.0);
        let c = ComponentEstimates { kind: ComponentKind::Lf, values: vec![50.0, 10.0, 40.0, 20.0, 30.0] };
        assert_abs_diff_eq!(combine_components(&c, 0.3).unwrap(), 0.8 * 20.0 + 0.2 * 30.0, epsilon = 1e-12);
        let c = ComponentEstimates { kind: ComponentKind::Lf, values: vec![7.0] };
        assert_eq!(combine_components(&c, 0.8).unwrap(), 7.0);
    }

    fn rss_from(columns: &[Vec<f64>]) -> RssSample {
        RssSample::from_columns(columns).unwrap()
    }

    #[test]
    fn single_rank_rss_matches_srs() {
        let col = vec![0.3, -1.2, 2.2, 0.9, 0.1, -0.4, 1.7];
        let rss = rss_from(std::slice::from_ref(&col));
        let s = ordered(&col);
        for p in [0.1, 0.25, 0.5, 0.63, 0.9] {
            assert_eq!(rss_lf(&rss, p).unwrap(), lf_srs(&s, p).unwrap());
            assert_eq!(rss_hd(&rss, p).unwrap(), hd_srs(&s, p).unwrap());
            assert_eq!(emp_quantile_pooled(&OrderedSample::pooled(&rss), p).unwrap(), emp_quantile_srs(&s, p).unwrap());
        }
    }

    #[test]
    fn constant_samples() {
        let c = -3.75;
        let rss = rss_from(&[vec![c; 5], vec![c; 5], vec![c; 5]]);
        let design = rss.design();
        for p in [0.1, 0.5, 0.9] {
            assert_eq!(rss_hd(&rss, p).unwrap(), c);
            assert_eq!(hd_srs(&ordered(&[c; 15]), p).unwrap(), c);
            let lf = rss_lf(&rss, p).unwrap();
            let sums: Vec<f64> = stratum_targets(design, p)
                .unwrap()
                .iter()
                .map(|t| pooled_lf_weights(design, t, false).iter().sum())
                .collect();
            let (lo, hi) = sums.iter().fold((f64::MAX, f64::MIN), |(l, h), &s| (l.min(s), h.max(s)));
            assert!(lf <= c * lo + 1e-12 && lf >= c * hi - 1e-12, "p={p}");
        }
    }

    #[test]
    fn pooled_lf_weight_mass_tracks_quadrature() {
        // The continuous score integrates to one; the grid sum is within O(1/n).
        let design = Design::new(10, 5).unwrap();
        for p in [0.3, 0.5, 0.7] {
            for t in stratum_targets(design, p).unwrap() {
                let (m, k) = (10usize, 5usize);
                let (ja, jb) = (t.j_star as f64, (m - t.j_star + 1) as f64);
                let (ga, gb) = (t.rank as f64, (k - t.rank + 1) as f64);
                let psi = |u: f64| beta_density(ja, jb, cdf_unchecked(ga, gb, u)) * pdf_unchecked(ga, gb, u);
                let integral = crate::quad::adaptive_simpson(&psi, 0.0, 1.0, 1e-10, 30).unwrap();
                assert_abs_diff_eq!(integral, 1.0, epsilon = 1e-8);
                let sum: f64 = pooled_lf_weights(design, &t, false).iter().sum();
                assert!((sum - 1.0).abs() < 20.0 / 50.0, "p={p} r={}: {sum}", t.rank);
            }
        }
    }

    #[test]
    fn pooled_lf_mass_sits_near_p() {
        let design = Design::new(10, 5).unwrap();
        for t in stratum_targets(design, 0.5).unwrap() {
            let w = pooled_lf_weights(design, &t, false);
            let argmax = (0..50).max_by(|&a, &b| w[a].total_cmp(&w[b])).unwrap() + 1;
            assert!((argmax as f64 / 50.0 - 0.5).abs() < 0.15, "rank {}: {argmax}", t.rank);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let design = Design::new(5, 3).unwrap();
        let t = stratum_targets(design, 0.5).unwrap();
        assert!(matches!(
            pooled_hd_component(&one_to(14), design, &t[0]),
            Err(Error::Dimension { expected: 15, got: 14 })
        ));
        assert!(pooled_lf_component(&one_to(16), design, &t[0]).is_err());
    }

    #[test]
    fn estimator_ids() {
        assert_eq!(EstimatorId::parse_list("all").unwrap().len(), 8);
        assert_eq!(
            EstimatorId::parse_list("rss_hd,srs_emp").unwrap(),
            vec![EstimatorId::SrsEmp, EstimatorId::RssHd]
        );
        assert!(EstimatorId::parse_list("rss_xx").is_err());
        for id in EstimatorId::ALL {
            assert_eq!(id.to_string().parse::<EstimatorId>().unwrap(), id);
        }
    }

    #[test]
    fn plan_agrees_with_direct_evaluation() {
        let design = Design::new(4, 3).unwrap();
        let cols = vec![
            vec![0.1, -0.5, 0.7, 1.1],
            vec![0.4, 0.0, 1.3, -0.2],
            vec![2.0, 0.9, 1.8, 0.6],
        ];
        let rss = rss_from(&cols);
        let pooled = OrderedSample::pooled(&rss);
        let srs = ordered(&[0.5, -1.0, 0.2, 0.8, 1.4, -0.3, 0.0, 0.9, 1.1, -0.7, 0.3, 2.2]);
        for p in [0.1, 0.45, 0.9] {
            let plan = EstimatorPlan::new(design, p).unwrap();
            assert_eq!(plan.estimate(EstimatorId::RssLf, &srs, &pooled).unwrap(), rss_lf(&rss, p).unwrap());
            assert_eq!(plan.estimate(EstimatorId::RssHd, &srs, &pooled).unwrap(), rss_hd(&rss, p).unwrap());
            assert_eq!(plan.estimate(EstimatorId::SrsLf, &srs, &pooled).unwrap(), lf_srs(&srs, p).unwrap());
            assert_eq!(plan.estimate(EstimatorId::SrsHd, &srs, &pooled).unwrap(), hd_srs(&srs, p).unwrap());
            assert!(plan.estimate(EstimatorId::OrssHd, &srs, &pooled).is_err());
        }
    }

    fn sample_strategy() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-100.0f64..100.0, 12)
    }

    proptest! {
        #[test]
        fn hd_translation_equivariance(v in sample_strategy(), c in -50.0f64..50.0, p in 0.05f64..0.95) {
            let s = ordered(&v);
            let shifted = ordered(&v.iter().map(|x| x + c).collect::<Vec<_>>());
            prop_assert!((hd_srs(&shifted, p).unwrap() - hd_srs(&s, p).unwrap() - c).abs() < 1e-9);
            let rss = rss_from(&[v[..4].to_vec(), v[4..8].to_vec(), v[8..].to_vec()]);
            let rss_shift = rss_from(&[
                v[..4].iter().map(|x| x + c).collect(),
                v[4..8].iter().map(|x| x + c).collect(),
                v[8..].iter().map(|x| x + c).collect(),
            ]);
            prop_assert!((rss_hd(&rss_shift, p).unwrap() - rss_hd(&rss, p).unwrap() - c).abs() < 1e-9);
        }

        #[test]
        fn lf_translation_tracks_weight_sum(v in sample_strategy(), c in -50.0f64..50.0, p in 0.05f64..0.95) {
            let s = ordered(&v);
            let shifted = ordered(&v.iter().map(|x| x + c).collect::<Vec<_>>());
            let total: f64 = lf_srs_weights(12, p, false).unwrap().iter().sum();
            prop_assert!((lf_srs(&shifted, p).unwrap() - lf_srs(&s, p).unwrap() - c * total).abs() < 1e-9);
        }

        #[test]
        fn scale_equivariance(v in sample_strategy(), lambda in 0.01f64..20.0, p in 0.05f64..0.95) {
            let s = ordered(&v);
            let scaled = ordered(&v.iter().map(|x| x * lambda).collect::<Vec<_>>());
            let tol = 1e-9 * lambda.max(1.0) * 100.0;
            prop_assert!((emp_quantile_srs(&scaled, p).unwrap() - lambda * emp_quantile_srs(&s, p).unwrap()).abs() < tol);
            prop_assert!((lf_srs(&scaled, p).unwrap() - lambda * lf_srs(&s, p).unwrap()).abs() < tol);
            prop_assert!((hd_srs(&scaled, p).unwrap() - lambda * hd_srs(&s, p).unwrap()).abs() < tol);
            let rss = rss_from(&[v[..6].to_vec(), v[6..].to_vec()]);
            let rss_scaled = rss_from(&[
                v[..6].iter().map(|x| x * lambda).collect(),
                v[6..].iter().map(|x| x * lambda).collect(),
            ]);
            prop_assert!((rss_lf(&rss_scaled, p).unwrap() - lambda * rss_lf(&rss, p).unwrap()).abs() < tol);
            prop_assert!((rss_hd(&rss_scaled, p).unwrap() - lambda * rss_hd(&rss, p).unwrap()).abs() < tol);
        }

        #[test]
        fn hd_monotone_in_data(v in sample_strategy(), bump in 0.0f64..10.0, idx in 0usize..12, p in 0.05f64..0.95) {
            let rss = rss_from(&[v[..4].to_vec(), v[4..8].to_vec(), v[8..].to_vec()]);
            let mut w = v.clone();
            w[idx] += bump;
            let bumped = rss_from(&[w[..4].to_vec(), w[4..8].to_vec(), w[8..].to_vec()]);
            prop_assert!(rss_hd(&bumped, p).unwrap() >= rss_hd(&rss, p).unwrap() - 1e-12);
            prop_assert!(hd_srs(&ordered(&w), p).unwrap() >= hd_srs(&ordered(&v), p).unwrap() - 1e-12);
            prop_assert!(emp_quantile_srs(&ordered(&w), p).unwrap() >= emp_quantile_srs(&ordered(&v), p).unwrap());
        }
    }
}
