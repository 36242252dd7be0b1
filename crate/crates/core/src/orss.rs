//! Exact laws of the pooled ordered RSS sample on the probability scale.
//!
//! Under perfect ranking the number of pooled observations at or below a
//! probability level `t` is a sum of `k` independent binomials,
//! `Bin(m, I_{r,k-r+1}(t))`. Convolving their pmfs gives the whole count
//! distribution in `O(n^2)` work, and every order-statistic cdf
//! `G_i(t) = P(C(t) >= i)` falls out of one reverse cumulative sum.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::estimators::QuantileTarget;
use crate::quad::{adaptive_simpson, DEFAULT_MAX_DEPTH};
use crate::sampler::Design;
use crate::specfun::{cdf_unchecked, central_diff_unit};

/// Finite-difference step for the order-statistic densities.
pub const FD_STEP: f64 = 1e-6;
/// Default per-interval tolerance of the HD weight quadrature.
pub const DEFAULT_QUAD_TOL: f64 = 1e-8;
/// Largest pooled size accepted by the subset-enumeration oracle.
pub const BRUTE_FORCE_LIMIT: usize = 14;

const DUST: f64 = 1e-12;

fn check_unit(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::Domain(format!("probability level {t} outside [0, 1]")))
    }
}

/// `q_r(t) = I_{r, k-r+1}(t)`: chance that a rank-`r` unit falls at or
/// below level `t`.
pub fn stratum_prob(r: usize, k: usize, t: f64) -> Result<f64> {
    if r == 0 || r > k {
        return Err(Error::Domain(format!("rank {r} invalid for set size {k}")));
    }
    check_unit(t)?;
    Ok(cdf_unchecked(r as f64, (k - r + 1) as f64, t))
}

/// Law of `C(t)`, the pooled count at or below `t`; entry `j` is `P(C = j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CountDistribution {
    pub probs: Vec<f64>,
}

impl CountDistribution {
    /// `G_i = P(C >= i)` for `i = 1..=n`, by one reverse cumulative sum.
    pub fn upper_tails(&self) -> Vec<f64> {
        let n = self.probs.len() - 1;
        let mut tails = vec![0.0; n];
        let mut acc = 0.0;
        for j in (1..=n).rev() {
            acc += self.probs[j];
            tails[j - 1] = acc.min(1.0);
        }
        tails
    }
}

fn binomial_pmf(m: usize, q: f64) -> Vec<f64> {
    let mut coef = 1.0;
    (0..=m)
        .map(|j| {
            if j > 0 {
                coef = coef * (m - j + 1) as f64 / j as f64;
            }
            coef * q.powi(j as i32) * (1.0 - q).powi((m - j) as i32)
        })
        .collect()
}

/// Coefficients of `prod_r [(1 - q_r) + q_r z]^m` plus the number of
/// multiply-adds spent convolving them.
pub fn count_distribution_with_ops(design: Design, t: f64) -> Result<(CountDistribution, u64)> {
    check_unit(t)?;
    let (m, k) = (design.cycles(), design.set_size());
    let mut probs = vec![1.0];
    let mut ops = 0u64;
    for r in 1..=k {
        let pmf = binomial_pmf(m, cdf_unchecked(r as f64, (k - r + 1) as f64, t));
        let mut next = vec![0.0; probs.len() + m];
        for (i, &a) in probs.iter().enumerate() {
            for (j, &b) in pmf.iter().enumerate() {
                next[i + j] += a * b;
            }
        }
        ops += (probs.len() * pmf.len()) as u64;
        probs = next;
    }
    for v in &mut probs {
        if *v < 0.0 && *v > -DUST {
            *v = 0.0;
        }
    }
    Ok((CountDistribution { probs }, ops))
}

pub fn count_distribution(design: Design, t: f64) -> Result<CountDistribution> {
    Ok(count_distribution_with_ops(design, t)?.0)
}

fn check_index(design: Design, i: usize) -> Result<()> {
    if i == 0 || i > design.n() {
        return Err(Error::Domain(format!("order index {i} outside 1..={}", design.n())));
    }
    Ok(())
}

/// `G_i(t)`: cdf of the `i`-th pooled order statistic on the probability scale.
pub fn orss_cdf(design: Design, i: usize, t: f64) -> Result<f64> {
    check_index(design, i)?;
    let dist = count_distribution(design, t)?;
    Ok(dist.probs[i..].iter().rev().sum::<f64>().min(1.0))
}

/// `psi_i(t)`: density of the `i`-th pooled order statistic on the
/// probability scale, by finite differences of [`orss_cdf`].
///
/// Differencing `G_i` where it is close to 1 cancels badly, so there the
/// lower tail `P(C < i)` is differenced instead.
pub fn orss_pdf_probscale(design: Design, i: usize, t: f64) -> Result<f64> {
    check_index(design, i)?;
    let (dist, _) = count_distribution_with_ops(design, t)?;
    let upper: f64 = dist.probs[i..].iter().rev().sum();
    let use_upper = upper <= 0.5;
    let tail = |x: f64| {
        let x = x.clamp(0.0, 1.0);
        let probs = count_distribution_with_ops(design, x).expect("level clamped to [0, 1]").0.probs;
        if use_upper {
            probs[i..].iter().rev().sum::<f64>()
        } else {
            -probs[..i].iter().sum::<f64>()
        }
    };
    let d = central_diff_unit(tail, t, FD_STEP)?;
    Ok(if d < 0.0 && d > -DUST { 0.0 } else { d })
}

/// `G_i(t)` by enumerating all `2^n` subsets of the pooled sample.
pub fn brute_force_orss_cdf(design: Design, i: usize, t: f64) -> Result<f64> {
    let n = design.n();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge { n, limit: BRUTE_FORCE_LIMIT });
    }
    check_index(design, i)?;
    check_unit(t)?;
    let k = design.set_size();
    // Unit u belongs to rank u % k + 1.
    let q: Vec<f64> = (0..n)
        .map(|u| cdf_unchecked((u % k + 1) as f64, (k - u % k) as f64, t))
        .collect();
    let mut total = 0.0;
    for mask in 0u32..(1 << n) {
        if (mask.count_ones() as usize) < i {
            continue;
        }
        let prob: f64 = q
            .iter()
            .enumerate()
            .map(|(u, &qu)| if mask >> u & 1 == 1 { qu } else { 1.0 - qu })
            .product();
        total += prob;
    }
    Ok(total)
}

/// `G_i(t)` for all `i` on a fixed grid of levels.
#[derive(Clone, Debug)]
pub struct OrssCdfTable {
    pub design: Design,
    pub grid: Vec<f64>,
    /// `values[i - 1][g] = G_i(grid[g])`.
    pub values: Vec<Vec<f64>>,
    /// Multiply-adds spent in the convolutions.
    pub ops: u64,
}

impl OrssCdfTable {
    pub fn build(design: Design, grid: &[f64]) -> Result<Self> {
        let n = design.n();
        let mut values = vec![Vec::with_capacity(grid.len()); n];
        let mut ops = 0;
        for &t in grid {
            let (dist, spent) = count_distribution_with_ops(design, t)?;
            ops += spent;
            for (row, g) in values.iter_mut().zip(dist.upper_tails()) {
                row.push(g);
            }
        }
        Ok(Self { design, grid: grid.to_vec(), values, ops })
    }

    pub fn get(&self, i: usize, g: usize) -> f64 {
        self.values[i - 1][g]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OrssKind {
    Lf,
    Hd,
}

impl fmt::Display for OrssKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Lf => "orss-lf",
            Self::Hd => "orss-hd",
        })
    }
}

impl FromStr for OrssKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "orss-lf" => Ok(Self::Lf),
            "orss-hd" => Ok(Self::Hd),
            _ => Err(Error::Config(format!("unknown weight kind `{s}` (orss-lf | orss-hd)"))),
        }
    }
}

/// ORSS estimator weights over the pooled order statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightTable {
    pub design: Design,
    pub p: f64,
    pub kind: OrssKind,
    pub r_p: usize,
    pub weights: Vec<f64>,
}

impl WeightTable {
    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Riemann weights `psi_{r_p}(i/n) / n`.
pub fn orss_lf_weights(design: Design, p: f64) -> Result<WeightTable> {
    let n = design.n();
    let r_p = QuantileTarget::new(n, p)?.r_p;
    let nf = n as f64;
    let weights = (1..=n)
        .map(|i| Ok(orss_pdf_probscale(design, r_p, i as f64 / nf)? / nf))
        .collect::<Result<Vec<_>>>()?;
    Ok(WeightTable { design, p, kind: OrssKind::Lf, r_p, weights })
}

/// Interval masses `int_{(i-1)/n}^{i/n} psi_{r_p}(u) du` by adaptive Simpson.
pub fn orss_hd_weights(design: Design, p: f64, quad_tol: f64) -> Result<WeightTable> {
    if !(quad_tol > 0.0) {
        return Err(Error::Domain(format!("quadrature tolerance must be positive, got {quad_tol}")));
    }
    let n = design.n();
    let r_p = QuantileTarget::new(n, p)?.r_p;
    let nf = n as f64;
    let psi = |u: f64| orss_pdf_probscale(design, r_p, u).expect("quadrature stays inside [0, 1]");
    let weights = (1..=n)
        .map(|i| {
            let lo = (i - 1) as f64 / nf;
            let hi = if i == n { 1.0 } else { i as f64 / nf };
            let w = adaptive_simpson(&psi, lo, hi, quad_tol, DEFAULT_MAX_DEPTH)?;
            Ok(if w < 0.0 && w > -DUST { 0.0 } else { w })
        })
        .collect::<Result<Vec<_>>>()?;
    let table = WeightTable { design, p, kind: OrssKind::Hd, r_p, weights };
    if (table.sum() - 1.0).abs() > quad_tol * nf {
        return Err(Error::Quadrature { lo: 0.0, hi: 1.0, tol: quad_tol * nf });
    }
    Ok(table)
}

pub fn orss_weights(design: Design, p: f64, kind: OrssKind) -> Result<WeightTable> {
    match kind {
        OrssKind::Lf => orss_lf_weights(design, p),
        OrssKind::Hd => orss_hd_weights(design, p, DEFAULT_QUAD_TOL),
    }
}

pub const WEIGHT_CSV_HEADER: &str = "m,k,p,kind,i,weight";

/// Writes a table in the cache format, one row per order index.
pub fn write_weight_table<W: Write>(table: &WeightTable, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "{WEIGHT_CSV_HEADER}")?;
    let (m, k) = (table.design.cycles(), table.design.set_size());
    for (i, w) in table.weights.iter().enumerate() {
        writeln!(out, "{m},{k},{:.16e},{},{},{:.16e}", table.p, table.kind, i + 1, w)?;
    }
    Ok(())
}

/// Parses a single table written by [`write_weight_table`].
pub fn read_weight_table(text: &str) -> Result<WeightTable> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if header.join(",") != WEIGHT_CSV_HEADER {
        return Err(Error::Malformed(format!("unexpected weight header `{}`", header.join(","))));
    }
    let mut key: Option<(usize, usize, f64, OrssKind)> = None;
    let mut weights = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("").trim();
        let bad = |what: &str| Error::Malformed(format!("bad {what} in weight row {rec:?}"));
        let m: usize = field(0).parse().map_err(|_| bad("m"))?;
        let k: usize = field(1).parse().map_err(|_| bad("k"))?;
        let p: f64 = field(2).parse().map_err(|_| bad("p"))?;
        let kind: OrssKind = field(3).parse()?;
        let i: usize = field(4).parse().map_err(|_| bad("i"))?;
        let w: f64 = field(5).parse().map_err(|_| bad("weight"))?;
        match key {
            None => key = Some((m, k, p, kind)),
            Some(prev) if prev != (m, k, p, kind) => {
                return Err(Error::Malformed("weight file mixes several tables".into()))
            }
            _ => {}
        }
        if i != weights.len() + 1 {
            return Err(Error::Malformed(format!("weight rows out of order at i = {i}")));
        }
        weights.push(w);
    }
    let (m, k, p, kind) = key.ok_or_else(|| Error::Malformed("weight file has no rows".into()))?;
    let design = Design::new(m, k)?;
    if weights.len() != design.n() {
        return Err(Error::Dimension { expected: design.n(), got: weights.len() });
    }
    let r_p = QuantileTarget::new(design.n(), p)?.r_p;
    Ok(WeightTable { design, p, kind, r_p, weights })
}

/// Directory of precomputed weight tables, one CSV file per `(m, k, p, kind)`.
#[derive(Clone, Debug)]
pub struct WeightCache {
    dir: PathBuf,
}

impl WeightCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn path_for(&self, design: Design, p: f64, kind: OrssKind) -> PathBuf {
        let name = format!("m{}_k{}_p{:.16e}_{}.csv", design.cycles(), design.set_size(), p, kind);
        self.dir.join(name)
    }

    /// Loads the table if cached, otherwise builds and stores it.
    pub fn get_or_build(&self, design: Design, p: f64, kind: OrssKind) -> Result<WeightTable> {
        let path = self.path_for(design, p, kind);
        if let Ok(text) = fs::read_to_string(&path) {
            let table = read_weight_table(&text)?;
            if table.design == design && table.p == p && table.kind == kind {
                return Ok(table);
            }
        }
        let table = orss_weights(design, p, kind)?;
        fs::create_dir_all(&self.dir).map_err(|source| Error::Io { path: self.dir.clone(), source })?;
        write_table_file(&table, &path)?;
        Ok(table)
    }
}

pub fn write_table_file(table: &WeightTable, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_weight_table(table, &mut buf).expect("writing to memory");
    fs::write(path, buf).map_err(|source| Error::Io { path: path.to_owned(), source })
}
