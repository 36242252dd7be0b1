//! Seeded SRS and RSS generators.
//!
//! Every measured unit draws from its own ChaCha stream keyed by
//! `(master_seed, replicate_index, domain, unit_index)`, so a sample is a pure
//! function of its inputs no matter how replicates are scheduled.

use std::fmt;
use std::path::Path;

use rand::seq::index;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, StandardNormal};
use rayon::prelude::*;

use crate::distributions::{Distribution, StratumLaw};
use crate::error::{Error, Result};

pub(crate) const SRS_DOMAIN: u64 = 1;
pub(crate) const RSS_DOMAIN: u64 = 2;
pub(crate) const POP_RSS_DOMAIN: u64 = 3;
pub(crate) const POP_SRS_DOMAIN: u64 = 4;
pub(crate) const PAIRS_DOMAIN: u64 = 5;

/// Balanced RSS design: `m` cycles of `k` ranked sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Design {
    m: usize,
    k: usize,
}

impl Design {
    pub fn new(m: usize, k: usize) -> Result<Self> {
        if m == 0 || k == 0 {
            return Err(Error::Domain(format!("design needs m >= 1 and k >= 1, got ({m}, {k})")));
        }
        Ok(Self { m, k })
    }

    pub fn cycles(&self) -> usize {
        self.m
    }

    pub fn set_size(&self) -> usize {
        self.k
    }

    /// Total number of measured units, `m * k`.
    pub fn n(&self) -> usize {
        self.m * self.k
    }
}

impl fmt::Display for Design {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.m, self.k)
    }
}

/// How judgment ranks are assigned within a set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RankingModel {
    Perfect,
    /// Rank by `X = rho (Y - mu) / sigma + sqrt(1 - rho^2) Z`.
    Concomitant { rho: f64 },
}

impl RankingModel {
    pub fn concomitant(rho: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::Domain(format!("rho must lie in [0, 1], got {rho}")));
        }
        Ok(Self::Concomitant { rho })
    }

    /// `Perfect` for `rho == 1`, concomitant ranking otherwise.
    pub fn from_rho(rho: f64) -> Result<Self> {
        if rho == 1.0 {
            Ok(Self::Perfect)
        } else {
            Self::concomitant(rho)
        }
    }

    pub fn rho(&self) -> f64 {
        match *self {
            Self::Perfect => 1.0,
            Self::Concomitant { rho } => rho,
        }
    }
}

/// Counter-based seed for one replicate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub replicate_index: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, replicate_index: u64) -> Self {
        Self { master_seed, replicate_index }
    }

    /// Independent stream for one unit of one sampling domain.
    pub fn stream(&self, domain: u64, unit: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        for (chunk, word) in key
            .chunks_exact_mut(8)
            .zip([self.master_seed, self.replicate_index, domain, unit])
        {
            chunk.copy_from_slice(&word.to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }
}

/// Uniform variate on the open interval (0, 1).
pub(crate) fn open01<R: RngCore>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Measured values of a balanced ranked set sample.
#[derive(Clone, Debug, PartialEq)]
pub struct RssSample {
    design: Design,
    // Row-major m x k: entry (j, r) at j * k + (r - 1).
    values: Vec<f64>,
}

impl RssSample {
    pub fn new(design: Design, values: Vec<f64>) -> Result<Self> {
        if values.len() != design.n() {
            return Err(Error::Dimension { expected: design.n(), got: values.len() });
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("sample entry {v} is not finite")));
        }
        Ok(Self { design, values })
    }

    /// Builds a sample from per-rank columns, each holding the `m` cycles.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let k = columns.len();
        let m = columns.first().map_or(0, Vec::len);
        let design = Design::new(m, k)?;
        if let Some(bad) = columns.iter().find(|c| c.len() != m) {
            return Err(Error::Dimension { expected: m, got: bad.len() });
        }
        let values = (0..m).flat_map(|j| columns.iter().map(move |c| c[j])).collect();
        Self::new(design, values)
    }

    pub fn design(&self) -> Design {
        self.design
    }

    /// Value of judgment rank `r` (1-based) in cycle `j` (0-based).
    pub fn get(&self, j: usize, r: usize) -> f64 {
        self.values[j * self.design.k + (r - 1)]
    }

    /// The `m` measurements of judgment rank `r` (1-based).
    pub fn column(&self, r: usize) -> Vec<f64> {
        (0..self.design.m).map(|j| self.get(j, r)).collect()
    }

    /// All `n` values, cycle-major.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// Paired response and ranking variable of a finite population.
#[derive(Clone, Debug)]
pub struct FinitePopulation {
    response: Vec<f64>,
    ranker: Vec<f64>,
}

impl FinitePopulation {
    pub fn new(response: Vec<f64>, ranker: Vec<f64>) -> Result<Self> {
        if response.len() != ranker.len() {
            return Err(Error::Dimension { expected: response.len(), got: ranker.len() });
        }
        if response.is_empty() {
            return Err(Error::Domain("population is empty".into()));
        }
        if response.iter().chain(&ranker).any(|v| !v.is_finite()) {
            return Err(Error::Domain("population contains non-finite values".into()));
        }
        Ok(Self { response, ranker })
    }

    /// Loads the two named columns of a headed CSV file. Rows where either
    /// cell is missing or non-numeric are skipped; the count is returned.
    pub fn from_csv(path: &Path, response: &str, ranker: &str) -> Result<(Self, usize)> {
        let (mut cols, dropped) = load_numeric_columns(path, &[response, ranker])?;
        let ranker = cols.pop().expect("two columns requested");
        let response = cols.pop().expect("two columns requested");
        Ok((Self::new(response, ranker)?, dropped))
    }

    pub fn len(&self) -> usize {
        self.response.len()
    }

    pub fn is_empty(&self) -> bool {
        self.response.is_empty()
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn ranker(&self) -> &[f64] {
        &self.ranker
    }
}

/// Reads the named columns of a headed CSV file, keeping only rows where all
/// of them parse as finite numbers. Returns the columns and the number of
/// dropped rows.
pub fn load_numeric_columns(path: &Path, names: &[&str]) -> Result<(Vec<Vec<f64>>, usize)> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => Error::Io { path: path.to_owned(), source },
            other => Error::Malformed(format!("{}: {other:?}", path.display())),
        })?;
    let headers = reader.headers()?.clone();
    let idx = names
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h.trim() == *name)
                .ok_or_else(|| Error::MissingColumn((*name).to_owned()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut cols = vec![Vec::new(); names.len()];
    let mut dropped = 0;
    for record in reader.records() {
        let record = record?;
        let parsed: Option<Vec<f64>> = idx
            .iter()
            .map(|&i| {
                record
                    .get(i)
                    .and_then(|c| c.trim().parse::<f64>().ok())
                    .filter(|v| v.is_finite())
            })
            .collect();
        match parsed {
            Some(row) => cols.iter_mut().zip(row).for_each(|(c, v)| c.push(v)),
            None => dropped += 1,
        }
    }
    Ok((cols, dropped))
}

fn srs_in_domain(d: &Distribution, n: usize, seed: SeedSpec, domain: u64) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let mut rng = seed.stream(domain, i as u64);
            d.quantile_unchecked(open01(&mut rng))
        })
        .collect()
}

/// `n` independent inverse-cdf draws from `d`.
pub fn srs_sample(d: &Distribution, n: usize, seed: SeedSpec) -> Vec<f64> {
    srs_in_domain(d, n, seed, SRS_DOMAIN)
}

/// Draws the judgment rank `r` unit (1-based) of a fresh set of `k` units.
fn draw_ranked_unit<R: RngCore>(
    rng: &mut R,
    d: &Distribution,
    standardize: (f64, f64),
    k: usize,
    r: usize,
    model: RankingModel,
) -> f64 {
    match model {
        RankingModel::Perfect => {
            // The quantile map is monotone, so ranking uniforms ranks the units.
            let mut u: Vec<f64> = (0..k).map(|_| open01(rng)).collect();
            let (_, picked, _) = u.select_nth_unstable_by(r - 1, f64::total_cmp);
            d.quantile_unchecked(*picked)
        }
        RankingModel::Concomitant { rho } => {
            let (mu, sigma) = standardize;
            let noise = (1.0 - rho * rho).max(0.0).sqrt();
            let mut units: Vec<(f64, f64)> = (0..k)
                .map(|_| {
                    let y = d.quantile_unchecked(open01(rng));
                    let z: f64 = StandardNormal.sample(rng);
                    (rho * (y - mu) / sigma + noise * z, y)
                })
                .collect();
            let (_, picked, _) = units.select_nth_unstable_by(r - 1, |a, b| a.0.total_cmp(&b.0));
            picked.1
        }
    }
}

fn rss_in_domain(
    d: &Distribution,
    design: Design,
    model: RankingModel,
    seed: SeedSpec,
    domain: u64,
) -> RssSample {
    let k = design.set_size();
    let standardize = d.mean_sd();
    let values = (0..design.n())
        .map(|unit| {
            let mut rng = seed.stream(domain, unit as u64);
            draw_ranked_unit(&mut rng, d, standardize, k, unit % k + 1, model)
        })
        .collect();
    RssSample { design, values }
}

/// One ranked set sample: each of the `m * k` measured values comes from its
/// own freshly drawn set of `k` units.
pub fn rss_sample(d: &Distribution, design: Design, model: RankingModel, seed: SeedSpec) -> RssSample {
    rss_in_domain(d, design, model, seed, RSS_DOMAIN)
}

/// RSS draw from a finite population: sets are `k` distinct units, drawn
/// independently (with replacement across sets), ranked by the ranker
/// column with random jitter breaking ties.
pub fn rss_from_population(pop: &FinitePopulation, design: Design, seed: SeedSpec) -> Result<RssSample> {
    let k = design.set_size();
    if pop.len() < k {
        return Err(Error::PopulationTooSmall { population: pop.len(), set_size: k });
    }
    let values = (0..design.n())
        .map(|unit| {
            let mut rng = seed.stream(POP_RSS_DOMAIN, unit as u64);
            let picks = index::sample(&mut rng, pop.len(), k);
            let mut set: Vec<(f64, f64, usize)> = picks
                .iter()
                .map(|i| (pop.ranker[i], open01(&mut rng), i))
                .collect();
            let r = unit % k;
            let (_, picked, _) =
                set.select_nth_unstable_by(r, |a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
            pop.response[picked.2]
        })
        .collect();
    Ok(RssSample { design, values })
}

/// Simple random sample of `n` distinct population units.
pub fn srs_from_population(pop: &FinitePopulation, n: usize, seed: SeedSpec) -> Result<Vec<f64>> {
    if pop.len() < n {
        return Err(Error::PopulationTooSmall { population: pop.len(), set_size: n });
    }
    let mut rng = seed.stream(POP_SRS_DOMAIN, 0);
    Ok(index::sample(&mut rng, pop.len(), n).iter().map(|i| pop.response[i]).collect())
}

/// `n` independent `(Y, X)` pairs under the concomitant model.
pub fn concomitant_pairs(d: &Distribution, rho: f64, n: usize, seed: SeedSpec) -> (Vec<f64>, Vec<f64>) {
    let (mu, sigma) = d.mean_sd();
    let noise = (1.0 - rho * rho).max(0.0).sqrt();
    (0..n)
        .map(|i| {
            let mut rng = seed.stream(PAIRS_DOMAIN, i as u64);
            let y = d.quantile_unchecked(open01(&mut rng));
            let z: f64 = StandardNormal.sample(&mut rng);
            (y, rho * (y - mu) / sigma + noise * z)
        })
        .unzip()
}

/// Monte Carlo check of the RSS mean variance formula under perfect ranking.
#[derive(Clone, Debug)]
pub struct MeanVarianceReport {
    pub mc_variance: f64,
    /// `sigma^2 / n - (1 / nk) sum_r (mu_{r:k} - mu)^2`.
    pub formula_variance: f64,
    /// `sigma^2 / n`.
    pub srs_variance: f64,
    pub relative_error: f64,
}

pub fn rss_mean_variance_check(
    d: &Distribution,
    design: Design,
    replicates: usize,
    master_seed: u64,
) -> Result<MeanVarianceReport> {
    if replicates < 2 {
        return Err(Error::Config("need at least two replicates".into()));
    }
    let (mu, sigma) = d.mean_sd();
    let (n, k) = (design.n() as f64, design.set_size());
    let mut spread = 0.0;
    for r in 1..=k {
        let mu_r = StratumLaw::new(d.clone(), r, k)?.mean()?;
        spread += (mu_r - mu).powi(2);
    }
    let srs_variance = sigma * sigma / n;
    let formula_variance = srs_variance - spread / (n * k as f64);

    let means: Vec<f64> = (0..replicates as u64)
        .into_par_iter()
        .map(|b| rss_sample(d, design, RankingModel::Perfect, SeedSpec::new(master_seed, b)).mean())
        .collect();
    let grand = means.iter().sum::<f64>() / replicates as f64;
    let mc_variance =
        means.iter().map(|x| (x - grand).powi(2)).sum::<f64>() / (replicates - 1) as f64;
    Ok(MeanVarianceReport {
        mc_variance,
        formula_variance,
        srs_variance,
        relative_error: (mc_variance - formula_variance).abs() / formula_variance,
    })
}
