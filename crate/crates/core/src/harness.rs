//! Monte Carlo engine for bias, MSE and relative efficiency.
//!
//! Replicates are cut into fixed-size blocks that run in parallel; blocks are
//! merged in index order, so results do not depend on the thread count.
//! Every estimator at a replicate sees the same SRS and RSS draws.

use std::fmt;
use std::io::{Read, Write};
use std::path::PathBuf;
use std::sync::Arc;

use rayon::prelude::*;

use crate::distributions::Distribution;
use crate::error::{Error, Result};
use crate::estimators::{emp_quantile_srs, EstimatorId, EstimatorPlan, OrderedSample};
use crate::orss::{orss_weights, OrssKind, WeightCache};
use crate::sampler::{
    rss_from_population, rss_sample, srs_from_population, srs_sample, Design, FinitePopulation, RankingModel,
    SeedSpec,
};

/// Replicates per parallel work item. Changing it changes the summation
/// order, hence the low bits of the results.
const BLOCK: u64 = 64;

pub const DEFAULT_REPLICATES: usize = 20_000;

#[derive(Clone, Debug)]
pub enum Source {
    Model(Distribution),
    Population { population: Arc<FinitePopulation>, label: String },
}

impl Source {
    pub fn label(&self) -> String {
        match self {
            Self::Model(d) => d.to_string(),
            Self::Population { label, .. } => label.clone(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub source: Source,
    pub designs: Vec<Design>,
    /// Ignored for population runs, where the ranker column ranks the sets.
    pub rank_models: Vec<RankingModel>,
    pub p_grid: Vec<f64>,
    pub estimators: Vec<EstimatorId>,
    pub replicates: usize,
    pub master_seed: u64,
    pub orss_enabled: bool,
    pub weight_cache: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Model-based run with all eight estimators.
    pub fn model(dist: Distribution, designs: Vec<Design>, rank_models: Vec<RankingModel>, p_grid: Vec<f64>) -> Self {
        Self {
            source: Source::Model(dist),
            designs,
            rank_models,
            p_grid,
            estimators: EstimatorId::ALL.to_vec(),
            replicates: DEFAULT_REPLICATES,
            master_seed: 0,
            orss_enabled: true,
            weight_cache: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        if self.designs.is_empty() {
            return Err(Error::Config("no designs given".into()));
        }
        if self.p_grid.is_empty() || self.p_grid.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
            return Err(Error::Config("p grid must be a nonempty subset of (0, 1)".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::Config("no estimators selected".into()));
        }
        if !self.orss_enabled && self.estimators.iter().any(EstimatorId::is_orss) {
            return Err(Error::Config("ORSS estimators requested but ORSS is disabled".into()));
        }
        match &self.source {
            Source::Model(_) if self.rank_models.is_empty() => {
                Err(Error::Config("no ranking models given".into()))
            }
            Source::Population { population, .. } => {
                for d in &self.designs {
                    if population.len() < d.set_size().max(d.n()) {
                        return Err(Error::PopulationTooSmall {
                            population: population.len(),
                            set_size: d.set_size().max(d.n()),
                        });
                    }
                }
                Ok(())
            }
            Source::Model(_) => Ok(()),
        }
    }

    /// `(rho, model)` blocks of the run; population runs have a single
    /// block without a correlation.
    fn ranking_blocks(&self) -> Vec<(Option<f64>, RankingModel)> {
        match self.source {
            Source::Model(_) => self.rank_models.iter().map(|m| (Some(m.rho()), *m)).collect(),
            Source::Population { .. } => vec![(None, RankingModel::Perfect)],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub distribution: String,
    pub rho: Option<f64>,
    pub m: usize,
    pub k: usize,
    pub p: f64,
    pub estimator: EstimatorId,
    pub bias: f64,
    pub mse: f64,
    pub re: f64,
    /// Monte Carlo standard error of `mse`.
    pub mc_se: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExperimentResult {
    pub rows: Vec<ResultRow>,
    /// `(design, p)` cells where an order-statistic index was clamped.
    pub clamped: Vec<(Design, f64)>,
}

pub const RESULTS_HEADER: [&str; 10] = ["distribution", "rho", "m", "k", "p", "estimator", "bias", "mse", "re", "mc_se"];

impl ExperimentResult {
    pub fn row(&self, rho: Option<f64>, design: Design, p: f64, id: EstimatorId) -> Option<&ResultRow> {
        self.rows.iter().find(|r| {
            r.rho == rho && r.m == design.cycles() && r.k == design.set_size() && r.p == p && r.estimator == id
        })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(RESULTS_HEADER)?;
        for r in &self.rows {
            let rho = r.rho.map_or_else(|| "NA".to_string(), |v| v.to_string());
            w.write_record([
                r.distribution.clone(),
                rho,
                r.m.to_string(),
                r.k.to_string(),
                r.p.to_string(),
                r.estimator.to_string(),
                r.bias.to_string(),
                r.mse.to_string(),
                r.re.to_string(),
                r.mc_se.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(input);
        let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
        if header != RESULTS_HEADER {
            return Err(Error::Malformed(format!("unexpected results header `{}`", header.join(","))));
        }
        let mut rows = Vec::new();
        for (line, rec) in reader.records().enumerate() {
            let rec = rec?;
            let bad = |col: &str| Error::Malformed(format!("bad `{col}` on data row {}", line + 1));
            let num = |i: usize, col: &str| rec[i].trim().parse::<f64>().map_err(|_| bad(col));
            let int = |i: usize, col: &str| rec[i].trim().parse::<usize>().map_err(|_| bad(col));
            let rho = match rec[1].trim() {
                "NA" => None,
                _ => Some(num(1, "rho")?),
            };
            rows.push(ResultRow {
                distribution: rec[0].to_string(),
                rho,
                m: int(2, "m")?,
                k: int(3, "k")?,
                p: num(4, "p")?,
                estimator: rec[5].trim().parse()?,
                bias: num(6, "bias")?,
                mse: num(7, "mse")?,
                re: num(8, "re")?,
                mc_se: num(9, "mc_se")?,
            });
        }
        Ok(Self { rows, clamped: Vec::new() })
    }
}

/// Running moments of the error `e` and of `e^2`, merged with Chan's update.
#[derive(Clone, Copy, Debug, Default)]
struct Moments {
    count: f64,
    sum_err: f64,
    mean_sq: f64,
    m2_sq: f64,
}

impl Moments {
    fn push(&mut self, e: f64) {
        let s = e * e;
        self.count += 1.0;
        self.sum_err += e;
        let delta = s - self.mean_sq;
        self.mean_sq += delta / self.count;
        self.m2_sq += delta * (s - self.mean_sq);
    }

    fn merge(&mut self, o: &Moments) {
        if o.count == 0.0 {
            return;
        }
        let count = self.count + o.count;
        let delta = o.mean_sq - self.mean_sq;
        self.mean_sq += delta * o.count / count;
        self.m2_sq += o.m2_sq + delta * delta * self.count * o.count / count;
        self.sum_err += o.sum_err;
        self.count = count;
    }

    fn mc_se(&self) -> f64 {
        if self.count < 2.0 {
            return 0.0;
        }
        (self.m2_sq / (self.count - 1.0)).sqrt() / self.count.sqrt()
    }
}

/// `Y_(r_p)` of the whole population, the truth for finite-population runs.
pub fn population_truth(pop: &FinitePopulation, p: f64) -> Result<f64> {
    emp_quantile_srs(&OrderedSample::from_unsorted(pop.response().to_vec())?, p)
}

fn truth(source: &Source, p: f64) -> Result<f64> {
    match source {
        Source::Model(d) => d.quantile(p),
        Source::Population { population, .. } => population_truth(population, p),
    }
}

fn draw_pair(source: &Source, design: Design, model: RankingModel, seed: SeedSpec) -> Result<(OrderedSample, OrderedSample)> {
    let (srs, rss) = match source {
        Source::Model(d) => (srs_sample(d, design.n(), seed), rss_sample(d, design, model, seed)),
        Source::Population { population, .. } => (
            srs_from_population(population, design.n(), seed)?,
            rss_from_population(population, design, seed)?,
        ),
    };
    Ok((OrderedSample::from_unsorted(srs)?, OrderedSample::pooled(&rss)))
}

fn build_plans(cfg: &ExperimentConfig) -> Result<Vec<EstimatorPlan>> {
    let need_orss = cfg.estimators.iter().any(EstimatorId::is_orss);
    let cache = cfg.weight_cache.as_ref().map(WeightCache::new);
    let cells: Vec<(Design, f64)> =
        cfg.designs.iter().flat_map(|&d| cfg.p_grid.iter().map(move |&p| (d, p))).collect();
    cells
        .par_iter()
        .map(|&(design, p)| {
            let plan = EstimatorPlan::new(design, p)?;
            if !need_orss {
                return Ok(plan);
            }
            let table = |kind| match &cache {
                Some(c) => c.get_or_build(design, p, kind),
                None => orss_weights(design, p, kind),
            };
            plan.with_orss(table(OrssKind::Lf)?, table(OrssKind::Hd)?)
        })
        .collect()
}

/// Runs the full factor grid of `cfg`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    // The baseline is always evaluated, whether or not it is reported.
    let mut evaluated = cfg.estimators.clone();
    if !evaluated.contains(&EstimatorId::SrsEmp) {
        evaluated.push(EstimatorId::SrsEmp);
    }
    evaluated.sort();
    evaluated.dedup();
    let base = evaluated.iter().position(|&e| e == EstimatorId::SrsEmp).expect("baseline present");

    let plans = build_plans(cfg)?;
    let truths = cfg.p_grid.iter().map(|&p| truth(&cfg.source, p)).collect::<Result<Vec<_>>>()?;
    let blocks = cfg.ranking_blocks();
    let (n_p, n_e) = (cfg.p_grid.len(), evaluated.len());
    let cells = blocks.len() * cfg.designs.len() * n_p * n_e;
    let slot = |bi: usize, di: usize, pi: usize, ei: usize| ((bi * cfg.designs.len() + di) * n_p + pi) * n_e + ei;

    let b_total = cfg.replicates as u64;
    let n_blocks = b_total.div_ceil(BLOCK);
    let partials = (0..n_blocks)
        .into_par_iter()
        .map(|blk| -> Result<Vec<Moments>> {
            let mut acc = vec![Moments::default(); cells];
            for b in blk * BLOCK..((blk + 1) * BLOCK).min(b_total) {
                let seed = SeedSpec::new(cfg.master_seed, b);
                for (bi, &(_, model)) in blocks.iter().enumerate() {
                    for (di, &design) in cfg.designs.iter().enumerate() {
                        let (srs, pooled) = draw_pair(&cfg.source, design, model, seed)?;
                        for pi in 0..n_p {
                            let plan = &plans[di * n_p + pi];
                            for (ei, &id) in evaluated.iter().enumerate() {
                                let est = plan.estimate(id, &srs, &pooled)?;
                                acc[slot(bi, di, pi, ei)].push(est - truths[pi]);
                            }
                        }
                    }
                }
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = vec![Moments::default(); cells];
    for part in &partials {
        for (t, p) in total.iter_mut().zip(part) {
            t.merge(p);
        }
    }

    let label = cfg.source.label();
    let mut result = ExperimentResult::default();
    for (bi, &(rho, _)) in blocks.iter().enumerate() {
        for (di, &design) in cfg.designs.iter().enumerate() {
            for (pi, &p) in cfg.p_grid.iter().enumerate() {
                let baseline = total[slot(bi, di, pi, base)].mean_sq;
                for (ei, &id) in evaluated.iter().enumerate() {
                    if !cfg.estimators.contains(&id) {
                        continue;
                    }
                    let mo = &total[slot(bi, di, pi, ei)];
                    result.rows.push(ResultRow {
                        distribution: label.clone(),
                        rho,
                        m: design.cycles(),
                        k: design.set_size(),
                        p,
                        estimator: id,
                        bias: mo.sum_err / mo.count,
                        mse: mo.mean_sq,
                        re: if id == EstimatorId::SrsEmp { 1.0 } else { baseline / mo.mean_sq },
                        mc_se: mo.mc_se(),
                    });
                }
            }
        }
    }
    for plan in &plans {
        if plan.clamped() {
            result.clamped.push((plan.design, plan.p()));
        }
    }
    Ok(result)
}

/// The `B` values of one estimator on perfectly ranked RSS/SRS samples,
/// in replicate order.
pub fn estimator_draws(
    dist: &Distribution,
    design: Design,
    model: RankingModel,
    p: f64,
    id: EstimatorId,
    replicates: usize,
    master_seed: u64,
) -> Result<Vec<f64>> {
    let mut plan = EstimatorPlan::new(design, p)?;
    if id.is_orss() {
        plan = plan.with_orss(orss_weights(design, p, OrssKind::Lf)?, orss_weights(design, p, OrssKind::Hd)?)?;
    }
    let source = Source::Model(dist.clone());
    (0..replicates as u64)
        .into_par_iter()
        .map(|b| {
            let (srs, pooled) = draw_pair(&source, design, model, SeedSpec::new(master_seed, b))?;
            plan.estimate(id, &srs, &pooled)
        })
        .collect()
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Dimension { expected: x.len(), got: y.len() });
    }
    if x.len() < 2 {
        return Err(Error::Domain(format!("need at least two pairs, got {}", x.len())));
    }
    Ok(())
}

/// Ranks starting at 1, ties sharing their average rank.
fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &t in &idx[i..=j] {
            ranks[t] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    Ok(pearson(&average_ranks(x), &average_ranks(y)).clamp(-1.0, 1.0))
}

/// Number of tied pairs among runs of equal values in a sorted sequence.
fn tied_pairs<T: PartialEq>(sorted: impl Iterator<Item = T>) -> u64 {
    let mut total = 0u64;
    let mut run = 0u64;
    let mut prev: Option<T> = None;
    for v in sorted {
        if prev.as_ref() == Some(&v) {
            run += 1;
        } else {
            total += run * (run + 1) / 2;
            run = 0;
        }
        prev = Some(v);
    }
    total + run * (run + 1) / 2
}

/// Sorts `v` by its second coordinate, returning the number of swaps
/// (pairs out of order) a stable merge sort performs.
fn merge_count(v: &mut [(f64, f64)], buf: &mut Vec<(f64, f64)>) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_count(&mut v[..mid], buf) + merge_count(&mut v[mid..], buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j].1 < v[i].1 {
            swaps += (mid - i) as u64;
            buf.push(v[j]);
            j += 1;
        } else {
            buf.push(v[i]);
            i += 1;
        }
    }
    buf.extend_from_slice(&v[i..mid]);
    buf.extend_from_slice(&v[j..n]);
    v.copy_from_slice(buf);
    swaps
}

/// Kendall tau-b in `O(n log n)` (Knight's algorithm).
pub fn kendall(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let n = x.len() as u64;
    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let n0 = n * (n - 1) / 2;
    let n1 = tied_pairs(pairs.iter().map(|p| p.0));
    let n3 = tied_pairs(pairs.iter().copied());
    let mut buf = Vec::with_capacity(pairs.len());
    let swaps = merge_count(&mut pairs, &mut buf);
    let n2 = tied_pairs(pairs.iter().map(|p| p.1));
    let denom = ((n0 - n1) as f64 * (n0 - n2) as f64).sqrt();
    if denom == 0.0 {
        return Err(Error::Domain("kendall tau undefined for a constant vector".into()));
    }
    let concordant_minus_discordant = n0 as f64 - n1 as f64 - n2 as f64 + n3 as f64 - 2.0 * swaps as f64;
    Ok((concordant_minus_discordant / denom).clamp(-1.0, 1.0))
}

impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let designs: Vec<String> = self.designs.iter().map(Design::to_string).collect();
        let ids: Vec<&str> = self.estimators.iter().map(EstimatorId::as_str).collect();
        write!(
            f,
            "source={} designs={} B={} seed={} estimators={}",
            self.source.label(),
            designs.join(" "),
            self.replicates,
            self.master_seed,
            ids.join(",")
        )
    }
}
