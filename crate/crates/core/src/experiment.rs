//! Recovery and classification experiments.
//!
//! One trial draws a dictionary and a batch of block-sparse signals, designs
//! a sensing matrix with every requested method, measures `Y = A·X`, decodes
//! with BOMP and scores the result by the normalized representation error
//! `e = ‖X − D·Θ̂‖_F / ‖X‖_F` and the classification rate `r` (fraction of
//! truly nonzero coefficients that are also nonzero in `Θ̂`).
//!
//! Trials run on a rayon pool. Each trial owns a ChaCha stream derived from
//! `(seed, trial)`, so results do not depend on scheduling.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::block_model::{equivalent_dictionary, gram, BlockStructure, Dict, SensingMatrix};
use crate::bomp::{bomp_decode_columns, BompConfig};
use crate::coherence::{objective, total_inter, total_sub, Alpha};
use crate::ds::design_ds;
use crate::error::{Error, Result};
use crate::io::{csv_table, format_g17};
use crate::wcm::{run_wcm, Init, WcmConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DictFamily {
    /// I.i.d. standard normal entries.
    Gaussian,
    /// Random rows of the orthonormal K×K DCT-II matrix.
    DctRows,
}

/// Block sizes as either one size repeated over all `K` columns or an explicit list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BlockSpec {
    Fixed(usize),
    Explicit(Vec<usize>),
}

impl BlockSpec {
    pub fn structure(&self, total: usize) -> Result<BlockStructure> {
        let bs = match self {
            BlockSpec::Fixed(s) => BlockStructure::with_block_size(total, *s)?,
            BlockSpec::Explicit(sizes) => BlockStructure::new(sizes.clone())?,
        };
        if bs.total() != total {
            return Err(Error::BlockStructure(format!(
                "block sizes cover {} columns, expected {total}",
                bs.total()
            )));
        }
        Ok(bs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Designer {
    /// I.i.d. standard normal sensing matrix.
    Random,
    /// Closed-form `‖E'E − I‖²` minimizer.
    Ds,
    /// Weighted coherence minimization, one run per grid value of α.
    Wcm,
}

impl Designer {
    pub fn label(self) -> &'static str {
        match self {
            Designer::Random => "random",
            Designer::Ds => "ds",
            Designer::Wcm => "wcm",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "defaults::family")]
    pub dict_family: DictFamily,
    #[serde(rename = "N", default = "defaults::n")]
    pub signal_dim: usize,
    #[serde(rename = "K", default = "defaults::k_atoms")]
    pub atoms: usize,
    #[serde(rename = "M", default = "defaults::m")]
    pub measurements: usize,
    #[serde(default = "defaults::blocks")]
    pub block_sizes: BlockSpec,
    #[serde(rename = "k", default = "defaults::k_active")]
    pub active_blocks: usize,
    #[serde(rename = "L", default = "defaults::signals")]
    pub signals: usize,
    #[serde(default = "defaults::trials")]
    pub trials: usize,
    #[serde(default = "defaults::alpha_grid")]
    pub alpha_grid: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "defaults::designers")]
    pub designers: Vec<Designer>,
    #[serde(default = "defaults::max_iters")]
    pub max_iters: usize,
    #[serde(default = "defaults::rel_tol")]
    pub rel_tol: f64,
}

mod defaults {
    use super::*;

    pub fn family() -> DictFamily {
        DictFamily::Gaussian
    }
    pub fn n() -> usize {
        60
    }
    pub fn k_atoms() -> usize {
        120
    }
    pub fn m() -> usize {
        14
    }
    pub fn blocks() -> BlockSpec {
        BlockSpec::Fixed(3)
    }
    pub fn k_active() -> usize {
        2
    }
    pub fn signals() -> usize {
        1000
    }
    pub fn trials() -> usize {
        100
    }
    pub fn alpha_grid() -> Vec<f64> {
        vec![0.01, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.99]
    }
    pub fn designers() -> Vec<Designer> {
        vec![Designer::Random, Designer::Ds, Designer::Wcm]
    }
    pub fn max_iters() -> usize {
        WcmConfig::DEFAULT_MAX_ITERS
    }
    pub fn rel_tol() -> f64 {
        WcmConfig::DEFAULT_REL_TOL
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dict_family: defaults::family(),
            signal_dim: defaults::n(),
            atoms: defaults::k_atoms(),
            measurements: defaults::m(),
            block_sizes: defaults::blocks(),
            active_blocks: defaults::k_active(),
            signals: defaults::signals(),
            trials: defaults::trials(),
            alpha_grid: defaults::alpha_grid(),
            seed: 0,
            designers: defaults::designers(),
            max_iters: defaults::max_iters(),
            rel_tol: defaults::rel_tol(),
        }
    }
}

impl ExperimentConfig {
    /// Reduced signal and trial counts for a quick run.
    pub fn desk(mut self) -> Self {
        self.signals = 200;
        self.trials = 20;
        self
    }

    pub fn structure(&self) -> Result<BlockStructure> {
        self.block_sizes.structure(self.atoms)
    }

    pub fn validate(&self) -> Result<()> {
        let bs = self.structure()?;
        if !(self.measurements >= 1
            && self.measurements < self.signal_dim
            && self.signal_dim <= self.atoms)
        {
            return Err(Error::InvalidArgument(format!(
                "need 1 <= M < N <= K, got M={}, N={}, K={}",
                self.measurements, self.signal_dim, self.atoms
            )));
        }
        if self.active_blocks == 0 || self.active_blocks > bs.num_blocks() {
            return Err(Error::InvalidArgument(format!(
                "k must lie in 1..={}, got {}",
                bs.num_blocks(),
                self.active_blocks
            )));
        }
        if self.signals == 0 || self.trials == 0 {
            return Err(Error::InvalidArgument(
                "L and trials must be positive".into(),
            ));
        }
        if self.designers.is_empty() {
            return Err(Error::InvalidArgument("no designers selected".into()));
        }
        if self.designers.contains(&Designer::Wcm) {
            if self.alpha_grid.is_empty() {
                return Err(Error::InvalidArgument("empty alpha grid".into()));
            }
            for &a in &self.alpha_grid {
                Alpha::new(a)?;
            }
        }
        Ok(())
    }

    fn wcm_config(&self, alpha: Alpha) -> WcmConfig {
        WcmConfig::new(alpha)
            .with_init(Init::Ds)
            .with_max_iters(self.max_iters)
            .with_rel_tol(self.rel_tol)
    }
}

/// Orthonormal DCT-II matrix; row `f` holds frequency `f`.
pub fn dct_matrix(size: usize) -> DMatrix<f64> {
    let n = size as f64;
    DMatrix::from_fn(size, size, |f, t| {
        let scale = if f == 0 {
            (1.0 / n).sqrt()
        } else {
            (2.0 / n).sqrt()
        };
        scale * (PI * (2.0 * t as f64 + 1.0) * f as f64 / (2.0 * n)).cos()
    })
}

fn normalize_columns(m: &mut DMatrix<f64>) {
    for mut c in m.column_iter_mut() {
        let n = c.norm();
        if n > 0.0 {
            c /= n;
        }
    }
}

/// Random unit-column dictionary from the configured family.
pub fn gen_dictionary<R: Rng + ?Sized>(cfg: &ExperimentConfig, rng: &mut R) -> Result<Dict> {
    let bs = cfg.structure()?;
    let (n, k) = (cfg.signal_dim, cfg.atoms);
    let mut m = match cfg.dict_family {
        DictFamily::Gaussian => DMatrix::from_fn(n, k, |_, _| StandardNormal.sample(rng)),
        DictFamily::DctRows => {
            let full = dct_matrix(k);
            let rows = sample(rng, k, n).into_vec();
            full.select_rows(&rows)
        }
    };
    normalize_columns(&mut m);
    Dict::new(m, bs)
}

/// `k`-block-sparse coefficients `Θ` (K×L) and signals `X = D·Θ` (N×L).
///
/// Active blocks are drawn uniformly without replacement per signal and
/// their coefficients are i.i.d. uniform on [−1, 1].
pub fn gen_signals<R: Rng + ?Sized>(
    dict: &Dict,
    k: usize,
    signals: usize,
    rng: &mut R,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let bs = dict.structure();
    if k == 0 || k > bs.num_blocks() {
        return Err(Error::InvalidArgument(format!(
            "k must lie in 1..={}, got {k}",
            bs.num_blocks()
        )));
    }
    let mut theta = DMatrix::zeros(bs.total(), signals);
    for l in 0..signals {
        for j in sample(rng, bs.num_blocks(), k) {
            for c in bs.range(j) {
                let mut v = 0.0;
                // Exact zeros would shrink the support; redraw them.
                while v == 0.0 {
                    v = rng.random_range(-1.0..=1.0);
                }
                theta[(c, l)] = v;
            }
        }
    }
    let x = dict.matrix() * &theta;
    Ok((x, theta))
}

/// Fraction of truly nonzero entries of `theta` that are also nonzero in `theta_hat`.
///
/// With fixed block size `s` the denominator is `L·k·s`.
pub fn classification_rate(theta_hat: &DMatrix<f64>, theta: &DMatrix<f64>) -> Result<f64> {
    if theta_hat.shape() != theta.shape() {
        return Err(Error::Dimension(format!(
            "estimate is {:?} but truth is {:?}",
            theta_hat.shape(),
            theta.shape()
        )));
    }
    let truth = theta.iter().filter(|&&v| v != 0.0).count();
    if truth == 0 {
        return Err(Error::InvalidArgument(
            "reference has no nonzero entries".into(),
        ));
    }
    let hits = theta_hat
        .iter()
        .zip(theta.iter())
        .filter(|(&a, &b)| a != 0.0 && b != 0.0)
        .count();
    Ok(hits as f64 / truth as f64)
}

/// `‖X − D·Θ̂‖_F / ‖X‖_F`.
pub fn representation_error(
    x: &DMatrix<f64>,
    dict: &Dict,
    theta_hat: &DMatrix<f64>,
) -> Result<f64> {
    if theta_hat.nrows() != dict.cols()
        || x.nrows() != dict.rows()
        || x.ncols() != theta_hat.ncols()
    {
        return Err(Error::Dimension(format!(
            "X is {:?}, D is {}x{}, estimate is {:?}",
            x.shape(),
            dict.rows(),
            dict.cols(),
            theta_hat.shape()
        )));
    }
    let denom = x.norm();
    if denom == 0.0 {
        return Err(Error::InvalidArgument("signals have zero norm".into()));
    }
    Ok((x - dict.matrix() * theta_hat).norm() / denom)
}

/// One `(trial, designer, α)` measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub designer: Designer,
    /// Only set for WCM rows.
    pub alpha: Option<f64>,
    pub e: f64,
    pub r: f64,
    /// ν^t / μ_B^t of the designed equivalent dictionary.
    pub ratio_nu_mu: f64,
    /// `f_α(G)` for WCM rows; `½‖G − I‖²_F` (the α = ½ value) otherwise.
    pub objective: f64,
}

/// Mean and sample standard deviation over trials for one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub designer: Designer,
    pub alpha: Option<f64>,
    pub n: usize,
    pub e_mean: f64,
    pub e_std: f64,
    pub r_mean: f64,
    pub r_std: f64,
    pub ratio_mean: f64,
    pub ratio_std: f64,
    pub objective_mean: f64,
    pub objective_std: f64,
}

impl SummaryRow {
    pub fn e_sem(&self) -> f64 {
        self.e_std / (self.n as f64).sqrt()
    }

    pub fn r_sem(&self) -> f64 {
        self.r_std / (self.n as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResults {
    pub rows: Vec<TrialResult>,
    pub summary: Vec<SummaryRow>,
}

impl SweepResults {
    pub fn summary_for(&self, designer: Designer, alpha: Option<f64>) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|s| s.designer == designer && s.alpha == alpha)
    }

    pub fn results_csv(&self) -> String {
        csv_table(
            "trial,designer,alpha,e,r,ratio_nu_mu,objective",
            self.rows.iter().map(|t| {
                vec![
                    t.trial.to_string(),
                    t.designer.label().to_string(),
                    t.alpha.map(format_g17).unwrap_or_default(),
                    format_g17(t.e),
                    format_g17(t.r),
                    format_g17(t.ratio_nu_mu),
                    format_g17(t.objective),
                ]
            }),
        )
    }

    pub fn summary_csv(&self) -> String {
        csv_table(
            "designer,alpha,n,e_mean,e_std,r_mean,r_std,ratio_mean,ratio_std,objective_mean,objective_std",
            self.summary.iter().map(|s| {
                vec![
                    s.designer.label().to_string(),
                    s.alpha.map(format_g17).unwrap_or_default(),
                    s.n.to_string(),
                    format_g17(s.e_mean),
                    format_g17(s.e_std),
                    format_g17(s.r_mean),
                    format_g17(s.r_std),
                    format_g17(s.ratio_mean),
                    format_g17(s.ratio_std),
                    format_g17(s.objective_mean),
                    format_g17(s.objective_std),
                ]
            }),
        )
    }

    /// Writes `results.csv`, `summary.csv` and `config.echo.json` into `dir`.
    pub fn write_dir(&self, dir: impl AsRef<Path>, cfg: &ExperimentConfig) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        fs::write(dir.join("results.csv"), self.results_csv())?;
        fs::write(dir.join("summary.csv"), self.summary_csv())?;
        fs::write(
            dir.join("config.echo.json"),
            serde_json::to_string_pretty(cfg)?,
        )?;
        Ok(())
    }
}

/// Generator for trial `trial`: the seed picks the key, the trial the stream.
pub fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

fn evaluate(
    trial: usize,
    designer: Designer,
    alpha: Option<f64>,
    objective_value: f64,
    a: &SensingMatrix,
    dict: &Dict,
    x: &DMatrix<f64>,
    theta: &DMatrix<f64>,
    bomp: &BompConfig,
) -> Result<TrialResult> {
    let e = equivalent_dictionary(a.matrix(), dict)?;
    let g = gram(&e);
    let y = a.matrix() * x;
    let theta_hat = bomp_decode_columns(&e, &y, bomp)?;
    Ok(TrialResult {
        trial,
        designer,
        alpha,
        e: representation_error(x, dict, &theta_hat)?,
        r: classification_rate(&theta_hat, theta)?,
        ratio_nu_mu: total_sub(&g) / total_inter(&g),
        objective: objective_value,
    })
}

/// Runs trial `trial` of `cfg` for every designer (and every α for WCM).
pub fn run_trial(cfg: &ExperimentConfig, trial: usize) -> Result<Vec<TrialResult>> {
    let mut rng = trial_rng(cfg.seed, trial);
    let dict = gen_dictionary(cfg, &mut rng)?;
    let (x, theta) = gen_signals(&dict, cfg.active_blocks, cfg.signals, &mut rng)?;
    let bomp = BompConfig::new(cfg.active_blocks);
    let half = Alpha::new(0.5)?;
    let mut out = Vec::new();
    let mut designers = cfg.designers.clone();
    designers.sort();
    designers.dedup();
    for designer in designers {
        match designer {
            Designer::Random => {
                let a = SensingMatrix::new(DMatrix::from_fn(
                    cfg.measurements,
                    cfg.signal_dim,
                    |_, _| StandardNormal.sample(&mut rng),
                ))?;
                let f = objective(&a.gram(&dict)?, half);
                out.push(evaluate(
                    trial, designer, None, f, &a, &dict, &x, &theta, &bomp,
                )?);
            }
            Designer::Ds => {
                let a = design_ds(&dict, cfg.measurements)?;
                let f = objective(&a.gram(&dict)?, half);
                out.push(evaluate(
                    trial, designer, None, f, &a, &dict, &x, &theta, &bomp,
                )?);
            }
            Designer::Wcm => {
                for &alpha in &cfg.alpha_grid {
                    let report =
                        run_wcm(&dict, cfg.measurements, &cfg.wcm_config(Alpha::new(alpha)?))?;
                    out.push(evaluate(
                        trial,
                        designer,
                        Some(alpha),
                        report.final_objective(),
                        &report.sensing,
                        &dict,
                        &x,
                        &theta,
                        &bomp,
                    )?);
                }
            }
        }
    }
    Ok(out)
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Groups rows by `(designer, α)` in order of first appearance.
pub fn summarize(rows: &[TrialResult]) -> Vec<SummaryRow> {
    let mut keys: Vec<(Designer, Option<f64>)> = Vec::new();
    for r in rows {
        if !keys.contains(&(r.designer, r.alpha)) {
            keys.push((r.designer, r.alpha));
        }
    }
    keys.into_iter()
        .map(|(designer, alpha)| {
            let group: Vec<&TrialResult> = rows
                .iter()
                .filter(|r| r.designer == designer && r.alpha == alpha)
                .collect();
            let col = |f: fn(&TrialResult) -> f64| {
                mean_std(&group.iter().map(|r| f(r)).collect::<Vec<_>>())
            };
            let (e_mean, e_std) = col(|r| r.e);
            let (r_mean, r_std) = col(|r| r.r);
            let (ratio_mean, ratio_std) = col(|r| r.ratio_nu_mu);
            let (objective_mean, objective_std) = col(|r| r.objective);
            SummaryRow {
                designer,
                alpha,
                n: group.len(),
                e_mean,
                e_std,
                r_mean,
                r_std,
                ratio_mean,
                ratio_std,
                objective_mean,
                objective_std,
            }
        })
        .collect()
}

/// Runs every trial of `cfg` in parallel and aggregates per grid point.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepResults> {
    cfg.validate()?;
    let per_trial: Vec<Vec<TrialResult>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(cfg, t))
        .collect::<Result<_>>()?;
    let rows: Vec<TrialResult> = per_trial.into_iter().flatten().collect();
    let summary = summarize(&rows);
    Ok(SweepResults { rows, summary })
}

/// Final objective values of `replicates` WCM runs from random starts.
///
/// Replicate seeds are drawn from `rng` up front, then the runs execute in
/// parallel; `base.init` is ignored.
pub fn run_histogram<R: RngCore + ?Sized>(
    dict: &Dict,
    m: usize,
    base: &WcmConfig,
    replicates: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let seeds: Vec<u64> = (0..replicates).map(|_| rng.next_u64()).collect();
    seeds
        .into_par_iter()
        .map(|seed| {
            let cfg = base.with_init(Init::Random { seed });
            run_wcm(dict, m, &cfg).map(|r| r.final_objective())
        })
        .collect()
}
