//! Weighted coherence minimization.
//!
//! Minimizes `f(G) = ½η + (1−α)μ_B^t + αν^t` over sensing matrices by bound
//! optimization. At iterate `G⁽ⁿ⁾` the surrogate
//!
//! ```text
//! g(G, G⁽ⁿ⁾) = ½‖G − h_η(G⁽ⁿ⁾)‖² + (1−α)‖G − h_μ(G⁽ⁿ⁾)‖² + α‖G − h_ν(G⁽ⁿ⁾)‖²
//! ```
//!
//! upper-bounds `f`, touches it at `G⁽ⁿ⁾` with the same gradient, and is
//! minimized in closed form: up to a constant it equals
//! `(3/2)‖Γ'Γ − P·h_t(G⁽ⁿ⁾)·P'‖²` with `P = Λ^{-1/2}U'D` and `Γ = AUΛ^{1/2}`,
//! so the best rank-`M` `Γ'Γ` comes from the top `M` eigenpairs of
//! `P·h_t·P'`. Each accepted step therefore never increases `f`.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::block_model::{sym_eig, Dict, GramParts, SensingMatrix};
use crate::coherence::{
    entry_class, norm_penalty, objective, total_inter, total_sub, Alpha, CoherenceReport,
    EntryClass,
};
use crate::ds::{check_measurements, design_ds_with, Whitener};
use crate::error::{Error, Result};
use crate::io::{csv_table, format_g17};

/// Starting point of the iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// The closed-form `‖E'E − I‖²` minimizer.
    Ds,
    /// I.i.d. standard normal entries.
    Random { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WcmConfig {
    pub alpha: Alpha,
    pub max_iters: usize,
    /// Stop once `|f⁽ⁿ⁾ − f⁽ⁿ⁺¹⁾| ≤ rel_tol·(1 + f⁽ⁿ⁾)`.
    pub rel_tol: f64,
    pub init: Init,
}

impl WcmConfig {
    pub const DEFAULT_MAX_ITERS: usize = 1000;
    pub const DEFAULT_REL_TOL: f64 = 1e-8;

    pub fn new(alpha: Alpha) -> Self {
        Self {
            alpha,
            max_iters: Self::DEFAULT_MAX_ITERS,
            rel_tol: Self::DEFAULT_REL_TOL,
            init: Init::Ds,
        }
    }

    pub fn with_init(mut self, init: Init) -> Self {
        self.init = init;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be positive".into()));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "rel_tol must be positive, got {}",
                self.rel_tol
            )));
        }
        Ok(())
    }
}

/// Objective terms of one iterate; iteration 0 is the initialization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub f: f64,
    pub total_inter: f64,
    pub total_sub: f64,
    pub norm_penalty: f64,
}

impl IterationRecord {
    fn of(iter: usize, g: &GramParts, alpha: Alpha) -> Self {
        Self {
            iter,
            f: objective(g, alpha),
            total_inter: total_inter(g),
            total_sub: total_sub(g),
            norm_penalty: norm_penalty(g),
        }
    }
}

#[derive(Debug, Clone)]
pub struct WcmReport {
    pub sensing: SensingMatrix,
    /// `f(G⁽ⁿ⁾)` for n = 0..=iterations.
    pub objective_trace: Vec<f64>,
    pub history: Vec<IterationRecord>,
    pub iterations: usize,
    pub converged: bool,
    pub final_report: CoherenceReport,
}

impl WcmReport {
    pub fn final_objective(&self) -> f64 {
        *self
            .objective_trace
            .last()
            .expect("trace holds the initial value")
    }

    /// `iter,f,total_inter,total_sub,norm_penalty`, one row per iterate.
    pub fn trace_csv(&self) -> String {
        csv_table(
            "iter,f,total_inter,total_sub,norm_penalty",
            self.history.iter().map(|r| {
                vec![
                    r.iter.to_string(),
                    format_g17(r.f),
                    format_g17(r.total_inter),
                    format_g17(r.total_sub),
                    format_g17(r.norm_penalty),
                ]
            }),
        )
    }
}

/// `(2/3)(½h_η(G) + (1−α)h_μ(G) + αh_ν(G))`, evaluated entrywise.
pub fn h_t(g: &GramParts, alpha: Alpha) -> DMatrix<f64> {
    let a = alpha.get();
    let bs = g.structure();
    let m = g.gram();
    let diag = |v: f64| (0.5 + v) * (2.0 / 3.0);
    let cross = (0.5 + a) * (2.0 / 3.0);
    let within = (1.5 - a) * (2.0 / 3.0);
    DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| {
        let v = m[(r, c)];
        match entry_class(bs, r, c) {
            EntryClass::Diagonal => diag(v),
            EntryClass::CrossBlock => cross * v,
            EntryClass::WithinBlock => within * v,
        }
    })
}

/// Surrogate `g(G, G_prev)`.
pub fn surrogate_g(g: &GramParts, g_prev: &GramParts, alpha: Alpha) -> Result<f64> {
    g.ensure_same_layout(g_prev)?;
    let a = alpha.get();
    let bs = g.structure();
    let (cur, prev) = (g.gram(), g_prev.gram());
    let k = cur.nrows();
    let mut total = 0.0;
    for c in 0..k {
        for r in 0..k {
            let x = cur[(r, c)];
            let d = x - prev[(r, c)];
            // (target of h_η, target of h_μ, target of h_ν) residuals
            let (re, rm, rn) = match entry_class(bs, r, c) {
                EntryClass::Diagonal => (x - 1.0, d, d),
                EntryClass::CrossBlock => (d, x, d),
                EntryClass::WithinBlock => (d, d, x),
            };
            total += 0.5 * re * re + (1.0 - a) * rm * rm + a * rn * rn;
        }
    }
    Ok(total)
}

/// `∇f(G) = 2[½u_η(G) + (1−α)u_μ(G) + αu_ν(G)]`.
pub fn objective_gradient(g: &GramParts, alpha: Alpha) -> DMatrix<f64> {
    let a = alpha.get();
    let bs = g.structure();
    let m = g.gram();
    DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| {
        let v = m[(r, c)];
        match entry_class(bs, r, c) {
            EntryClass::Diagonal => v - 1.0,
            EntryClass::CrossBlock => 2.0 * (1.0 - a) * v,
            EntryClass::WithinBlock => 2.0 * a * v,
        }
    })
}

/// `∇_G g(G, G_prev)`.
pub fn surrogate_gradient(g: &GramParts, g_prev: &GramParts, alpha: Alpha) -> Result<DMatrix<f64>> {
    g.ensure_same_layout(g_prev)?;
    let h = h_t(g_prev, alpha);
    Ok((g.gram() - h) * 3.0)
}

/// One closed-form surrogate minimization from `a_prev`.
pub fn wcm_step(a_prev: &SensingMatrix, dict: &Dict, alpha: Alpha) -> Result<SensingMatrix> {
    if a_prev.cols() != dict.rows() {
        return Err(Error::Dimension(format!(
            "sensing matrix has {} columns but dictionary has {} rows",
            a_prev.cols(),
            dict.rows()
        )));
    }
    let w = Whitener::new(dict)?;
    step_with(&w, &a_prev.gram(dict)?, a_prev.rows(), alpha)
}

fn step_with(w: &Whitener, g_prev: &GramParts, m: usize, alpha: Alpha) -> Result<SensingMatrix> {
    let p = w.whitened();
    let target = p * h_t(g_prev, alpha) * p.transpose();
    let eig = sym_eig(&target)?;
    let n = target.nrows();
    let mut gamma = DMatrix::zeros(m, n);
    for i in 0..m {
        // Γ'Γ is PSD, so negative directions of the target are left out.
        let scale = eig.values[i].max(0.0).sqrt();
        gamma.set_row(i, &(eig.vectors.column(i).transpose() * scale));
    }
    w.sensing_from(&gamma)
}

fn random_sensing(m: usize, n: usize, seed: u64) -> Result<SensingMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SensingMatrix::new(DMatrix::from_fn(m, n, |_, _| {
        StandardNormal.sample(&mut rng)
    }))
}

/// Iterates [`wcm_step`] from `cfg.init` until the relative objective change
/// drops below `cfg.rel_tol` or `cfg.max_iters` steps have been taken.
pub fn run_wcm(dict: &Dict, m: usize, cfg: &WcmConfig) -> Result<WcmReport> {
    cfg.validate()?;
    check_measurements(dict, m)?;
    let w = Whitener::new(dict)?;
    let mut a = match cfg.init {
        Init::Ds => design_ds_with(&w, m)?,
        Init::Random { seed } => random_sensing(m, dict.rows(), seed)?,
    };
    let mut g = a.gram(dict)?;
    let mut history = vec![IterationRecord::of(0, &g, cfg.alpha)];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        let f_prev = history[history.len() - 1].f;
        let next = step_with(&w, &g, m, cfg.alpha)?;
        let g_next = next.gram(dict)?;
        iterations += 1;
        let rec = IterationRecord::of(iterations, &g_next, cfg.alpha);
        history.push(rec);
        a = next;
        g = g_next;
        if (f_prev - rec.f).abs() <= cfg.rel_tol * (1.0 + f_prev) {
            converged = true;
            break;
        }
    }
    let final_report = CoherenceReport::from_gram(&g, Some(cfg.alpha))?;
    Ok(WcmReport {
        sensing: a,
        objective_trace: history.iter().map(|r| r.f).collect(),
        history,
        iterations,
        converged,
        final_report,
    })
}
