//! Wild Bootstrap calibration: Rademacher-reweighted replicates of the
//! statistic, empirical quantile, p-value and decision.
//!
//! Only the event-masked time matrix changes with the Rademacher signs, so
//! the centered quadratic form (I−A)K(I−A)ᵀ is computed once per dataset and
//! every replicate costs O(e²) for e uncensored observations.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::SurvivalDataset;
use crate::error::{Error, Result};
use crate::kernels::{gram_pair, GramPair, KernelSpec};
use crate::rng::rademacher_sign;
use crate::statistic::{for_each_centered_row, risk_matrix, Kahan, RiskMatrix};

/// Wild Bootstrap configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    /// Number of bootstrap replicates M.
    pub m_replicates: usize,
    /// Significance level in (0, 1).
    pub alpha: f64,
    /// Seed for the deterministic Rademacher stream.
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            m_replicates: 1999,
            alpha: 0.05,
            seed: 0,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Validation(format!(
                "alpha must be in (0,1), got {}",
                self.alpha
            )));
        }
        if self.m_replicates == 0 {
            return Err(Error::Validation("m_replicates must be >= 1".into()));
        }
        Ok(())
    }
}

/// The per-dataset factorization shared by the statistic and all replicates:
/// the matrix `E = L^Δ ∘ (I−A)K(I−A)ᵀ` restricted to uncensored rows and
/// columns. `n(Ψ_n^W)² = (1/n) Σ_ab W_a W_b E_ab`.
#[derive(Debug, Clone)]
pub struct CenteredGram {
    n: usize,
    events: Vec<usize>,
    e_matrix: Array2<f64>,
}

impl CenteredGram {
    pub fn new(ds: &SurvivalDataset, gram: &GramPair, risk: &RiskMatrix) -> Result<CenteredGram> {
        let n = ds.len();
        let events = ds.event_indices();
        let ne = events.len();
        let l = gram
            .l_delta_matrix
            .as_slice()
            .ok_or_else(|| Error::Validation("gram matrix not contiguous".into()))?;
        let mut slot_of = vec![usize::MAX; n];
        for (slot, &i) in events.iter().enumerate() {
            slot_of[i] = slot;
        }
        let mut e_matrix = Array2::<f64>::zeros((ne, ne));
        for_each_centered_row(ds, gram, risk, |i, evs, c_row| {
            let slot = slot_of[i];
            let li = &l[i * n..(i + 1) * n];
            for (b, &j) in evs.iter().enumerate() {
                e_matrix[[slot, b]] = li[j] * c_row[b];
            }
        })?;
        Ok(CenteredGram {
            n,
            events,
            e_matrix,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// The observed statistic nΨ²ₙ. Summation order matches
    /// [`CenteredGram::replicate`] so a unit weight vector reproduces this
    /// value bit-for-bit.
    pub fn statistic(&self) -> f64 {
        let mut outer = Kahan::default();
        for a in 0..self.events.len() {
            let mut row = Kahan::default();
            for b in 0..self.events.len() {
                row.add(self.e_matrix[[a, b]]);
            }
            outer.add(row.total());
        }
        (outer.total() / self.n as f64).max(0.0)
    }

    /// One replicate n(Ψₙ^W)² for a full-length sign vector.
    pub fn replicate(&self, signs: &[f64]) -> Result<f64> {
        if signs.len() != self.n {
            return Err(Error::Validation(format!(
                "weight vector length {} does not match n={}",
                signs.len(),
                self.n
            )));
        }
        let compact: Vec<f64> = self.events.iter().map(|&i| signs[i]).collect();
        Ok(self.replicate_compact(&compact))
    }

    /// Replicate for the deterministic stream entry `(seed, index)`.
    pub fn replicate_keyed(&self, seed: u64, index: u64) -> f64 {
        let compact: Vec<f64> = self
            .events
            .iter()
            .map(|&i| rademacher_sign(seed, index, i as u64))
            .collect();
        self.replicate_compact(&compact)
    }

    fn replicate_compact(&self, signs: &[f64]) -> f64 {
        let mut outer = Kahan::default();
        for (a, &sa) in signs.iter().enumerate() {
            let mut row = Kahan::default();
            for (b, &sb) in signs.iter().enumerate() {
                row.add((sa * sb) * self.e_matrix[[a, b]]);
            }
            outer.add(row.total());
        }
        (outer.total() / self.n as f64).max(0.0)
    }
}

/// One Wild Bootstrap replicate from Gram and risk matrices. Convenience
/// wrapper that rebuilds the centered factorization; batch callers should
/// construct [`CenteredGram`] once and reuse it.
pub fn wild_bootstrap_replicate(
    ds: &SurvivalDataset,
    gram: &GramPair,
    risk: &RiskMatrix,
    weights: &[f64],
) -> Result<f64> {
    if weights.iter().any(|w| *w != 1.0 && *w != -1.0) {
        return Err(Error::Validation(
            "weights must be Rademacher signs (+1 or -1)".into(),
        ));
    }
    CenteredGram::new(ds, gram, risk)?.replicate(weights)
}

/// Deterministic stream of Rademacher n-vectors. Entry `(k, i)` is a pure
/// function of `(seed, k, i)`, so the stream is identical under any parallel
/// schedule.
pub fn rademacher_stream(seed: u64, count: usize, n: usize) -> impl Iterator<Item = Vec<f64>> {
    (0..count as u64).map(move |k| (0..n as u64).map(|i| rademacher_sign(seed, k, i)).collect())
}

/// Outcome of the Wild Bootstrap test.
#[derive(Debug, Clone)]
pub struct TestResult {
    /// Observed nΨ²ₙ.
    pub statistic: f64,
    /// The M bootstrap replicates n(Ψₙ^W)², in stream order.
    pub replicates: Vec<f64>,
    /// Empirical 1-α quantile: the ⌈(1−α)(M+1)⌉-th order statistic.
    pub quantile: f64,
    /// (1 + #{replicates ≥ statistic}) / (M + 1).
    pub p_value: f64,
    /// True iff statistic > quantile (strict).
    pub reject: bool,
    pub config: BootstrapConfig,
    pub kernel: KernelSpec,
    pub n: usize,
    pub dim: usize,
    pub runtime_ms: u64,
}

impl TestResult {
    /// Canonical JSON form. `include_runtime=false` drops the only
    /// non-reproducible field so output files are byte-identical across runs.
    pub fn json_value(&self, include_runtime: bool) -> serde_json::Value {
        let mut map = serde_json::Map::new();
        map.insert("statistic".into(), self.statistic.into());
        map.insert("p_value".into(), self.p_value.into());
        map.insert("quantile".into(), self.quantile.into());
        map.insert("reject".into(), self.reject.into());
        map.insert("alpha".into(), self.config.alpha.into());
        map.insert("m_replicates".into(), self.config.m_replicates.into());
        map.insert("seed".into(), self.config.seed.into());
        map.insert(
            "kernel".into(),
            serde_json::to_value(&self.kernel).expect("kernel spec serializes"),
        );
        map.insert("n".into(), self.n.into());
        map.insert("d".into(), self.dim.into());
        if include_runtime {
            map.insert("runtime_ms".into(), self.runtime_ms.into());
        }
        serde_json::Value::Object(map)
    }
}

/// Empirical 1-α quantile: the ⌈(1−α)(M+1)⌉-th order statistic of the
/// replicates (clamped to the sample range).
fn bootstrap_quantile(replicates: &[f64], alpha: f64) -> f64 {
    let m = replicates.len();
    let rank = ((1.0 - alpha) * (m + 1) as f64).ceil() as usize;
    let rank = rank.clamp(1, m);
    let mut sorted = replicates.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    sorted[rank - 1]
}

/// Run the full Wild Bootstrap test: resolve the kernel once, compute the
/// statistic, draw M Rademacher replicates, and decide.
pub fn run_test(
    ds: &SurvivalDataset,
    spec: &KernelSpec,
    cfg: &BootstrapConfig,
) -> Result<TestResult> {
    cfg.validate()?;
    let start = std::time::Instant::now();

    let gram = gram_pair(ds, spec)?;
    let risk = risk_matrix(ds);
    let centered = CenteredGram::new(ds, &gram, &risk)?;

    let statistic = centered.statistic();
    let replicates: Vec<f64> = (0..cfg.m_replicates as u64)
        .into_par_iter()
        .map(|k| centered.replicate_keyed(cfg.seed, k))
        .collect();

    let quantile = bootstrap_quantile(&replicates, cfg.alpha);
    let count_ge = replicates.iter().filter(|&&r| r >= statistic).count();
    let p_value = (1 + count_ge) as f64 / (cfg.m_replicates + 1) as f64;
    let reject = statistic > quantile;

    Ok(TestResult {
        statistic,
        replicates,
        quantile,
        p_value,
        reject,
        config: *cfg,
        kernel: spec.clone(),
        n: ds.len(),
        dim: ds.dim(),
        runtime_ms: start.elapsed().as_millis() as u64,
    })
}
