//! Covariate and time kernels, Gram matrices, bandwidth selection, and the
//! Fisher-information scaling that recovers the Cox score test.
//!
//! The full kernel is always the product `𝕶((t,x),(t',x')) = L(t,t')·K(x,x')`.
//! Gaussian kernels use `K(x,x') = exp(-||x-x'||² / (2σ²))` where `σ²` is
//! either fixed or the median heuristic `median{||x_i-x_j||² : i<j} / 2`.

use nalgebra::DMatrix;
use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::data::SurvivalDataset;
use crate::error::{Error, Result};

/// How a Gaussian bandwidth σ² is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthPolicy {
    /// σ² = median of pairwise squared distances / 2, estimated from the data
    /// the test is applied to.
    MedianHeuristic,
    /// Fixed σ² > 0.
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CovariateKernel {
    Linear,
    Gaussian(BandwidthPolicy),
    Constant,
    /// Linear kernel scaled by the pseudo-inverse Fisher information of the
    /// Cox partial likelihood at β=0; makes the statistic the Cox score test.
    FisherLinear,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeKernel {
    Constant,
    Gaussian(BandwidthPolicy),
}

/// Which observations feed the median heuristic for the time kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeBandwidthSource {
    #[default]
    All,
    Events,
}

/// Declarative description of the product kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelSpecRaw", into = "KernelSpecRaw")]
pub struct KernelSpec {
    pub covariate_kernel: CovariateKernel,
    pub time_kernel: TimeKernel,
    pub time_bandwidth_source: TimeBandwidthSource,
}

impl KernelSpec {
    pub fn new(covariate_kernel: CovariateKernel, time_kernel: TimeKernel) -> Self {
        KernelSpec {
            covariate_kernel,
            time_kernel,
            time_bandwidth_source: TimeBandwidthSource::All,
        }
    }

    /// Parse one of the labels `lin1`, `gau1`, `fis1`, `gaugau`.
    pub fn from_label(label: &str) -> Result<Self> {
        let med = BandwidthPolicy::MedianHeuristic;
        match label {
            "lin1" => Ok(Self::new(CovariateKernel::Linear, TimeKernel::Constant)),
            "gau1" => Ok(Self::new(
                CovariateKernel::Gaussian(med),
                TimeKernel::Constant,
            )),
            "fis1" => Ok(Self::new(
                CovariateKernel::FisherLinear,
                TimeKernel::Constant,
            )),
            "gaugau" => Ok(Self::new(
                CovariateKernel::Gaussian(med),
                TimeKernel::Gaussian(med),
            )),
            other => Err(Error::UnknownKernel(other.to_string())),
        }
    }

    /// The short label when this spec matches one of the four named
    /// configurations (ignoring bandwidth overrides).
    pub fn label(&self) -> String {
        let cov = match self.covariate_kernel {
            CovariateKernel::Linear => "lin",
            CovariateKernel::Gaussian(_) => "gau",
            CovariateKernel::Constant => "one",
            CovariateKernel::FisherLinear => "fis",
        };
        let time = match self.time_kernel {
            TimeKernel::Constant => "1",
            TimeKernel::Gaussian(_) => "gau",
        };
        format!("{cov}{time}")
    }

    /// True when the covariate kernel is Gaussian (used for the
    /// standardize-by-default convention).
    pub fn covariate_is_gaussian(&self) -> bool {
        matches!(self.covariate_kernel, CovariateKernel::Gaussian(_))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum BandwidthRaw {
    Named(String),
    Fixed(f64),
}

#[derive(Serialize, Deserialize)]
struct KernelSpecRaw {
    covariate_kernel: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    covariate_bandwidth: Option<BandwidthRaw>,
    time_kernel: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    time_bandwidth: Option<BandwidthRaw>,
    #[serde(default, skip_serializing_if = "is_default_source")]
    time_bandwidth_source: TimeBandwidthSource,
}

fn is_default_source(s: &TimeBandwidthSource) -> bool {
    *s == TimeBandwidthSource::All
}

fn policy_from_raw(raw: Option<BandwidthRaw>, what: &str) -> Result<BandwidthPolicy> {
    match raw {
        None => Ok(BandwidthPolicy::MedianHeuristic),
        Some(BandwidthRaw::Named(s)) if s == "median" => Ok(BandwidthPolicy::MedianHeuristic),
        Some(BandwidthRaw::Named(s)) => Err(Error::Validation(format!(
            "{what} must be 'median' or a positive number, got '{s}'"
        ))),
        Some(BandwidthRaw::Fixed(v)) => {
            if v.is_finite() && v > 0.0 {
                Ok(BandwidthPolicy::Fixed(v))
            } else {
                Err(Error::Validation(format!(
                    "{what} must be strictly positive and finite, got {v}"
                )))
            }
        }
    }
}

fn policy_to_raw(p: BandwidthPolicy) -> BandwidthRaw {
    match p {
        BandwidthPolicy::MedianHeuristic => BandwidthRaw::Named("median".into()),
        BandwidthPolicy::Fixed(v) => BandwidthRaw::Fixed(v),
    }
}

impl TryFrom<KernelSpecRaw> for KernelSpec {
    type Error = Error;

    fn try_from(raw: KernelSpecRaw) -> Result<Self> {
        let covariate_kernel = match raw.covariate_kernel.as_str() {
            "linear" => CovariateKernel::Linear,
            "gaussian" => CovariateKernel::Gaussian(policy_from_raw(
                raw.covariate_bandwidth,
                "covariate_bandwidth",
            )?),
            "constant" => CovariateKernel::Constant,
            "fisher_linear" => CovariateKernel::FisherLinear,
            other => {
                return Err(Error::Validation(format!(
                    "unknown covariate_kernel '{other}'"
                )))
            }
        };
        let time_kernel = match raw.time_kernel.as_str() {
            "constant" => TimeKernel::Constant,
            "gaussian" => {
                TimeKernel::Gaussian(policy_from_raw(raw.time_bandwidth, "time_bandwidth")?)
            }
            other => return Err(Error::Validation(format!("unknown time_kernel '{other}'"))),
        };
        Ok(KernelSpec {
            covariate_kernel,
            time_kernel,
            time_bandwidth_source: raw.time_bandwidth_source,
        })
    }
}

impl From<KernelSpec> for KernelSpecRaw {
    fn from(spec: KernelSpec) -> Self {
        let (cov_name, cov_bw) = match spec.covariate_kernel {
            CovariateKernel::Linear => ("linear", None),
            CovariateKernel::Gaussian(p) => ("gaussian", Some(policy_to_raw(p))),
            CovariateKernel::Constant => ("constant", None),
            CovariateKernel::FisherLinear => ("fisher_linear", None),
        };
        let (time_name, time_bw) = match spec.time_kernel {
            TimeKernel::Constant => ("constant", None),
            TimeKernel::Gaussian(p) => ("gaussian", Some(policy_to_raw(p))),
        };
        KernelSpecRaw {
            covariate_kernel: cov_name.into(),
            covariate_bandwidth: cov_bw,
            time_kernel: time_name.into(),
            time_bandwidth: time_bw,
            time_bandwidth_source: spec.time_bandwidth_source,
        }
    }
}

/// Median-heuristic bandwidth: σ² = median{||p_i - p_j||² : i < j} / 2.
///
/// The median of an even-length list is the mean of the two central order
/// statistics. A cloud whose median pairwise distance is zero (in particular
/// all points identical) is an error.
pub fn median_heuristic_bandwidth(points: &Array2<f64>) -> Result<f64> {
    let m = points.nrows();
    if m < 2 {
        return Err(Error::Validation(
            "median heuristic needs at least 2 points".into(),
        ));
    }
    let mut dists = Vec::with_capacity(m * (m - 1) / 2);
    for i in 0..m {
        let pi = points.row(i);
        for j in (i + 1)..m {
            let pj = points.row(j);
            let d2: f64 = pi
                .iter()
                .zip(pj.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            dists.push(d2);
        }
    }
    let len = dists.len();
    let median = if len % 2 == 1 {
        let (_, mid, _) = dists.select_nth_unstable_by(len / 2, |a, b| a.total_cmp(b));
        *mid
    } else {
        let (left, mid, _) = dists.select_nth_unstable_by(len / 2, |a, b| a.total_cmp(b));
        let upper = *mid;
        let lower = left
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
            .min(upper);
        (lower + upper) / 2.0
    };
    if median <= 0.0 {
        return Err(Error::Numeric("degenerate point cloud".into()));
    }
    Ok(median / 2.0)
}

/// Estimated Fisher information of the Cox partial likelihood at β=0.
#[derive(Debug, Clone)]
pub struct FisherInformation {
    /// I(0) = Σ_{i:Δ_i=1} [ S₂(T_i)/S₀(T_i) − (S₁(T_i)/S₀(T_i))(S₁/S₀)ᵀ ].
    pub matrix: Array2<f64>,
    /// Moore-Penrose pseudo-inverse of `matrix`; singular values below
    /// 1e-10 times the largest are treated as zero.
    pub pseudo_inverse: Array2<f64>,
}

impl FisherInformation {
    /// Scaling matrix for the FisherLinear kernel: the pseudo-inverse of the
    /// normalized information I(0)/n, which equals n times `pseudo_inverse`.
    pub fn kernel_scaling(&self, n: usize) -> Array2<f64> {
        &self.pseudo_inverse * n as f64
    }
}

/// Pseudo-inverse of a symmetric matrix via eigendecomposition, zeroing
/// eigenvalues below 1e-10 of the largest magnitude.
fn symmetric_pseudo_inverse(mat: &Array2<f64>) -> Array2<f64> {
    let d = mat.nrows();
    let m = DMatrix::from_fn(d, d, |i, j| mat[[i, j]]);
    let eig = m.symmetric_eigen();
    let max_abs = eig.eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let tol = 1e-10 * max_abs;
    let mut out = Array2::zeros((d, d));
    if max_abs == 0.0 {
        return out;
    }
    for k in 0..d {
        let lambda = eig.eigenvalues[k];
        if lambda.abs() <= tol {
            continue;
        }
        let q = eig.eigenvectors.column(k);
        for i in 0..d {
            for j in 0..d {
                out[[i, j]] += q[i] * q[j] / lambda;
            }
        }
    }
    out
}

/// Compute the Cox information at β=0 from a canonical dataset.
///
/// Uses suffix sums over the time-sorted rows: the risk set at `T_i` is the
/// block of rows with `T_j >= T_i`.
pub fn fisher_information(ds: &SurvivalDataset) -> Result<FisherInformation> {
    let n = ds.len();
    let d = ds.dim();
    if ds.event_count() == 0 {
        return Err(Error::Numeric(
            "Fisher information needs at least one uncensored event".into(),
        ));
    }
    let times = ds.times();
    let cov = ds.covariates();

    // Suffix sums s1[j] = Σ_{k>=j} X_k and s2[j] = Σ_{k>=j} X_k X_kᵀ, stored
    // only at block starts while scanning from the bottom.
    let mut info = Array2::<f64>::zeros((d, d));
    let mut s1 = vec![0.0; d];
    let mut s2 = Array2::<f64>::zeros((d, d));

    // Walk blocks of tied times from the last row upward; after absorbing a
    // block, (s1, s2) are the sums over the risk set at that block's time.
    let mut i = n;
    while i > 0 {
        let mut start = i - 1;
        while start > 0 && times[start - 1] == times[i - 1] {
            start -= 1;
        }
        let mut block_events = 0usize;
        for row in start..i {
            let x = cov.row(row);
            for a in 0..d {
                s1[a] += x[a];
                for b in 0..d {
                    s2[[a, b]] += x[a] * x[b];
                }
            }
            if ds.events()[row] {
                block_events += 1;
            }
        }
        // Each event at this time contributes the same matrix: risk set and
        // its moments are shared across the tie block.
        let s0 = (n - start) as f64;
        for _ in 0..block_events {
            for a in 0..d {
                for b in 0..d {
                    info[[a, b]] += s2[[a, b]] / s0 - (s1[a] / s0) * (s1[b] / s0);
                }
            }
        }
        i = start;
    }

    let pseudo_inverse = symmetric_pseudo_inverse(&info);
    Ok(FisherInformation {
        matrix: info,
        pseudo_inverse,
    })
}

/// Covariate kernel with all parameters resolved to concrete values.
#[derive(Debug, Clone)]
pub enum ResolvedCovariateKernel {
    Linear,
    Gaussian {
        sigma_sq: f64,
    },
    Constant,
    /// K(x,x') = xᵀ S x' with S the Fisher kernel scaling matrix.
    FisherScaled {
        scaling: Array2<f64>,
    },
}

impl ResolvedCovariateKernel {
    pub fn eval(&self, x: ArrayView1<'_, f64>, y: ArrayView1<'_, f64>) -> f64 {
        match self {
            ResolvedCovariateKernel::Linear => x.iter().zip(y.iter()).map(|(a, b)| a * b).sum(),
            ResolvedCovariateKernel::Gaussian { sigma_sq } => {
                let d2: f64 = x.iter().zip(y.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                (-d2 / (2.0 * sigma_sq)).exp()
            }
            ResolvedCovariateKernel::Constant => 1.0,
            ResolvedCovariateKernel::FisherScaled { scaling } => {
                let d = x.len();
                let mut acc = 0.0;
                for a in 0..d {
                    let mut row = 0.0;
                    for b in 0..d {
                        row += scaling[[a, b]] * y[b];
                    }
                    acc += x[a] * row;
                }
                acc
            }
        }
    }
}

#[derive(Debug, Clone)]
pub enum ResolvedTimeKernel {
    Constant,
    Gaussian { sigma_sq: f64 },
}

impl ResolvedTimeKernel {
    #[inline]
    pub fn eval(&self, t: f64, s: f64) -> f64 {
        match self {
            ResolvedTimeKernel::Constant => 1.0,
            ResolvedTimeKernel::Gaussian { sigma_sq } => {
                let d = t - s;
                (-d * d / (2.0 * sigma_sq)).exp()
            }
        }
    }
}

/// A kernel spec with bandwidths and Fisher scaling resolved against a
/// dataset. Resolution happens once; bootstrap replicates reuse it.
#[derive(Debug, Clone)]
pub struct ResolvedKernel {
    pub covariate: ResolvedCovariateKernel,
    pub time: ResolvedTimeKernel,
}

fn fixed_bandwidth(v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::Validation(format!(
            "fixed bandwidth must be strictly positive and finite, got {v}"
        )))
    }
}

/// Resolve bandwidth policies and Fisher scaling for `spec` on `ds`.
pub fn resolve_kernel(ds: &SurvivalDataset, spec: &KernelSpec) -> Result<ResolvedKernel> {
    let covariate = match spec.covariate_kernel {
        CovariateKernel::Linear => ResolvedCovariateKernel::Linear,
        CovariateKernel::Constant => ResolvedCovariateKernel::Constant,
        CovariateKernel::Gaussian(policy) => {
            let sigma_sq = match policy {
                BandwidthPolicy::Fixed(v) => fixed_bandwidth(v)?,
                BandwidthPolicy::MedianHeuristic => median_heuristic_bandwidth(ds.covariates())?,
            };
            ResolvedCovariateKernel::Gaussian { sigma_sq }
        }
        CovariateKernel::FisherLinear => {
            let fisher = fisher_information(ds)?;
            ResolvedCovariateKernel::FisherScaled {
                scaling: fisher.kernel_scaling(ds.len()),
            }
        }
    };

    let time = match spec.time_kernel {
        TimeKernel::Constant => ResolvedTimeKernel::Constant,
        TimeKernel::Gaussian(policy) => {
            let sigma_sq = match policy {
                BandwidthPolicy::Fixed(v) => fixed_bandwidth(v)?,
                BandwidthPolicy::MedianHeuristic => {
                    let times: Vec<f64> = match spec.time_bandwidth_source {
                        TimeBandwidthSource::All => ds.times().to_vec(),
                        TimeBandwidthSource::Events => ds
                            .times()
                            .iter()
                            .zip(ds.events())
                            .filter(|(_, &e)| e)
                            .map(|(&t, _)| t)
                            .collect(),
                    };
                    let pts = Array2::from_shape_vec((times.len(), 1), times)
                        .map_err(|e| Error::Validation(e.to_string()))?;
                    median_heuristic_bandwidth(&pts)?
                }
            };
            ResolvedTimeKernel::Gaussian { sigma_sq }
        }
    };

    Ok(ResolvedKernel { covariate, time })
}

/// The n x n Gram matrices of the test: `K` on covariates and the
/// event-masked `L^Δ` on times, `(L^Δ)_ij = Δ_i Δ_j L(T_i, T_j)`.
#[derive(Debug, Clone)]
pub struct GramPair {
    pub k_matrix: Array2<f64>,
    pub l_delta_matrix: Array2<f64>,
    /// The resolved kernel the matrices were built from.
    pub resolved: ResolvedKernel,
}

/// Build the Gram pair for a canonical dataset, resolving bandwidths first.
pub fn gram_pair(ds: &SurvivalDataset, spec: &KernelSpec) -> Result<GramPair> {
    let resolved = resolve_kernel(ds, spec)?;
    gram_pair_resolved(ds, resolved)
}

/// Build the Gram pair from an already-resolved kernel.
pub fn gram_pair_resolved(ds: &SurvivalDataset, resolved: ResolvedKernel) -> Result<GramPair> {
    let n = ds.len();
    let cov = ds.covariates();
    let times = ds.times();
    let events = ds.events();

    let mut k = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        let xi = cov.row(i);
        for j in i..n {
            let v = resolved.covariate.eval(xi, cov.row(j));
            k[[i, j]] = v;
            k[[j, i]] = v;
        }
    }

    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        if !events[i] {
            continue;
        }
        for j in i..n {
            if !events[j] {
                continue;
            }
            let v = resolved.time.eval(times[i], times[j]);
            l[[i, j]] = v;
            l[[j, i]] = v;
        }
    }

    Ok(GramPair {
        k_matrix: k,
        l_delta_matrix: l,
        resolved,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::canonicalize;
    use ndarray::array;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn dataset(times: &[f64], events: &[bool], xs: &[f64]) -> SurvivalDataset {
        let cov = Array2::from_shape_vec((times.len(), 1), xs.to_vec()).unwrap();
        canonicalize(times, events, &cov).unwrap()
    }

    #[test]
    fn median_heuristic_small_cases() {
        let two = array![[0.0], [1.0]];
        assert_eq!(median_heuristic_bandwidth(&two).unwrap(), 0.5);
        // Distances {1, 4, 1}: median 1 -> sigma^2 = 0.5.
        let three = array![[0.0], [1.0], [2.0]];
        assert_eq!(median_heuristic_bandwidth(&three).unwrap(), 0.5);
    }

    #[test]
    fn median_heuristic_matches_brute_force() {
        let mut rng = StdRng::seed_from_u64(42);
        let m = 100;
        let pts = Array2::from_shape_fn((m, 3), |_| rng.gen_range(-1.0..1.0));
        let got = median_heuristic_bandwidth(&pts).unwrap();

        // Independent double loop + full sort.
        let mut all = Vec::new();
        for i in 0..m {
            for j in 0..m {
                if i < j {
                    let d2: f64 = (0..3).map(|c| (pts[[i, c]] - pts[[j, c]]).powi(2)).sum();
                    all.push(d2);
                }
            }
        }
        all.sort_by(|a, b| a.total_cmp(b));
        let len = all.len();
        let median = if len % 2 == 1 {
            all[len / 2]
        } else {
            (all[len / 2 - 1] + all[len / 2]) / 2.0
        };
        assert!((got - median / 2.0).abs() <= 1e-15 * median.max(1.0));
    }

    #[test]
    fn median_heuristic_degenerate() {
        let same = array![[2.0], [2.0], [2.0]];
        let err = median_heuristic_bandwidth(&same).unwrap_err();
        assert!(err.to_string().contains("degenerate point cloud"));
    }

    #[test]
    fn gram_constant_kernel_is_ones() {
        let ds = dataset(&[1.0, 2.0, 3.0], &[true, false, true], &[0.5, -0.5, 1.5]);
        let spec = KernelSpec::new(CovariateKernel::Constant, TimeKernel::Constant);
        let g = gram_pair(&ds, &spec).unwrap();
        assert!(g.k_matrix.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn gram_all_censored_masks_l() {
        let ds = dataset(&[1.0, 2.0, 3.0], &[false; 3], &[0.5, -0.5, 1.5]);
        let spec = KernelSpec::new(CovariateKernel::Linear, TimeKernel::Constant);
        let g = gram_pair(&ds, &spec).unwrap();
        assert!(g.l_delta_matrix.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gram_linear_outer_product() {
        let ds = dataset(&[1.0, 2.0, 3.0], &[true; 3], &[1.0, -1.0, 2.0]);
        let spec = KernelSpec::new(CovariateKernel::Linear, TimeKernel::Constant);
        let g = gram_pair(&ds, &spec).unwrap();
        let expect = array![[1.0, -1.0, 2.0], [-1.0, 1.0, -2.0], [2.0, -2.0, 4.0]];
        assert_eq!(g.k_matrix, expect);
    }

    #[test]
    fn gaussian_gram_diagonal_and_range() {
        let mut rng = StdRng::seed_from_u64(7);
        let times: Vec<f64> = (0..20).map(|_| rng.gen_range(0.1..5.0)).collect();
        let xs: Vec<f64> = (0..20).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let ds = dataset(&times, &[true; 20], &xs);
        let spec = KernelSpec::from_label("gau1").unwrap();
        let g = gram_pair(&ds, &spec).unwrap();
        for i in 0..20 {
            assert_eq!(g.k_matrix[[i, i]], 1.0);
        }
        assert!(g.k_matrix.iter().all(|&v| v > 0.0 && v <= 1.0));
    }

    #[test]
    fn gaussian_gram_is_psd() {
        let mut rng = StdRng::seed_from_u64(11);
        let times: Vec<f64> = (0..12).map(|_| rng.gen_range(0.1..5.0)).collect();
        let xs: Vec<f64> = (0..12).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let ds = dataset(&times, &[true; 12], &xs);
        let g = gram_pair(&ds, &KernelSpec::from_label("gau1").unwrap()).unwrap();
        let m = DMatrix::from_fn(12, 12, |i, j| g.k_matrix[[i, j]]);
        let eig = m.symmetric_eigen();
        assert!(eig.eigenvalues.iter().all(|&l| l > -1e-10));
    }

    #[test]
    fn gram_respects_row_permutation() {
        let times = [1.0, 2.0, 3.0, 4.0];
        let events = [true, false, true, true];
        let xs = [0.5, -0.5, 1.5, 0.0];
        let ds = dataset(&times, &events, &xs);
        // A shuffled copy canonicalizes to the same rows.
        let ds2 = dataset(
            &[4.0, 1.0, 3.0, 2.0],
            &[true, true, true, false],
            &[0.0, 0.5, 1.5, -0.5],
        );
        let spec = KernelSpec::from_label("gaugau").unwrap();
        let g1 = gram_pair(&ds, &spec).unwrap();
        let g2 = gram_pair(&ds2, &spec).unwrap();
        assert_eq!(g1.k_matrix, g2.k_matrix);
        assert_eq!(g1.l_delta_matrix, g2.l_delta_matrix);
    }

    #[test]
    fn fisher_information_two_point_formula() {
        // Single event, risk set {1,2}: I(0) = (x1-x2)^2/4.
        let ds = dataset(&[1.0, 2.0], &[true, false], &[0.7, -0.3]);
        let fi = fisher_information(&ds).unwrap();
        let expect = (0.7f64 - (-0.3)).powi(2) / 4.0;
        assert!((fi.matrix[[0, 0]] - expect).abs() < 1e-14);
        assert!((fi.pseudo_inverse[[0, 0]] - 1.0 / expect).abs() < 1e-10);
    }

    #[test]
    fn fisher_information_constant_covariates() {
        let ds = dataset(&[1.0, 2.0, 3.0], &[true, true, false], &[4.0, 4.0, 4.0]);
        let fi = fisher_information(&ds).unwrap();
        assert!(fi.matrix[[0, 0]].abs() < 1e-12);
        assert_eq!(fi.pseudo_inverse[[0, 0]], 0.0);
    }

    #[test]
    fn fisher_information_rank_deficient() {
        let cov = array![[1.0, 5.0], [2.0, 5.0], [0.5, 5.0], [1.5, 5.0]];
        let ds = canonicalize(&[1.0, 2.0, 3.0, 4.0], &[true, true, true, false], &cov).unwrap();
        let fi = fisher_information(&ds).unwrap();
        // Second column constant: information has rank <= 1.
        let m = DMatrix::from_fn(2, 2, |i, j| fi.matrix[[i, j]]);
        let eig = m.symmetric_eigen();
        let nonzero = eig.eigenvalues.iter().filter(|l| l.abs() > 1e-10).count();
        assert!(nonzero <= 1);
        // Moore-Penrose identity V I V = V.
        let v = &fi.pseudo_inverse;
        let viv = v.dot(&fi.matrix).dot(v);
        for (a, b) in viv.iter().zip(v.iter()) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn fisher_information_positive_when_nonconstant() {
        let mut rng = StdRng::seed_from_u64(3);
        let times: Vec<f64> = (0..30).map(|_| rng.gen_range(0.1..5.0)).collect();
        let xs: Vec<f64> = (0..30).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let ds = dataset(&times, &[true; 30], &xs);
        let (std, _) = crate::data::standardize_covariates(&ds).unwrap();
        let fi = fisher_information(&std).unwrap();
        assert!(fi.matrix[[0, 0]] > 0.0);
    }

    #[test]
    fn fisher_linear_gram_equals_linear_on_transformed() {
        let mut rng = StdRng::seed_from_u64(5);
        let n = 15;
        let d = 2;
        let times: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..5.0)).collect();
        let events: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.7)).collect();
        let cov = Array2::from_shape_fn((n, d), |_| rng.gen_range(-1.0..1.0));
        let ds = canonicalize(&times, &events, &cov).unwrap();

        let g = gram_pair(&ds, &KernelSpec::from_label("fis1").unwrap()).unwrap();
        let scaling = match &g.resolved.covariate {
            ResolvedCovariateKernel::FisherScaled { scaling } => scaling.clone(),
            _ => unreachable!(),
        };

        // Explicit symmetric square root of the scaling matrix.
        let m = DMatrix::from_fn(d, d, |i, j| scaling[[i, j]]);
        let eig = m.symmetric_eigen();
        let mut sqrt = Array2::<f64>::zeros((d, d));
        for k in 0..d {
            let l = eig.eigenvalues[k].max(0.0).sqrt();
            for i in 0..d {
                for j in 0..d {
                    sqrt[[i, j]] += eig.eigenvectors[(i, k)] * eig.eigenvectors[(j, k)] * l;
                }
            }
        }
        let transformed = ds.covariates().dot(&sqrt);
        for i in 0..n {
            for j in 0..n {
                let lin: f64 = transformed.row(i).dot(&transformed.row(j));
                assert!((g.k_matrix[[i, j]] - lin).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn kernel_spec_json_round_trip() {
        let spec = KernelSpec::from_label("gaugau").unwrap();
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.contains("\"covariate_kernel\":\"gaussian\""));
        assert!(json.contains("\"covariate_bandwidth\":\"median\""));
        let back: KernelSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);

        let fixed: KernelSpec = serde_json::from_str(
            r#"{"covariate_kernel":"gaussian","covariate_bandwidth":0.5,
                "time_kernel":"constant"}"#,
        )
        .unwrap();
        assert_eq!(
            fixed.covariate_kernel,
            CovariateKernel::Gaussian(BandwidthPolicy::Fixed(0.5))
        );

        let bad = serde_json::from_str::<KernelSpec>(
            r#"{"covariate_kernel":"gaussian","covariate_bandwidth":-1.0,
                "time_kernel":"constant"}"#,
        );
        assert!(bad.is_err());
    }

    #[test]
    fn kernel_labels_round_trip() {
        for label in ["lin1", "gau1", "fis1", "gaugau"] {
            let spec = KernelSpec::from_label(label).unwrap();
            assert_eq!(spec.label(), label);
        }
        assert!(KernelSpec::from_label("nope").is_err());
    }
}
