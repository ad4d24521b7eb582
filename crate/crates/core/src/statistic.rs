//! The kernel log-rank statistic and classical survival primitives.
//!
//! `psi_squared_trace` evaluates Ψ²ₙ = (1/n²)·tr(L^Δ (I−A) K (I−A)ᵀ) in
//! O(n²) time by exploiting the structure of the risk matrix A: in canonical
//! order its rows are constant over a suffix (the risk set), so products with
//! (I−A) reduce to suffix sums over tie blocks. `psi_squared_direct` is the
//! quartic-cost literal evaluation of the centered-kernel double sum, kept as
//! an independent reference implementation.

use ndarray::Array2;

use crate::data::SurvivalDataset;
use crate::error::{Error, Result};
use crate::kernels::{resolve_kernel, GramPair, KernelSpec};

/// Cap on the size accepted by [`psi_squared_direct`].
pub const DIRECT_ORACLE_CAP: usize = 500;

/// Compensated (Kahan) accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    #[inline]
    pub(crate) fn add(&mut self, value: f64) {
        let y = value - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    #[inline]
    pub(crate) fn total(&self) -> f64 {
        self.sum
    }
}

/// The risk matrix (𝐀)ᵢⱼ = Yⱼ(Tᵢ)/Y(Tᵢ) in structured form.
///
/// In canonical order row `i` equals `1/(n - row_start[i])` on columns
/// `row_start[i]..n` and zero before; `row_start[i]` is the first row of the
/// tie block containing `i`. Without ties this is the upper-triangular matrix
/// with row `i` constant at `1/(n-i)`.
#[derive(Debug, Clone)]
pub struct RiskMatrix {
    n: usize,
    row_start: Vec<usize>,
}

impl RiskMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// First column of the risk set for row `i`.
    #[inline]
    pub fn row_start(&self, i: usize) -> usize {
        self.row_start[i]
    }

    /// Y(Tᵢ): number of subjects still at risk at Tᵢ.
    #[inline]
    pub fn risk_count(&self, i: usize) -> usize {
        self.n - self.row_start[i]
    }

    pub(crate) fn row_starts(&self) -> &[usize] {
        &self.row_start
    }

    /// Materialize the dense matrix (test and oracle use only).
    pub fn dense(&self) -> Array2<f64> {
        let mut a = Array2::zeros((self.n, self.n));
        for i in 0..self.n {
            let start = self.row_start[i];
            let w = 1.0 / (self.n - start) as f64;
            for j in start..self.n {
                a[[i, j]] = w;
            }
        }
        a
    }
}

/// Build the structured risk matrix of a canonical dataset.
pub fn risk_matrix(ds: &SurvivalDataset) -> RiskMatrix {
    let times = ds.times();
    let n = times.len();
    let mut row_start = vec![0usize; n];
    let mut block_start = 0;
    for i in 0..n {
        if i > 0 && times[i] != times[i - 1] {
            block_start = i;
        }
        row_start[i] = block_start;
    }
    RiskMatrix { n, row_start }
}

/// Nelson-Aalen estimator: cumulative-hazard increments dN(t)/Y(t) at each
/// uncensored time.
#[derive(Debug, Clone, PartialEq)]
pub struct NelsonAalen {
    pub jump_times: Vec<f64>,
    pub increments: Vec<f64>,
}

pub fn nelson_aalen(ds: &SurvivalDataset) -> NelsonAalen {
    let times = ds.times();
    let events = ds.events();
    let n = ds.len();
    let mut jump_times = Vec::new();
    let mut increments = Vec::new();
    let mut i = 0;
    while i < n {
        let mut end = i + 1;
        while end < n && times[end] == times[i] {
            end += 1;
        }
        let d: usize = (i..end).filter(|&k| events[k]).count();
        if d > 0 {
            jump_times.push(times[i]);
            increments.push(d as f64 / (n - i) as f64);
        }
        i = end;
    }
    NelsonAalen {
        jump_times,
        increments,
    }
}

/// The kernel log-rank statistic value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Statistic {
    /// Ψ²ₙ, a squared RKHS norm (clamped at zero against roundoff).
    pub psi_squared: f64,
    /// nΨ²ₙ, the scale used for testing.
    pub n_psi_squared: f64,
}

impl Statistic {
    fn from_trace_sum(sum: f64, n: usize) -> Statistic {
        let n = n as f64;
        let n_psi = (sum / n).max(0.0);
        Statistic {
            psi_squared: n_psi / n,
            n_psi_squared: n_psi,
        }
    }
}

/// Walk the event rows of the centered quadratic form, handing the consumer
/// row `i` of C = (I−A) K (I−A)ᵀ restricted to event columns.
///
/// Tie blocks are scanned bottom-up so the running suffix sums over the risk
/// set need a single sweep of K and O(n) scratch; rows are therefore emitted
/// in descending block order (ascending within a block).
pub(crate) fn for_each_centered_row<F>(
    ds: &SurvivalDataset,
    gram: &GramPair,
    risk: &RiskMatrix,
    mut consume: F,
) -> Result<()>
where
    F: FnMut(usize, &[usize], &[f64]),
{
    let n = ds.len();
    if gram.k_matrix.nrows() != n || risk.len() != n {
        return Err(Error::Validation(
            "gram/risk dimensions do not match dataset".into(),
        ));
    }
    let k = gram
        .k_matrix
        .as_slice()
        .ok_or_else(|| Error::Validation("gram matrix not contiguous".into()))?;
    let events: Vec<usize> = ds.event_indices();
    let row_start = risk.row_starts();

    let mut suffix = vec![0.0f64; n]; // sums of K rows over the risk set
    let mut v = vec![0.0f64; n]; // row of (I-A) K
    let mut sv = vec![0.0f64; n + 1]; // suffix sums of v
    let mut c_row = vec![0.0f64; events.len()];

    let mut end = n;
    while end > 0 {
        let s = row_start[end - 1];
        for i in s..end {
            let ki = &k[i * n..(i + 1) * n];
            for c in 0..n {
                suffix[c] += ki[c];
            }
        }
        let m = (n - s) as f64;
        for i in s..end {
            if !ds.events()[i] {
                continue;
            }
            let ki = &k[i * n..(i + 1) * n];
            for c in 0..n {
                v[c] = ki[c] - suffix[c] / m;
            }
            sv[n] = 0.0;
            for c in (0..n).rev() {
                sv[c] = sv[c + 1] + v[c];
            }
            for (b, &j) in events.iter().enumerate() {
                let rs = row_start[j];
                c_row[b] = v[j] - sv[rs] / (n - rs) as f64;
            }
            consume(i, &events, &c_row);
        }
        end = s;
    }
    Ok(())
}

/// Accumulate Σᵢⱼ (L^Δ)ᵢⱼ Cᵢⱼ with per-row compensated sums combined in
/// canonical row order; shared by the statistic and the bootstrap
/// factorization so the two agree bit-for-bit.
pub(crate) fn trace_sum(ds: &SurvivalDataset, gram: &GramPair, risk: &RiskMatrix) -> Result<f64> {
    let n = ds.len();
    if gram.l_delta_matrix.nrows() != n {
        return Err(Error::Validation(
            "l_delta dimensions do not match dataset".into(),
        ));
    }
    let l = gram
        .l_delta_matrix
        .as_slice()
        .ok_or_else(|| Error::Validation("gram matrix not contiguous".into()))?;
    // Rows arrive in block-descending order; store per-row partials and
    // combine ascending so the total is independent of the walk order.
    let mut slot_of = vec![usize::MAX; n];
    let events = ds.event_indices();
    for (slot, &i) in events.iter().enumerate() {
        slot_of[i] = slot;
    }
    let mut partials = vec![0.0f64; events.len()];
    for_each_centered_row(ds, gram, risk, |i, evs, c_row| {
        let li = &l[i * n..(i + 1) * n];
        let mut row = Kahan::default();
        for (b, &j) in evs.iter().enumerate() {
            row.add(li[j] * c_row[b]);
        }
        partials[slot_of[i]] = row.total();
    })?;
    let mut outer = Kahan::default();
    for p in partials {
        outer.add(p);
    }
    Ok(outer.total())
}

/// Ψ²ₙ by the O(n²) trace formula.
pub fn psi_squared_trace(ds: &SurvivalDataset, gram: &GramPair) -> Result<Statistic> {
    let risk = risk_matrix(ds);
    let sum = trace_sum(ds, gram, &risk)?;
    Ok(Statistic::from_trace_sum(sum, ds.len()))
}

/// Ψ²ₙ by literal evaluation of the centered kernel K̄ₙ over uncensored
/// pairs. Reference implementation, independent of the suffix-sum path: the
/// risk weights come from a dense indicator matrix.
pub fn psi_squared_direct(ds: &SurvivalDataset, spec: &KernelSpec) -> Result<Statistic> {
    let n = ds.len();
    if n > DIRECT_ORACLE_CAP {
        return Err(Error::Validation(format!(
            "psi_squared_direct is a reference implementation capped at n={DIRECT_ORACLE_CAP}, got {n}"
        )));
    }
    let resolved = resolve_kernel(ds, spec)?;
    let cov = ds.covariates();
    let times = ds.times();

    let mut k = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            k[[i, j]] = resolved.covariate.eval(cov.row(i), cov.row(j));
        }
    }
    // Dense risk weights straight from the definition A_ij = Y_j(T_i)/Y(T_i).
    let mut a = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        let y: f64 = (0..n)
            .map(|j| if times[j] >= times[i] { 1.0 } else { 0.0 })
            .sum();
        for j in 0..n {
            a[[i, j]] = if times[j] >= times[i] { 1.0 / y } else { 0.0 };
        }
    }

    let events = ds.event_indices();
    // g[e][k] = Σ_l K(X_k, X_l) A[e][l] for each event row e.
    let mut g = Vec::with_capacity(events.len());
    for &e in &events {
        let mut ge = vec![0.0f64; n];
        for kk in 0..n {
            let mut acc = 0.0;
            for l in 0..n {
                acc += k[[kk, l]] * a[[e, l]];
            }
            ge[kk] = acc;
        }
        g.push(ge);
    }

    let mut total = Kahan::default();
    for (bi, &i) in events.iter().enumerate() {
        for (bj, &j) in events.iter().enumerate() {
            let mut term2 = 0.0;
            let mut term3 = 0.0;
            let mut term4 = 0.0;
            for kk in 0..n {
                term2 += k[[i, kk]] * a[[j, kk]];
                term3 += k[[kk, j]] * a[[i, kk]];
                term4 += a[[i, kk]] * g[bj][kk];
            }
            let centered = k[[i, j]] - term2 - term3 + term4;
            let l = resolved.time.eval(times[i], times[j]);
            total.add(l * centered);
            let _ = bi;
        }
    }
    let nf = n as f64;
    let psi = (total.total() / (nf * nf)).max(0.0);
    Ok(Statistic {
        psi_squared: psi,
        n_psi_squared: nf * psi,
    })
}

/// The weighted log-rank functional LRₙ(ω) for an arbitrary weight
/// ω(t, x). Literal O(n²) evaluation with indicator risk sets; intended for
/// oracle checks rather than the user-facing test.
pub fn log_rank_statistic<W>(ds: &SurvivalDataset, weight: W) -> f64
where
    W: Fn(f64, ndarray::ArrayView1<'_, f64>) -> f64,
{
    let n = ds.len();
    let times = ds.times();
    let cov = ds.covariates();
    let mut total = Kahan::default();
    for i in 0..n {
        if !ds.events()[i] {
            continue;
        }
        let t = times[i];
        let mut risk = 0.0f64;
        let mut weighted = Kahan::default();
        for (j, &tj) in times.iter().enumerate() {
            if tj >= t {
                risk += 1.0;
                weighted.add(weight(t, cov.row(j)));
            }
        }
        let centered = weight(t, cov.row(i)) - weighted.total() / risk;
        total.add(centered);
    }
    total.total() / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::canonicalize;
    use crate::kernels::{gram_pair, BandwidthPolicy, CovariateKernel, TimeKernel};
    use ndarray::Array2;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn dataset(times: &[f64], events: &[bool], xs: &[f64]) -> SurvivalDataset {
        let cov = Array2::from_shape_vec((times.len(), 1), xs.to_vec()).unwrap();
        canonicalize(times, events, &cov).unwrap()
    }

    fn random_dataset(rng: &mut StdRng, n: usize, d: usize, with_ties: bool) -> SurvivalDataset {
        let times: Vec<f64> = (0..n)
            .map(|_| {
                let t: f64 = rng.gen_range(0.05..4.0);
                if with_ties && rng.gen_bool(0.3) {
                    (t * 4.0).round() / 4.0 + 0.25
                } else {
                    t
                }
            })
            .collect();
        let events: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.65)).collect();
        let cov = Array2::from_shape_fn((n, d), |_| rng.gen_range(-1.5..1.5));
        canonicalize(&times, &events, &cov).unwrap()
    }

    fn all_specs() -> Vec<KernelSpec> {
        ["lin1", "gau1", "fis1", "gaugau"]
            .iter()
            .map(|l| KernelSpec::from_label(l).unwrap())
            .collect()
    }

    /// Dense-matrix evaluation of (1/n²)tr(L^Δ(I−A)K(I−A)ᵀ) with ndarray
    /// products; a second independent route for small n.
    fn psi_dense(ds: &SurvivalDataset, gram: &GramPair) -> f64 {
        let n = ds.len();
        let a = risk_matrix(ds).dense();
        let eye = Array2::<f64>::eye(n);
        let ia = &eye - &a;
        let prod = gram
            .l_delta_matrix
            .dot(&ia)
            .dot(&gram.k_matrix)
            .dot(&ia.t());
        prod.diag().sum() / (n as f64 * n as f64)
    }

    #[test]
    fn risk_matrix_small_examples() {
        let ds2 = dataset(&[1.0, 2.0], &[true, true], &[0.0, 1.0]);
        let a = risk_matrix(&ds2).dense();
        assert_eq!(a[[0, 0]], 0.5);
        assert_eq!(a[[0, 1]], 0.5);
        assert_eq!(a[[1, 0]], 0.0);
        assert_eq!(a[[1, 1]], 1.0);

        let ds3 = dataset(&[1.0, 2.0, 3.0], &[true, true, true], &[0.0, 1.0, 2.0]);
        let a = risk_matrix(&ds3).dense();
        let third = 1.0 / 3.0;
        for j in 0..3 {
            assert_eq!(a[[0, j]], third);
        }
        assert_eq!(a[[1, 0]], 0.0);
        assert_eq!(a[[1, 1]], 0.5);
        assert_eq!(a[[1, 2]], 0.5);
        assert_eq!(a[[2, 2]], 1.0);
    }

    #[test]
    fn risk_matrix_rows_sum_to_one() {
        let mut rng = StdRng::seed_from_u64(1);
        let ds = random_dataset(&mut rng, 50, 1, true);
        let a = risk_matrix(&ds).dense();
        for i in 0..50 {
            let sum: f64 = a.row(i).sum();
            assert!((sum - 1.0).abs() < 1e-12, "row {i} sums to {sum}");
        }
    }

    #[test]
    fn risk_matrix_handles_ties_as_blocks() {
        let ds = dataset(
            &[1.0, 2.0, 2.0, 3.0],
            &[true, true, false, true],
            &[0.0, 1.0, 2.0, 3.0],
        );
        let r = risk_matrix(&ds);
        assert_eq!(r.row_start(0), 0);
        assert_eq!(r.row_start(1), 1);
        assert_eq!(r.row_start(2), 1);
        assert_eq!(r.row_start(3), 3);
        assert_eq!(r.risk_count(1), 3);
    }

    #[test]
    fn nelson_aalen_examples() {
        let ds = dataset(&[1.0, 2.0, 3.0], &[true, true, true], &[0.0, 1.0, 2.0]);
        let na = nelson_aalen(&ds);
        assert_eq!(na.increments, vec![1.0 / 3.0, 0.5, 1.0]);

        let censored = dataset(&[1.0, 2.0], &[false, false], &[0.0, 1.0]);
        assert!(nelson_aalen(&censored).jump_times.is_empty());

        let mixed = dataset(
            &[1.0, 2.0, 3.0, 4.0],
            &[true, false, true, false],
            &[0.0, 1.0, 2.0, 3.0],
        );
        let na = nelson_aalen(&mixed);
        assert_eq!(na.jump_times, vec![1.0, 3.0]);
        assert_eq!(na.increments, vec![0.25, 0.5]);
    }

    #[test]
    fn all_censored_gives_zero() {
        let ds = dataset(&[1.0, 2.0, 3.0], &[false; 3], &[0.5, -0.5, 1.5]);
        let gram = gram_pair(&ds, &KernelSpec::from_label("lin1").unwrap()).unwrap();
        let s = psi_squared_trace(&ds, &gram).unwrap();
        assert_eq!(s.psi_squared, 0.0);
        assert_eq!(s.n_psi_squared, 0.0);
    }

    #[test]
    fn constant_covariate_kernel_gives_exact_zero() {
        let mut rng = StdRng::seed_from_u64(9);
        let ds = random_dataset(&mut rng, 37, 2, true);
        let spec = KernelSpec::new(CovariateKernel::Constant, TimeKernel::Constant);
        let gram = gram_pair(&ds, &spec).unwrap();
        let s = psi_squared_trace(&ds, &gram).unwrap();
        assert_eq!(s.psi_squared, 0.0);
    }

    #[test]
    fn hand_computed_two_point_value() {
        // T=(1,2), delta=(1,1), X=(0,1), Linear x Constant:
        // expanding the centered kernel by hand gives psi^2 = 1/16.
        let ds = dataset(&[1.0, 2.0], &[true, true], &[0.0, 1.0]);
        let spec = KernelSpec::from_label("lin1").unwrap();
        let gram = gram_pair(&ds, &spec).unwrap();
        let s = psi_squared_trace(&ds, &gram).unwrap();
        assert!((s.psi_squared - 1.0 / 16.0).abs() < 1e-15);
        let d = psi_squared_direct(&ds, &spec).unwrap();
        assert!((d.psi_squared - 1.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn fixed_four_point_trace_matches_direct() {
        let ds = dataset(
            &[1.0, 2.0, 3.0, 4.0],
            &[true, true, false, true],
            &[-1.0, 0.5, 2.0, -0.5],
        );
        let spec = KernelSpec::from_label("lin1").unwrap();
        let gram = gram_pair(&ds, &spec).unwrap();
        let t = psi_squared_trace(&ds, &gram).unwrap();
        let d = psi_squared_direct(&ds, &spec).unwrap();
        let rel = (t.psi_squared - d.psi_squared).abs() / d.psi_squared.max(1e-300);
        assert!(
            rel < 1e-12,
            "trace {} vs direct {}",
            t.psi_squared,
            d.psi_squared
        );
    }

    #[test]
    fn trace_matches_direct_and_dense_for_random_data() {
        let mut rng = StdRng::seed_from_u64(21);
        for case in 0..30 {
            let n = rng.gen_range(3..=40);
            let d = [1usize, 3][case % 2];
            let ds = random_dataset(&mut rng, n, d, case % 3 == 0);
            for spec in all_specs() {
                if matches!(spec.covariate_kernel, CovariateKernel::FisherLinear)
                    && ds.event_count() == 0
                {
                    continue;
                }
                let gram = match gram_pair(&ds, &spec) {
                    Ok(g) => g,
                    // Median heuristic can degenerate on tiny samples.
                    Err(_) => continue,
                };
                let t = psi_squared_trace(&ds, &gram).unwrap();
                let d1 = psi_squared_direct(&ds, &spec).unwrap();
                let d2 = psi_dense(&ds, &gram);
                let scale = t.psi_squared.abs().max(d1.psi_squared.abs()).max(1e-300);
                assert!(
                    (t.psi_squared - d1.psi_squared).abs() / scale < 1e-12,
                    "direct mismatch n={n} case={case} label={}",
                    spec.label()
                );
                assert!(
                    (t.psi_squared - d2).abs() / scale.max(d2.abs()) < 1e-10,
                    "dense mismatch n={n} case={case}"
                );
            }
        }
    }

    #[test]
    fn direct_oracle_respects_cap() {
        let mut rng = StdRng::seed_from_u64(2);
        let ds = random_dataset(&mut rng, DIRECT_ORACLE_CAP + 1, 1, false);
        let err = psi_squared_direct(&ds, &KernelSpec::from_label("lin1").unwrap()).unwrap_err();
        assert!(err.to_string().contains("capped"));
    }

    #[test]
    fn psi_is_nonnegative_and_permutation_invariant() {
        let mut rng = StdRng::seed_from_u64(33);
        for _ in 0..10 {
            let n = rng.gen_range(5..60);
            let ds = random_dataset(&mut rng, n, 2, true);
            let spec = KernelSpec::from_label("gaugau").unwrap();
            let gram = gram_pair(&ds, &spec).unwrap();
            let s = psi_squared_trace(&ds, &gram).unwrap();
            assert!(s.psi_squared >= 0.0);

            // Shuffle the original rows and recompute.
            let mut perm: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                perm.swap(i, rng.gen_range(0..=i));
            }
            let times: Vec<f64> = perm.iter().map(|&i| ds.times()[i]).collect();
            let events: Vec<bool> = perm.iter().map(|&i| ds.events()[i]).collect();
            let mut cov = Array2::zeros((n, 2));
            for (r, &i) in perm.iter().enumerate() {
                cov.row_mut(r).assign(&ds.covariates().row(i));
            }
            let shuffled = canonicalize(&times, &events, &cov).unwrap();
            let gram2 = gram_pair(&shuffled, &spec).unwrap();
            let s2 = psi_squared_trace(&shuffled, &gram2).unwrap();
            assert!(
                (s.psi_squared - s2.psi_squared).abs() <= 1e-10 * s.psi_squared.max(1.0),
                "permutation changed the statistic"
            );
        }
    }

    #[test]
    fn log_rank_zero_weight_and_constant_weight() {
        let mut rng = StdRng::seed_from_u64(4);
        let ds = random_dataset(&mut rng, 30, 1, false);
        let zero = log_rank_statistic(&ds, |_, _| 0.0);
        assert_eq!(zero, 0.0);
        let constant = log_rank_statistic(&ds, |t, _| 2.0 + t);
        assert!(constant.abs() < 1e-13);
    }

    #[test]
    fn log_rank_matches_two_sample_numerator() {
        // Binary groups with weight +1/2 / -1/2 recover the classical
        // log-rank numerator O - E for group 1.
        let mut rng = StdRng::seed_from_u64(15);
        for _ in 0..20 {
            let n = rng.gen_range(6..60);
            let times: Vec<f64> = (0..n)
                .map(|_| (rng.gen_range(1..20) as f64) / 4.0)
                .collect();
            let events: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.7)).collect();
            let groups: Vec<f64> = (0..n)
                .map(|_| if rng.gen_bool(0.5) { 1.0 } else { 0.0 })
                .collect();
            let cov = Array2::from_shape_vec((n, 1), groups.clone()).unwrap();
            let ds = match canonicalize(&times, &events, &cov) {
                Ok(d) => d,
                Err(_) => continue,
            };
            let lr = log_rank_statistic(&ds, |_, x| if x[0] > 0.5 { 0.5 } else { -0.5 });

            // Textbook implementation over distinct event times.
            let mut distinct: Vec<f64> = ds
                .times()
                .iter()
                .zip(ds.events())
                .filter(|(_, &e)| e)
                .map(|(&t, _)| t)
                .collect();
            distinct.dedup();
            let mut o_minus_e = 0.0;
            for &t in &distinct {
                let d1 = ds
                    .times()
                    .iter()
                    .zip(ds.events())
                    .zip(ds.covariates().column(0))
                    .filter(|((&ti, &ei), &g)| ti == t && ei && g > 0.5)
                    .count() as f64;
                let d_all = ds
                    .times()
                    .iter()
                    .zip(ds.events())
                    .filter(|(&ti, &ei)| ti == t && ei)
                    .count() as f64;
                let y1 = ds
                    .times()
                    .iter()
                    .zip(ds.covariates().column(0))
                    .filter(|(&ti, &g)| ti >= t && g > 0.5)
                    .count() as f64;
                let y = ds.times().iter().filter(|&&ti| ti >= t).count() as f64;
                o_minus_e += d1 - d_all * y1 / y;
            }
            assert!(
                (n as f64 * lr - o_minus_e).abs() < 1e-10,
                "log-rank recovery failed: {} vs {}",
                n as f64 * lr,
                o_minus_e
            );
        }
    }

    #[test]
    fn supremum_dominates_unit_norm_sections() {
        let mut rng = StdRng::seed_from_u64(8);
        let ds = random_dataset(&mut rng, 40, 1, false);
        let spec = KernelSpec::new(
            CovariateKernel::Gaussian(BandwidthPolicy::Fixed(0.8)),
            TimeKernel::Gaussian(BandwidthPolicy::Fixed(1.2)),
        );
        let gram = gram_pair(&ds, &spec).unwrap();
        let psi = psi_squared_trace(&ds, &gram).unwrap().psi_squared;
        for pick in [0usize, 7, 23] {
            let t0 = ds.times()[pick];
            let x0 = ds.covariates()[[pick, 0]];
            // Unit-norm kernel section: norm^2 = kernel at the point itself.
            let norm = 1.0f64; // Gaussian product kernel: K(z,z) = 1.
            let lr = log_rank_statistic(&ds, |t, x| {
                let lt = (-(t - t0) * (t - t0) / (2.0 * 1.2)).exp();
                let kx = (-(x[0] - x0) * (x[0] - x0) / (2.0 * 0.8)).exp();
                lt * kx / norm
            });
            assert!(
                lr * lr <= psi + 1e-12,
                "section {pick}: {} > {}",
                lr * lr,
                psi
            );
        }
    }

    #[test]
    fn cox_identity_with_fisher_kernel() {
        let mut rng = StdRng::seed_from_u64(12);
        for _ in 0..5 {
            let n = rng.gen_range(20..80);
            let ds = random_dataset(&mut rng, n, 2, false);
            let gram = gram_pair(&ds, &KernelSpec::from_label("fis1").unwrap()).unwrap();
            let stat = psi_squared_trace(&ds, &gram).unwrap();

            // Independent score and information from literal definitions.
            let times = ds.times();
            let cov = ds.covariates();
            let mut u = [0.0f64; 2];
            for i in 0..n {
                if !ds.events()[i] {
                    continue;
                }
                let mut risk = 0.0;
                let mut mean = [0.0f64; 2];
                for j in 0..n {
                    if times[j] >= times[i] {
                        risk += 1.0;
                        for c in 0..2 {
                            mean[c] += cov[[j, c]];
                        }
                    }
                }
                for c in 0..2 {
                    u[c] += cov[[i, c]] - mean[c] / risk;
                }
            }
            let fisher = crate::kernels::fisher_information(&ds).unwrap();
            let v = &fisher.pseudo_inverse;
            let mut quad = 0.0;
            for a in 0..2 {
                for b in 0..2 {
                    quad += u[a] * v[[a, b]] * u[b];
                }
            }
            let rel = (stat.n_psi_squared - quad).abs() / quad.abs().max(1e-300);
            assert!(
                rel < 1e-8,
                "n_psi {} vs score form {}",
                stat.n_psi_squared,
                quad
            );
        }
    }
}
