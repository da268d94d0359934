//! Numeric kernel: deterministic per-stream randomness, trajectory records, and the
//! symmetric-matrix routines (operator norm, Loewner order, Gaussian sampling) shared by
//! the detector and bounds code.
//!
//! # Randomness model
//!
//! A [`RandomSource`] is nothing but a 64-bit base seed. Every consumer — a trial, a
//! noise channel inside a trial, a grid point of a sweep — derives its own [`Stream`]
//! from the source by *index*, via a SplitMix64 hash chain. Two consequences the rest of
//! the crate relies on:
//!
//! * the same `(seed, index path)` always yields the bit-identical sequence, regardless
//!   of thread count or execution order, and
//! * distinct index paths yield statistically independent streams (ChaCha8 keyed by a
//!   well-mixed 64-bit value; no stream ever shares generator state with another).

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

/// Errors surfaced by the numeric kernel.
#[derive(Debug, Error)]
pub enum CoreError {
    /// A Gaussian sampler was handed a covariance with a genuinely negative eigenvalue.
    #[error("covariance is not positive semidefinite (offending eigenvalue {eigenvalue:.6e})")]
    NotPsd { eigenvalue: f64 },
    /// Scalar variance below zero.
    #[error("variance must be nonnegative, got {0}")]
    NegativeVariance(f64),
    /// Incompatible shapes.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    /// A matrix that must be symmetric is not, beyond tolerance.
    #[error("matrix is not symmetric (max asymmetry {0:.3e})")]
    NotSymmetric(f64),
}

/// One round of the SplitMix64 mixer. Passes standard avalanche tests; used here purely
/// as a deterministic hash, never as the generator itself.
#[inline]
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Order-sensitive hash of an index path onto a single 64-bit stream key.
pub fn mix_indices(seed: u64, path: &[u64]) -> u64 {
    let mut acc = splitmix64(seed);
    for &p in path {
        acc = splitmix64(acc ^ splitmix64(p.wrapping_add(0xA5A5_A5A5_A5A5_A5A5)));
    }
    acc
}

/// Base seed plus stream derivation. Copy-cheap; hand one to anything that needs noise.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RandomSource {
    seed: u64,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Stream `id` of this source. Same `(seed, id)` ⇒ bit-identical stream.
    pub fn stream(&self, id: u64) -> Stream {
        self.stream_path(&[id])
    }

    /// Stream addressed by a hierarchical index path, e.g. `[grid_index, trial_index]`.
    pub fn stream_path(&self, path: &[u64]) -> Stream {
        let key = mix_indices(self.seed, path);
        Stream {
            rng: ChaCha8Rng::seed_from_u64(key),
        }
    }

    /// Child source for a sub-experiment (a grid point, a bounds pass, …). Derivation is
    /// by hashing, so children never collide with streams drawn from the parent.
    pub fn child(&self, id: u64) -> RandomSource {
        RandomSource {
            seed: mix_indices(self.seed, &[0xC0AC_0AC0, id]),
        }
    }
}

/// A single independent random stream (ChaCha8 behind the scenes).
#[derive(Clone, Debug)]
pub struct Stream {
    rng: ChaCha8Rng,
}

impl Stream {
    /// One draw from N(0, 1).
    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// One draw from N(mean, var). `var = 0` returns `mean` exactly.
    pub fn normal(&mut self, mean: f64, var: f64) -> Result<f64, CoreError> {
        if var < 0.0 {
            return Err(CoreError::NegativeVariance(var));
        }
        Ok(mean + var.sqrt() * self.standard_normal())
    }

    /// Uniform draw on the closed interval `[lo, hi]`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.random_range(lo..=hi)
    }

    /// Raw access for distributions not wrapped here.
    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// Draw `x ~ N(mean, cov)`.
///
/// The covariance must be positive semidefinite up to `-1e-9·(1 + |trace|)`; a genuinely
/// negative eigenvalue is an error that names the eigenvalue. Zero mean and zero
/// covariance produce the zero vector exactly.
///
/// For a *diagonal* covariance the factor is taken componentwise (`√cov_ii`), so the
/// draw agrees bit-for-bit with scaling independent scalar draws from the same stream —
/// a property the test suite pins down.
pub fn gaussian_sample(
    mean: &DVector<f64>,
    cov: &SymmetricMatrix,
    stream: &mut Stream,
) -> Result<DVector<f64>, CoreError> {
    let n = mean.len();
    if cov.dim() != n {
        return Err(CoreError::DimensionMismatch(format!(
            "mean has length {n}, covariance is {}×{}",
            cov.dim(),
            cov.dim()
        )));
    }
    let z = DVector::from_fn(n, |_, _| stream.standard_normal());
    if cov.is_diagonal() {
        let mut out = mean.clone();
        for i in 0..n {
            let v = cov.as_matrix()[(i, i)];
            if v < 0.0 {
                return Err(CoreError::NotPsd { eigenvalue: v });
            }
            out[i] += v.sqrt() * z[i];
        }
        return Ok(out);
    }
    let eig = cov.as_matrix().clone().symmetric_eigen();
    let tol = 1e-9 * (1.0 + cov.trace().abs());
    let mut lam_sqrt = eig.eigenvalues.clone();
    for lam in lam_sqrt.iter_mut() {
        if *lam < -tol {
            return Err(CoreError::NotPsd { eigenvalue: *lam });
        }
        *lam = lam.max(0.0).sqrt();
    }
    Ok(mean + &eig.eigenvectors * DVector::from_fn(n, |i, _| lam_sqrt[i] * z[i]))
}

/// Square matrix constrained to be symmetric. Construction symmetrizes the input after
/// checking the asymmetry is within `1e-9·(1 + max|entry|)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricMatrix {
    m: DMatrix<f64>,
}

impl SymmetricMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self, CoreError> {
        if !m.is_square() {
            return Err(CoreError::DimensionMismatch(format!(
                "expected square matrix, got {}×{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let scale = m.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
        let asym = (&m - m.transpose()).iter().fold(0.0f64, |a, &x| a.max(x.abs()));
        if asym > 1e-9 * (1.0 + scale) {
            return Err(CoreError::NotSymmetric(asym));
        }
        let sym = (&m + m.transpose()) * 0.5;
        Ok(Self { m: sym })
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self {
            m: DMatrix::from_diagonal(&DVector::from_column_slice(diag)),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            m: DMatrix::identity(n, n),
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            m: DMatrix::zeros(n, n),
        }
    }

    pub fn scaled_identity(n: usize, s: f64) -> Self {
        Self {
            m: DMatrix::identity(n, n) * s,
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn trace(&self) -> f64 {
        self.m.trace()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn is_diagonal(&self) -> bool {
        let n = self.dim();
        for i in 0..n {
            for j in 0..n {
                if i != j && self.m[(i, j)] != 0.0 {
                    return false;
                }
            }
        }
        true
    }
}

/// Largest singular value of an arbitrary (possibly rectangular) matrix.
///
/// Computed as `√λ_max(GᵀG)` from the symmetric eigendecomposition of the smaller Gram
/// matrix, after scaling by the largest absolute entry so that squaring cannot overflow
/// for inputs up to ~1e150. Matches a full SVD to 1e-10 relative accuracy on the sizes
/// used here (n ≤ 64). Non-finite entries yield `+∞`, which downstream detectors treat
/// as an alarm.
pub fn operator_norm(m: &DMatrix<f64>) -> f64 {
    if m.iter().any(|x| !x.is_finite()) {
        return f64::INFINITY;
    }
    let scale = m.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    let s = m / scale;
    let gram = if m.nrows() <= m.ncols() {
        &s * s.transpose()
    } else {
        s.transpose() * &s
    };
    let lam_max = gram
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(0.0f64, |a, &x| a.max(x));
    scale * lam_max.max(0.0).sqrt()
}

/// Loewner comparison `A ⪰ B`: true iff `λ_min(A − B) ≥ −ε` with
/// `ε = 1e-9·(1 + max(|tr A|, |tr B|))`.
pub fn loewner_geq(a: &SymmetricMatrix, b: &SymmetricMatrix) -> Result<bool, CoreError> {
    if a.dim() != b.dim() {
        return Err(CoreError::DimensionMismatch(format!(
            "loewner_geq: {}×{} vs {}×{}",
            a.dim(),
            a.dim(),
            b.dim(),
            b.dim()
        )));
    }
    let diff = SymmetricMatrix::new(a.as_matrix() - b.as_matrix())?;
    let eps = 1e-9 * (1.0 + a.trace().abs().max(b.trace().abs()));
    Ok(diff.min_eigenvalue() >= -eps)
}

/// Full record of one closed-loop run.
///
/// Index conventions, with `T` the detector's test time:
///
/// * `states[k]`       = X_k for k = 0..=T+1 (one step past T, for the last residual);
/// * `controls[k]`     = U_k for k = 0..=T, with U_0 = 0 by convention;
/// * `observations[k]` = Y_{k+1} for k = 0..=T (Y_1..Y_{T+1}); equals the true state
///   whenever that step was not hijacked;
/// * `disturbances[k]` = W_{k+1} (W_0 = 0 by convention and is not stored);
/// * `hijacked[k]`     aligns with `observations`.
#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub controls: Vec<Vec<f64>>,
    pub observations: Vec<Vec<f64>>,
    pub disturbances: Vec<Vec<f64>>,
    pub hijacked: Vec<bool>,
}

impl Trajectory {
    pub fn with_capacity(horizon: usize) -> Self {
        Self {
            states: Vec::with_capacity(horizon + 2),
            controls: Vec::with_capacity(horizon + 1),
            observations: Vec::with_capacity(horizon + 1),
            disturbances: Vec::with_capacity(horizon + 1),
            hijacked: Vec::with_capacity(horizon + 1),
        }
    }

    /// Structural hijack indicator: true iff any recorded observation differs from the
    /// true state at the same index.
    pub fn any_observation_differs(&self) -> bool {
        self.observations
            .iter()
            .enumerate()
            .any(|(i, y)| match self.states.get(i + 1) {
                Some(x) => x != y,
                None => true,
            })
    }

    /// As recorded by the simulation loop.
    pub fn any_hijack_flag(&self) -> bool {
        self.hijacked.iter().any(|&h| h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn same_seed_same_stream_is_bit_identical() {
        let src = RandomSource::new(0xDEADBEEF);
        let mut a = src.stream(42);
        let mut b = src.stream(42);
        for _ in 0..256 {
            assert_eq!(a.standard_normal().to_bits(), b.standard_normal().to_bits());
        }
    }

    #[test]
    fn distinct_streams_differ() {
        let src = RandomSource::new(7);
        let mut a = src.stream(1);
        let mut b = src.stream(2);
        let xs: Vec<f64> = (0..32).map(|_| a.standard_normal()).collect();
        let ys: Vec<f64> = (0..32).map(|_| b.standard_normal()).collect();
        assert_ne!(xs, ys);
        // and child sources do not collide with parent streams
        let mut c = src.child(1).stream(1);
        let zs: Vec<f64> = (0..32).map(|_| c.standard_normal()).collect();
        assert_ne!(xs, zs);
    }

    #[test]
    fn path_derivation_is_order_sensitive() {
        let src = RandomSource::new(1234);
        let mut a = src.stream_path(&[1, 2]);
        let mut b = src.stream_path(&[2, 1]);
        assert_ne!(a.standard_normal(), b.standard_normal());
    }

    #[test]
    fn normal_zero_variance_is_exact_mean() {
        let src = RandomSource::new(5);
        let mut s = src.stream(0);
        assert_eq!(s.normal(3.25, 0.0).unwrap(), 3.25);
        assert!(s.normal(0.0, -1.0).is_err());
    }

    #[test]
    fn gaussian_sample_zero_mean_zero_cov_is_exactly_zero() {
        let src = RandomSource::new(9);
        let mut s = src.stream(0);
        let x = gaussian_sample(&DVector::zeros(3), &SymmetricMatrix::zeros(3), &mut s).unwrap();
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gaussian_sample_rejects_non_psd_and_names_eigenvalue() {
        let src = RandomSource::new(11);
        let mut s = src.stream(0);
        // eigenvalues of [[1,2],[2,1]] are 3 and −1
        let cov = SymmetricMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).unwrap();
        match gaussian_sample(&DVector::zeros(2), &cov, &mut s) {
            Err(CoreError::NotPsd { eigenvalue }) => assert_relative_eq!(eigenvalue, -1.0, epsilon = 1e-12),
            other => panic!("expected NotPsd, got {other:?}"),
        }
    }

    #[test]
    fn gaussian_sample_moments_over_a_million_draws() {
        let src = RandomSource::new(2024);
        let mut s = src.stream(0);
        let cov = SymmetricMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.6, 0.6, 2.0])).unwrap();
        let mean = DVector::from_column_slice(&[0.0, 0.0]);
        let n = 1_000_000usize;
        let mut m = [0.0f64; 2];
        let mut q = [0.0f64; 3]; // xx, yy, xy
        for _ in 0..n {
            let x = gaussian_sample(&mean, &cov, &mut s).unwrap();
            m[0] += x[0];
            m[1] += x[1];
            q[0] += x[0] * x[0];
            q[1] += x[1] * x[1];
            q[2] += x[0] * x[1];
        }
        let nf = n as f64;
        assert!(m[0].abs() / nf < 4e-3, "mean0 {}", m[0] / nf);
        assert!(m[1].abs() / nf < 4e-3 * 2.0f64.sqrt(), "mean1 {}", m[1] / nf);
        assert!((q[0] / nf - 1.0).abs() < 0.01, "var0 {}", q[0] / nf);
        assert!((q[1] / nf - 2.0).abs() < 0.02, "var1 {}", q[1] / nf);
        assert!((q[2] / nf - 0.6).abs() < 0.01, "cov {}", q[2] / nf);
    }

    #[test]
    fn diagonal_sampling_matches_componentwise_scalar_draws() {
        let cov = SymmetricMatrix::from_diagonal(&[4.0, 0.25, 1.0]);
        let mean = DVector::from_column_slice(&[1.0, -2.0, 0.0]);
        let src = RandomSource::new(77);
        let mut a = src.stream(3);
        let mut b = src.stream(3);
        for _ in 0..100 {
            let x = gaussian_sample(&mean, &cov, &mut a).unwrap();
            let want = [
                1.0 + 2.0 * b.standard_normal(),
                -2.0 + 0.5 * b.standard_normal(),
                b.standard_normal(),
            ];
            for i in 0..3 {
                assert_eq!(x[i].to_bits(), want[i].to_bits());
            }
        }
    }

    #[test]
    fn operator_norm_known_values() {
        let d = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, -4.0]);
        assert_relative_eq!(operator_norm(&d), 4.0, max_relative = 1e-12);
        let nilpotent = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 0.0, 0.0]);
        assert_relative_eq!(operator_norm(&nilpotent), 2.0, max_relative = 1e-12);
        assert_eq!(operator_norm(&DMatrix::<f64>::zeros(3, 3)), 0.0);
        let inf = DMatrix::from_row_slice(1, 1, &[f64::INFINITY]);
        assert_eq!(operator_norm(&inf), f64::INFINITY);
        let nan = DMatrix::from_row_slice(1, 1, &[f64::NAN]);
        assert_eq!(operator_norm(&nan), f64::INFINITY);
    }

    #[test]
    fn operator_norm_survives_extreme_scales() {
        let m = DMatrix::from_row_slice(2, 2, &[1e60, 2e60, 3e60, 4e60]);
        let base = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_relative_eq!(operator_norm(&m), 1e60 * operator_norm(&base), max_relative = 1e-10);
        let tiny = &base * 1e-200;
        assert_relative_eq!(operator_norm(&tiny), 1e-200 * operator_norm(&base), max_relative = 1e-10);
    }

    #[test]
    fn loewner_geq_basics() {
        let i = SymmetricMatrix::identity(2);
        let h = SymmetricMatrix::scaled_identity(2, 0.5);
        assert!(loewner_geq(&i, &h).unwrap());
        assert!(!loewner_geq(&h, &i).unwrap());
        // ties allowed within tolerance
        assert!(loewner_geq(&i, &i).unwrap());
        assert!(loewner_geq(&SymmetricMatrix::identity(2), &SymmetricMatrix::scaled_identity(2, 1.0 + 1e-12)).unwrap());
        assert!(loewner_geq(&i, &SymmetricMatrix::identity(3)).is_err());
    }

    #[test]
    fn symmetric_matrix_rejects_asymmetry() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(SymmetricMatrix::new(m).is_err());
    }

    #[test]
    fn trajectory_structural_hijack_check() {
        let mut t = Trajectory::with_capacity(2);
        t.states = vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]];
        t.controls = vec![vec![0.0], vec![0.1], vec![0.2]];
        t.observations = vec![vec![1.0], vec![2.0], vec![3.0]];
        t.hijacked = vec![false, false, false];
        assert!(!t.any_observation_differs());
        t.observations[2] = vec![99.0];
        assert!(t.any_observation_differs());
    }

    fn small_matrix() -> impl Strategy<Value = DMatrix<f64>> {
        (1usize..5, 1usize..5).prop_flat_map(|(r, c)| {
            proptest::collection::vec(-10.0f64..10.0, r * c)
                .prop_map(move |v| DMatrix::from_row_slice(r, c, &v))
        })
    }

    fn small_square() -> impl Strategy<Value = DMatrix<f64>> {
        (1usize..5).prop_flat_map(|n| {
            proptest::collection::vec(-10.0f64..10.0, n * n)
                .prop_map(move |v| DMatrix::from_row_slice(n, n, &v))
        })
    }

    proptest! {
        #[test]
        fn opnorm_equals_transpose_opnorm(m in small_matrix()) {
            let a = operator_norm(&m);
            let b = operator_norm(&m.transpose());
            prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.max(b)));
        }

        #[test]
        fn opnorm_is_submultiplicative(a in small_square(), b in small_square()) {
            prop_assume!(a.ncols() == b.nrows());
            let ab = &a * &b;
            prop_assert!(operator_norm(&ab) <= operator_norm(&a) * operator_norm(&b) + 1e-9);
        }

        #[test]
        fn opnorm_matches_svd_oracle(m in small_matrix()) {
            let ours = operator_norm(&m);
            let svd = m.clone().svd(false, false);
            let truth = svd.singular_values.iter().fold(0.0f64, |acc, &s| acc.max(s));
            prop_assert!((ours - truth).abs() <= 1e-10 * (1.0 + truth), "ours {ours} svd {truth}");
        }

        #[test]
        fn loewner_geq_shift_by_identity(m in small_square()) {
            let sym = SymmetricMatrix::new((&m + m.transpose()) * 0.5).unwrap();
            let shifted = SymmetricMatrix::new(sym.as_matrix() + DMatrix::identity(m.nrows(), m.nrows())).unwrap();
            prop_assert!(loewner_geq(&shifted, &sym).unwrap());
        }
    }
}
