//! Plant models: scalar and vector linear plants `x' = a·x + u + w`, a closed registry
//! of named nonlinear maps `x' = f(x, u) + w`, and priors over the open-loop gain.

use crate::core::{CoreError, Stream, SymmetricMatrix};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// A trial whose true state magnitude crosses this is recorded as diverged (the hijack
/// phase destabilizes the real plant on purpose; the step index is the damage metric).
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Error)]
pub enum PlantError {
    #[error("unknown nonlinear plant '{0}' (available: {1})")]
    UnknownNonlinear(String, &'static str),
    #[error("noise variance must be nonnegative, got {0}")]
    NegativeVariance(f64),
    #[error("gain matrix must be square, got {0}×{1}")]
    NonSquareGain(usize, usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("smoothness bound must be positive, got {0}")]
    NonPositiveSmoothness(f64),
    #[error(transparent)]
    Core(#[from] CoreError),
}

/// Prior over the scalar open-loop gain: either a fixed value or uniform on `[-R, R]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GainPrior {
    Fixed(f64),
    UniformSymmetric { radius: f64 },
}

/// Draw a gain from the prior.
pub fn sample_gain(prior: &GainPrior, stream: &mut Stream) -> f64 {
    match *prior {
        GainPrior::Fixed(a) => a,
        GainPrior::UniformSymmetric { radius } => stream.uniform(-radius, radius),
    }
}

/// Scalar plant `X_{k+1} = a·X_k + U_k + W_k`, `W_k ~ N(0, noise_var)` i.i.d.
///
/// The initial state is `X_0 ~ N(0, init_var)`; by default `init_var = noise_var`
/// (configs echo this choice). The first transition uses `U_0 = 0, W_0 = 0`, so
/// `X_1 = a·X_0` exactly.
#[derive(Clone, Copy, Debug)]
pub struct ScalarPlant {
    pub a: f64,
    pub noise_var: f64,
    pub init_var: f64,
}

impl ScalarPlant {
    pub fn new(a: f64, noise_var: f64, init_var: f64) -> Result<Self, PlantError> {
        if noise_var < 0.0 {
            return Err(PlantError::NegativeVariance(noise_var));
        }
        if init_var < 0.0 {
            return Err(PlantError::NegativeVariance(init_var));
        }
        Ok(Self { a, noise_var, init_var })
    }
}

/// One scalar step, computed exactly as written: `a*x + u + w`.
#[inline]
pub fn step_scalar(plant: &ScalarPlant, x: f64, u: f64, w: f64) -> f64 {
    plant.a * x + u + w
}

/// Vector plant `X_{k+1} = A·X_k + U_k + W_k`, `W ~ N(0, Σ)`.
#[derive(Clone, Debug)]
pub struct VectorPlant {
    pub A: DMatrix<f64>,
    pub noise_cov: SymmetricMatrix,
    pub init_cov: SymmetricMatrix,
}

impl VectorPlant {
    pub fn new(A: DMatrix<f64>, noise_cov: SymmetricMatrix, init_cov: SymmetricMatrix) -> Result<Self, PlantError> {
        if !A.is_square() {
            return Err(PlantError::NonSquareGain(A.nrows(), A.ncols()));
        }
        let n = A.nrows();
        if noise_cov.dim() != n || init_cov.dim() != n {
            return Err(PlantError::DimensionMismatch(format!(
                "gain is {n}×{n} but covariances are {}×{} and {}×{}",
                noise_cov.dim(),
                noise_cov.dim(),
                init_cov.dim(),
                init_cov.dim()
            )));
        }
        let min_noise = noise_cov.min_eigenvalue();
        if min_noise < -1e-9 * (1.0 + noise_cov.trace().abs()) {
            return Err(CoreError::NotPsd { eigenvalue: min_noise }.into());
        }
        Ok(Self { A, noise_cov, init_cov })
    }

    pub fn dim(&self) -> usize {
        self.A.nrows()
    }
}

/// One vector step `A·x + u + w`; all three vectors must share the plant dimension.
pub fn step_vector(
    plant: &VectorPlant,
    x: &DVector<f64>,
    u: &DVector<f64>,
    w: &DVector<f64>,
) -> Result<DVector<f64>, PlantError> {
    let n = plant.dim();
    if x.len() != n || u.len() != n || w.len() != n {
        return Err(PlantError::DimensionMismatch(format!(
            "plant dim {n}, got x:{} u:{} w:{}",
            x.len(),
            u.len(),
            w.len()
        )));
    }
    Ok(&plant.A * x + u + w)
}

/// Nonlinear scalar plant `X_{k+1} = f(X_k, U_k) + W_k` from the closed registry.
///
/// `smoothness` (χ) bounds the complexity of `f` in the model class used by the
/// GP-based bounds; it is carried here so configs keep a single source of truth.
#[derive(Clone, Copy)]
pub struct NonlinearPlant {
    pub name: &'static str,
    f: fn(f64, f64) -> f64,
    pub smoothness: f64,
    pub noise_var: f64,
    pub init_var: f64,
}

impl std::fmt::Debug for NonlinearPlant {
    fn fmt(&self, fm: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        fm.debug_struct("NonlinearPlant")
            .field("name", &self.name)
            .field("smoothness", &self.smoothness)
            .field("noise_var", &self.noise_var)
            .finish()
    }
}

fn quadratic_sine(x: f64, u: f64) -> f64 {
    x * x + x.sin() + u
}

/// Names accepted by [`nonlinear_plant`].
pub const NONLINEAR_REGISTRY: &str = "quadratic-sine";

/// Look up a named nonlinear plant. The registry is closed: an unknown name is a
/// configuration error that names both the request and the available entries.
pub fn nonlinear_plant(
    name: &str,
    smoothness: f64,
    noise_var: f64,
    init_var: f64,
) -> Result<NonlinearPlant, PlantError> {
    if smoothness <= 0.0 {
        return Err(PlantError::NonPositiveSmoothness(smoothness));
    }
    if noise_var < 0.0 {
        return Err(PlantError::NegativeVariance(noise_var));
    }
    if init_var < 0.0 {
        return Err(PlantError::NegativeVariance(init_var));
    }
    let (name, f): (&'static str, fn(f64, f64) -> f64) = match name {
        "quadratic-sine" => ("quadratic-sine", quadratic_sine),
        _ => return Err(PlantError::UnknownNonlinear(name.to_string(), NONLINEAR_REGISTRY)),
    };
    Ok(NonlinearPlant { name, f, smoothness, noise_var, init_var })
}

impl NonlinearPlant {
    /// Evaluate the drift `f(x, u)` without noise.
    #[inline]
    pub fn drift(&self, x: f64, u: f64) -> f64 {
        (self.f)(x, u)
    }
}

/// One nonlinear step `f(x, u) + w`.
#[inline]
pub fn step_nonlinear(plant: &NonlinearPlant, x: f64, u: f64, w: f64) -> f64 {
    plant.drift(x, u) + w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::RandomSource;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn scalar_step_is_the_exact_expression() {
        let p = ScalarPlant::new(1.7, 1.0, 1.0).unwrap();
        let (x, u, w) = (2.5, -1.25, 0.5);
        assert_eq!(step_scalar(&p, x, u, w), 1.7f64 * 2.5 + (-1.25) + 0.5);
    }

    #[test]
    fn nonlinear_step_oracles() {
        let p = nonlinear_plant("quadratic-sine", 1.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(step_nonlinear(&p, 1.0, -1.1, 0.0), 0.7414709848078964, epsilon = 1e-12);
        assert_relative_eq!(step_nonlinear(&p, 2.0, -4.4, 0.5), 1.0092974268256816, epsilon = 1e-12);
    }

    #[test]
    fn nonlinear_registry_is_closed() {
        match nonlinear_plant("cubic-cosine", 1.0, 1.0, 1.0) {
            Err(PlantError::UnknownNonlinear(name, avail)) => {
                assert_eq!(name, "cubic-cosine");
                assert!(avail.contains("quadratic-sine"));
            }
            other => panic!("expected UnknownNonlinear, got {other:?}"),
        }
        assert!(nonlinear_plant("quadratic-sine", 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn constructors_validate() {
        assert!(ScalarPlant::new(1.0, -0.5, 1.0).is_err());
        assert!(ScalarPlant::new(1.0, 1.0, -0.5).is_err());
        let a = DMatrix::from_row_slice(2, 3, &[1.0; 6]);
        assert!(VectorPlant::new(a, SymmetricMatrix::identity(2), SymmetricMatrix::identity(2)).is_err());
        let bad_cov = SymmetricMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).unwrap();
        assert!(VectorPlant::new(DMatrix::identity(2, 2), bad_cov, SymmetricMatrix::identity(2)).is_err());
    }

    #[test]
    fn vector_step_rejects_dim_mismatch() {
        let p = VectorPlant::new(
            DMatrix::identity(2, 2),
            SymmetricMatrix::identity(2),
            SymmetricMatrix::identity(2),
        )
        .unwrap();
        let ok = step_vector(&p, &DVector::zeros(2), &DVector::zeros(2), &DVector::zeros(2));
        assert!(ok.is_ok());
        let bad = step_vector(&p, &DVector::zeros(3), &DVector::zeros(2), &DVector::zeros(2));
        assert!(bad.is_err());
    }

    #[test]
    fn sample_gain_respects_prior() {
        let src = RandomSource::new(31);
        let mut s = src.stream(0);
        assert_eq!(sample_gain(&GainPrior::Fixed(0.88), &mut s), 0.88);
        let prior = GainPrior::UniformSymmetric { radius: 0.9 };
        let mut acc = 0.0;
        for _ in 0..200_000 {
            let g = sample_gain(&prior, &mut s);
            assert!((-0.9..=0.9).contains(&g));
            acc += g;
        }
        assert!((acc / 200_000.0).abs() < 0.01);
    }

    #[test]
    fn closed_loop_second_moment_matches_stationary_value() {
        // x' = (a − Ω)·x + w with a−Ω = 0.4, σ² = 1 ⇒ E[x²] → 1/(1 − 0.16)
        let p = ScalarPlant::new(0.9, 1.0, 1.0).unwrap();
        let omega = 0.5;
        let src = RandomSource::new(4242);
        let mut s = src.stream(0);
        let mut x = s.normal(0.0, p.init_var).unwrap();
        let mut acc = 0.0;
        let n = 100_000usize;
        for _ in 0..n {
            x = step_scalar(&p, x, -omega * x, s.normal(0.0, p.noise_var).unwrap());
            acc += x * x;
        }
        let target = p.noise_var / (1.0 - (p.a - omega) * (p.a - omega));
        let got = acc / n as f64;
        assert!((got - target).abs() / target < 0.05, "got {got}, want {target}");
    }

    proptest! {
        #[test]
        fn scalar_equals_vector_in_dimension_one(
            a in -2.0f64..2.0, x in -10.0f64..10.0, u in -10.0f64..10.0, w in -10.0f64..10.0
        ) {
            let sp = ScalarPlant::new(a, 1.0, 1.0).unwrap();
            let vp = VectorPlant::new(
                DMatrix::from_row_slice(1, 1, &[a]),
                SymmetricMatrix::identity(1),
                SymmetricMatrix::identity(1),
            ).unwrap();
            let s = step_scalar(&sp, x, u, w);
            let v = step_vector(&vp, &DVector::from_column_slice(&[x]),
                                &DVector::from_column_slice(&[u]),
                                &DVector::from_column_slice(&[w])).unwrap();
            prop_assert_eq!(s, v[0]);
        }

        #[test]
        fn linear_plant_superposition(
            a in -2.0f64..2.0,
            x1 in -5.0f64..5.0, u1 in -5.0f64..5.0, w1 in -5.0f64..5.0,
            x2 in -5.0f64..5.0, u2 in -5.0f64..5.0, w2 in -5.0f64..5.0,
        ) {
            let p = ScalarPlant::new(a, 1.0, 1.0).unwrap();
            let lhs = step_scalar(&p, x1 + x2, u1 + u2, w1 + w2);
            let rhs = step_scalar(&p, x1, u1, w1) + step_scalar(&p, x2, u2, w2);
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs().max(rhs.abs())));
        }
    }
}
