//! The LQ environment: a scalar state driven by an `l`-dimensional control
//! through `m` independent Brownian motions,
//!
//! ```text
//! dx = (A x + Bᵀu) dt + Σ_j (C_j x + D_jᵀu) dW_j,
//! ```
//!
//! scored by `E[∫ -½ Q x² dt - ½ H x(T)²]`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Smallest admissible `Σ D_j²` for randomly drawn scalar models.
pub const RANDOM_MODEL_DDT_FLOOR: f64 = 1e-3;

/// Raw model coefficients. Use [`validate_model`] or [`Model::new`] before
/// handing them to anything else.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub a: f64,
    pub b: DVector<f64>,
    pub c: Vec<f64>,
    pub d: Vec<DVector<f64>>,
    pub q: f64,
    pub h: f64,
    pub x0: f64,
    pub horizon: f64,
}

impl ModelParams {
    /// Scalar (`l = m = 1`) model.
    #[allow(clippy::too_many_arguments)]
    pub fn scalar(a: f64, b: f64, c: f64, d: f64, q: f64, h: f64, x0: f64, horizon: f64) -> Self {
        ModelParams {
            a,
            b: DVector::from_element(1, b),
            c: vec![c],
            d: vec![DVector::from_element(1, d)],
            q,
            h,
            x0,
            horizon,
        }
    }

    /// Every coefficient set to one; the setting of the fixed-model experiments.
    pub fn unit() -> Self {
        Self::scalar(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
    }

    pub fn control_dim(&self) -> usize {
        self.b.len()
    }

    pub fn noise_dim(&self) -> usize {
        self.c.len()
    }
}

/// Sums of the diffusion loadings that appear throughout the closed forms.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedModel {
    /// `Σ_j D_j D_jᵀ`.
    pub ddt: DMatrix<f64>,
    /// `Σ_j C_j D_j`.
    pub cd: DVector<f64>,
    pub lambda_max_ddt: f64,
    pub lambda_min_ddt: f64,
    /// `(Σ_j D_j D_jᵀ)⁻¹`.
    pub ddt_inv: DMatrix<f64>,
}

/// Checks the standing assumptions on `p` and caches the derived sums.
pub fn validate_model(p: &ModelParams) -> Result<DerivedModel> {
    let l = p.b.len();
    let m = p.c.len();
    if l == 0 || m == 0 {
        return Err(Error::DimensionMismatch(format!(
            "need l >= 1 and m >= 1, got l = {l}, m = {m}"
        )));
    }
    if p.d.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "{} diffusion vectors D_j for {m} loadings C_j",
            p.d.len()
        )));
    }
    if let Some(j) = p.d.iter().position(|dj| dj.len() != l) {
        return Err(Error::DimensionMismatch(format!(
            "D_{j} has length {}, expected {l}",
            p.d[j].len()
        )));
    }
    let finite = p.a.is_finite()
        && p.x0.is_finite()
        && p.b.iter().all(|v| v.is_finite())
        && p.c.iter().all(|v| v.is_finite())
        && p.d.iter().flat_map(|dj| dj.iter()).all(|v| v.is_finite());
    if !finite {
        return Err(Error::DimensionMismatch("non-finite model coefficient".into()));
    }
    if !(p.q >= 0.0) || !p.q.is_finite() {
        return Err(Error::NegativeWeight { name: "Q", value: p.q });
    }
    if !(p.h >= 0.0) || !p.h.is_finite() {
        return Err(Error::NegativeWeight { name: "H", value: p.h });
    }
    if !(p.horizon > 0.0) || !p.horizon.is_finite() {
        return Err(Error::BadHorizon(p.horizon));
    }

    let mut ddt = DMatrix::zeros(l, l);
    let mut cd = DVector::zeros(l);
    for (cj, dj) in p.c.iter().zip(&p.d) {
        ddt += dj * dj.transpose();
        cd += dj * *cj;
    }
    let eig = ddt.clone().symmetric_eigen();
    let lambda_max = eig.eigenvalues.max();
    let lambda_min = eig.eigenvalues.min();
    if !(lambda_min > f64::EPSILON * lambda_max.max(1.0)) {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: lambda_min,
        });
    }
    let ddt_inv = ddt
        .clone()
        .cholesky()
        .ok_or(Error::NotPositiveDefinite {
            min_eigenvalue: lambda_min,
        })?
        .inverse();

    Ok(DerivedModel {
        ddt,
        cd,
        lambda_max_ddt: lambda_max,
        lambda_min_ddt: lambda_min,
        ddt_inv,
    })
}

/// A validated model: the raw coefficients together with their cached sums.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub params: ModelParams,
    pub derived: DerivedModel,
}

impl Model {
    pub fn new(params: ModelParams) -> Result<Self> {
        let derived = validate_model(&params)?;
        Ok(Model { params, derived })
    }

    pub fn unit() -> Self {
        Model::new(ModelParams::unit()).expect("unit model is valid")
    }

    pub fn control_dim(&self) -> usize {
        self.params.control_dim()
    }

    pub fn noise_dim(&self) -> usize {
        self.params.noise_dim()
    }

    /// Smallest `c_γ` admitted by the temperature rule, doubled.
    pub fn default_c_gamma(&self) -> f64 {
        2.0 * self.derived.lambda_max_ddt
    }
}

/// Gaussian feedback policy `N(φ x, Γ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub phi: DVector<f64>,
    /// Action covariance `Γ`.
    pub cov: DMatrix<f64>,
}

impl PolicyParams {
    pub fn new(phi: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let l = phi.len();
        if cov.nrows() != l || cov.ncols() != l {
            return Err(Error::DimensionMismatch(format!(
                "covariance is {}x{}, gain has length {l}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        if (&cov - cov.transpose()).amax() > 1e-12 * cov.amax().max(1.0) {
            return Err(Error::DimensionMismatch("covariance is not symmetric".into()));
        }
        if cov.clone().cholesky().is_none() {
            return Err(Error::CholeskyFail);
        }
        Ok(PolicyParams { phi, cov })
    }

    pub fn scalar(phi: f64, cov: f64) -> Self {
        PolicyParams {
            phi: DVector::from_element(1, phi),
            cov: DMatrix::from_element(1, 1, cov),
        }
    }

    pub fn control_dim(&self) -> usize {
        self.phi.len()
    }
}

/// Critic parameters `θ` and the temperature `γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticState {
    pub theta: DVector<f64>,
    pub temperature: f64,
}

impl CriticState {
    pub fn new(theta: DVector<f64>, temperature: f64) -> Self {
        CriticState { theta, temperature }
    }

    /// No learnable critic parameters, only a temperature.
    pub fn constant(temperature: f64) -> Self {
        CriticState {
            theta: DVector::zeros(0),
            temperature,
        }
    }
}

/// Draws a scalar model with `A, B, C, D ~ U(-5, 5)` and `Q = H = x0 = T = 1`.
///
/// `D` is redrawn until `D² >= 1e-3` so the result always validates.
pub fn sample_random_model(rng_seed: u64) -> ModelParams {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    // Keep model draws off the stream used for episode noise under the same seed.
    rng.set_stream(1);
    let a = rng.random_range(-5.0..5.0);
    let b = rng.random_range(-5.0..5.0);
    let c = rng.random_range(-5.0..5.0);
    let mut d: f64 = rng.random_range(-5.0..5.0);
    while d * d < RANDOM_MODEL_DDT_FLOOR {
        d = rng.random_range(-5.0..5.0);
    }
    ModelParams::scalar(a, b, c, d, 1.0, 1.0, 1.0, 1.0)
}
