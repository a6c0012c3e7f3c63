//! Complex Gaussian belief algebra: products, quotients and log-densities.
//!
//! A belief is stored in moment form `(μ, Σ)`; the natural form
//! `(Σ⁻¹, Σ⁻¹μ)` is derived lazily and cached. Quotients may produce improper
//! beliefs (indefinite Σ); those are flagged rather than rejected, since EP
//! sites are allowed to be improper. All scale factors are carried in the log
//! domain.

use std::sync::OnceLock;

use crate::error::{JuiceError, Result};
use crate::linalg::{self, real, CMat, CVec};

/// Natural parameters of a (possibly improper) complex Gaussian factor.
#[derive(Debug, Clone, PartialEq)]
pub struct NaturalParams {
    /// `Σ⁻¹`
    pub precision: CMat,
    /// `Σ⁻¹ μ`
    pub shift: CVec,
}

impl NaturalParams {
    pub fn new(precision: CMat, shift: CVec) -> Self {
        NaturalParams { precision, shift }
    }

    /// A near-flat factor `CN(0, variance·I)`.
    pub fn flat(dim: usize, variance: f64) -> Self {
        NaturalParams {
            precision: linalg::identity(dim) * real(1.0 / variance),
            shift: CVec::zeros(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    pub fn add(&self, other: &NaturalParams) -> NaturalParams {
        NaturalParams {
            precision: linalg::hermitized(&self.precision + &other.precision),
            shift: &self.shift + &other.shift,
        }
    }

    pub fn sub(&self, other: &NaturalParams) -> NaturalParams {
        NaturalParams {
            precision: linalg::hermitized(&self.precision - &other.precision),
            shift: &self.shift - &other.shift,
        }
    }

    /// `(1−η)·self + η·target`, the linear interpolation used for damping.
    pub fn interpolate(&self, target: &NaturalParams, eta: f64) -> NaturalParams {
        let keep = real(1.0 - eta);
        let take = real(eta);
        NaturalParams {
            precision: linalg::hermitized(&self.precision * keep + &target.precision * take),
            shift: &self.shift * keep + &target.shift * take,
        }
    }

    /// Converts to moment form. Fails when the precision is singular.
    pub fn to_belief(&self) -> Result<GaussianBelief> {
        let cov = linalg::hermitian_inverse(&self.precision)
            .ok_or_else(|| JuiceError::DegenerateBelief("singular precision matrix".into()))?;
        let mean = &cov * &self.shift;
        let belief = GaussianBelief::new(mean, cov);
        let _ = belief.natural.set(Some(self.clone()));
        Ok(belief)
    }
}

/// Complex Gaussian `CN(μ, Σ)` over an `M`-vector.
#[derive(Debug, Clone)]
pub struct GaussianBelief {
    mean: CVec,
    cov: CMat,
    proper: bool,
    natural: OnceLock<Option<NaturalParams>>,
}

impl PartialEq for GaussianBelief {
    fn eq(&self, other: &Self) -> bool {
        self.mean == other.mean && self.cov == other.cov
    }
}

impl GaussianBelief {
    /// Builds a belief; the covariance is Hermitian-symmetrized.
    pub fn new(mean: CVec, cov: CMat) -> Self {
        let cov = linalg::hermitized(cov);
        let proper = linalg::is_positive_definite(&cov);
        GaussianBelief {
            mean,
            cov,
            proper,
            natural: OnceLock::new(),
        }
    }

    pub fn scalar(mean: f64, var: f64) -> Self {
        GaussianBelief::new(CVec::from_element(1, real(mean)), CMat::from_element(1, 1, real(var)))
    }

    pub fn mean(&self) -> &CVec {
        &self.mean
    }

    pub fn cov(&self) -> &CMat {
        &self.cov
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Positive-definite covariance.
    pub fn is_proper(&self) -> bool {
        self.proper
    }

    pub fn natural(&self) -> Result<&NaturalParams> {
        self.natural
            .get_or_init(|| {
                let precision = linalg::hermitian_inverse(&self.cov)?;
                let shift = &precision * &self.mean;
                Some(NaturalParams { precision, shift })
            })
            .as_ref()
            .ok_or_else(|| JuiceError::DegenerateBelief("singular covariance matrix".into()))
    }
}

/// `CN(θ; μ₁, Σ₁)·CN(θ; μ₂, Σ₂) = K_p·CN(θ; μ_p, Σ_p)`, returning the product
/// belief and `log K_p = log CN(μ₁; μ₂, Σ₁+Σ₂)`.
pub fn product(g1: &GaussianBelief, g2: &GaussianBelief) -> Result<(GaussianBelief, f64)> {
    check_dims(g1, g2)?;
    let nat = g1.natural()?.add(g2.natural()?);
    let belief = nat
        .to_belief()
        .map_err(|_| JuiceError::DegenerateBelief("product: combined precision is singular".into()))?;
    let sum = &g1.cov + &g2.cov;
    let log_scale = linalg::log_cn(&g1.mean, &g2.mean, &sum).ok_or_else(|| {
        JuiceError::DegenerateBelief("product: Σ₁+Σ₂ is not positive definite".into())
    })?;
    Ok((belief, log_scale))
}

/// `CN(θ; μ₁, Σ₁) / CN(θ; μ₂, Σ₂) = K_q·CN(θ; μ_q, Σ_q)`.
///
/// The result may be improper. `log K_q` is only returned when `Σ₂ − Σ₁` is
/// positive definite, where
/// `K_q = |Σ₂|² / |Σ₂ − Σ₁|² / CN(μ₁; μ₂, Σ₂ − Σ₁)`.
pub fn quotient(g1: &GaussianBelief, g2: &GaussianBelief) -> Result<(GaussianBelief, Option<f64>)> {
    check_dims(g1, g2)?;
    let nat = g1.natural()?.sub(g2.natural()?);
    let belief = nat
        .to_belief()
        .map_err(|_| JuiceError::DegenerateBelief("quotient: precision difference is singular".into()))?;
    let diff = linalg::hermitized(&g2.cov - &g1.cov);
    let log_scale = linalg::cholesky(&diff).and_then(|chol_diff| {
        let chol2 = linalg::cholesky(&g2.cov)?;
        let log_cn = linalg::log_cn(&g1.mean, &g2.mean, &diff)?;
        Some(2.0 * linalg::chol_log_det(&chol2) - 2.0 * linalg::chol_log_det(&chol_diff) - log_cn)
    });
    Ok((belief, log_scale))
}

/// `log CN(0; μ, Σ) = −M log π − log|Σ| − μᴴ Σ⁻¹ μ`.
pub fn log_density_at_zero(g: &GaussianBelief) -> Result<f64> {
    let zero = CVec::zeros(g.dim());
    linalg::log_cn(&zero, &g.mean, &g.cov)
        .ok_or_else(|| JuiceError::DegenerateBelief("log-density of a non-positive-definite belief".into()))
}

fn check_dims(g1: &GaussianBelief, g2: &GaussianBelief) -> Result<()> {
    if g1.dim() != g2.dim() {
        return Err(JuiceError::dim("gaussian belief dimensions", g1.dim(), g2.dim()));
    }
    Ok(())
}
