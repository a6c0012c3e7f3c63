//! Reference estimators: the oracle MMSE with known support and covariances,
//! and iterative reweighted ℓ2,1 minimization through the ADMM engine.

use serde::{Deserialize, Serialize};

use crate::admm::{self, AdmmConfig, AdmmEstimate, ThresholdMode, Weighting};
use crate::error::{JuiceError, Result};
use crate::linalg::{self, real, CMat, CVec};
use crate::model::{Problem, Scenario};

/// Side information only a genie has.
#[derive(Debug, Clone, Copy)]
pub struct OracleInfo<'a> {
    pub support: &'a [usize],
    /// Per-UE covariances, indexed by UE.
    pub r_true: &'a [CMat],
    pub power: &'a [f64],
    pub sigma2: f64,
}

impl<'a> OracleInfo<'a> {
    pub fn from_scenario(sc: &'a Scenario) -> Self {
        OracleInfo {
            support: &sc.activity.support,
            r_true: &sc.r_true,
            power: &sc.power,
            sigma2: sc.sigma2,
        }
    }
}

/// Prior precision `(pR)⁻¹`, jittered by `1e−10·tr/M` upwards when `pR` is
/// singular.
fn prior_precision(r: &CMat, p: f64) -> Result<CMat> {
    let m = r.nrows();
    let cov = r * real(p);
    if let Some(inv) = linalg::hpd_inverse(&cov) {
        return Ok(inv);
    }
    let start = (linalg::trace_re(&cov) / m as f64).max(f64::MIN_POSITIVE) * 1e-10;
    let (fixed, _) = linalg::jitter_until_pd(&cov, start, 12)
        .ok_or_else(|| JuiceError::NumericalFailure("oracle prior covariance is not PSD".into()))?;
    linalg::hpd_inverse(&fixed).ok_or_else(|| JuiceError::NumericalFailure("oracle prior is singular".into()))
}

/// Linear MMSE estimate of the columns in the true support, all other
/// columns zero.
pub fn oracle_mmse(y: &CMat, phi: &CMat, oracle: &OracleInfo) -> Result<CMat> {
    let (tau, n) = phi.shape();
    let m = y.ncols();
    if y.nrows() != tau {
        return Err(JuiceError::dim("oracle_mmse: Y rows vs Φ rows", tau, y.nrows()));
    }
    if oracle.r_true.len() != n || oracle.power.len() != n {
        return Err(JuiceError::dim("oracle_mmse: side information length", n, oracle.r_true.len()));
    }
    if let Some(&i) = oracle.support.iter().find(|&&i| i >= n) {
        return Err(JuiceError::Config(format!("oracle support index {i} out of range")));
    }
    if !(oracle.sigma2 > 0.0) {
        return Err(JuiceError::Config("oracle noise variance must be positive".into()));
    }
    let s = oracle.support;
    let mut x_hat = CMat::zeros(m, n);
    if s.is_empty() {
        return Ok(x_hat);
    }
    let k = s.len();
    let phi_s = CMat::from_fn(tau, k, |t, a| phi[(t, s[a])]);
    let gram = phi_s.adjoint() * &phi_s;
    let rhs_cols = y.transpose() * phi_s.conjugate();
    let inv_s2 = 1.0 / oracle.sigma2;

    let mut a = CMat::zeros(k * m, k * m);
    for (b, &i) in s.iter().enumerate() {
        let prec = prior_precision(&oracle.r_true[i], oracle.power[i])?;
        a.view_mut((b * m, b * m), (m, m)).copy_from(&prec);
    }
    for b in 0..k {
        for c in 0..k {
            let g = gram[(b, c)] * inv_s2;
            for r in 0..m {
                a[(b * m + r, c * m + r)] += g;
            }
        }
    }
    let rhs = CVec::from_fn(k * m, |idx, _| rhs_cols[(idx % m, idx / m)] * inv_s2);
    let chol = linalg::cholesky(&linalg::hermitized(a))
        .ok_or_else(|| JuiceError::NumericalFailure("oracle posterior precision is not PD".into()))?;
    let sol = chol.solve(&rhs);
    for (b, &i) in s.iter().enumerate() {
        x_hat.set_column(i, &sol.rows(b * m, m));
    }
    Ok(x_hat)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IrwConfig {
    /// Weight `λ` of the reweighted ℓ2,1 penalty.
    pub lambda: f64,
    pub eps0: f64,
    pub rho: f64,
    /// Relative support threshold.
    pub eps_thr: f64,
    /// ADMM iterations between two reweightings.
    pub reweight_period: usize,
    pub max_iters: usize,
    pub eps_stp: f64,
}

impl Default for IrwConfig {
    fn default() -> Self {
        IrwConfig {
            lambda: 0.6,
            eps0: 1.0,
            rho: 1.0,
            eps_thr: 0.05,
            reweight_period: 20,
            max_iters: 400,
            eps_stp: 1e-4,
        }
    }
}

impl IrwConfig {
    pub fn to_admm(&self) -> AdmmConfig {
        AdmmConfig {
            beta1: self.lambda,
            beta2: 0.0,
            beta3: 0.0,
            rho: self.rho,
            eps0: self.eps0,
            eps_thr: self.eps_thr,
            threshold_mode: ThresholdMode::Relative,
            k_c_max: self.max_iters,
            eps_stp: self.eps_stp,
            weighting: Weighting::Ue,
            inner_loop: false,
            reweight_period: self.reweight_period,
            ..AdmmConfig::default()
        }
    }
}

/// Minimizes `½‖Y − ΦXᵀ‖² + λ Σ wᵢ‖xᵢ‖` with `wᵢ = (‖xᵢ‖ + ε₀)⁻¹` refreshed
/// every `reweight_period` iterations.
pub fn irw_l21(problem: &Problem, cfg: &IrwConfig) -> Result<AdmmEstimate> {
    if !(cfg.lambda >= 0.0) {
        return Err(JuiceError::Config("irw: lambda must be nonnegative".into()));
    }
    admm::run_corr_map_admm(problem, &cfg.to_admm())
}
