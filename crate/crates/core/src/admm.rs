//! corr-MAP-ADMM: MAP estimation of the channels and per-cluster covariances
//! under a log-sum cluster-sparsity penalty. The concave penalty is linearized
//! by majorization-minimization and each linearized problem is solved with
//! ADMM (splitting variables `Z` for the fit and `V` for the covariance term).
//!
//! An outer loop uses cluster-level weights; every `inner_period` outer
//! iterations the active clusters are detected and an inner loop with UE-level
//! weights refines the UEs inside them.

use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::{JuiceError, Result};
use crate::linalg::{self, real, CMat, ZERO};
use crate::model::{Clusters, Problem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    /// `‖xᵢ‖ > ε_thr · max_j ‖x_j‖`
    Relative,
    /// `‖xᵢ‖ > ε_thr`
    Absolute,
}

/// Matrix used in the `V` quadratic `vᴴ W v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VForm {
    /// `W = R⁻¹`, consistent with the covariance update.
    Precision,
    /// `W = R`.
    Covariance,
}

/// Granularity of the outer MM weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// `qᵢ = (Σ_{j∈C_l} ‖x_j‖ + ε₀)⁻¹`, shared by the cluster.
    Cluster,
    /// `qᵢ = (‖xᵢ‖ + ε₀)⁻¹`.
    Ue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdmmConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    pub rho: f64,
    pub eps0: f64,
    pub eps_thr: f64,
    pub threshold_mode: ThresholdMode,
    /// Outer iterations between two inner loops (`K_c`).
    pub inner_period: usize,
    pub k_c_max: usize,
    pub k_u_max: usize,
    /// Relative Frobenius change of `X` that stops the outer loop. With the
    /// inner loop on, the change is measured between successive inner-loop
    /// solutions.
    pub eps_stp: f64,
    /// Inverse-Wishart exponent.
    pub d: f64,
    /// Clamp `αᵢ` at zero.
    pub clamp_alpha: bool,
    pub v_form: VForm,
    pub weighting: Weighting,
    pub inner_loop: bool,
    /// Outer iterations between two refreshes of the MM weights.
    pub reweight_period: usize,
    pub trace: bool,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        AdmmConfig {
            beta1: 0.03,
            beta2: 0.01,
            beta3: 0.01,
            rho: 0.3,
            eps0: 0.1,
            eps_thr: 0.05,
            threshold_mode: ThresholdMode::Relative,
            inner_period: 5,
            k_c_max: 100,
            k_u_max: 15,
            eps_stp: 1e-4,
            d: 1.0,
            clamp_alpha: false,
            v_form: VForm::Precision,
            weighting: Weighting::Cluster,
            inner_loop: true,
            reweight_period: 1,
            trace: false,
        }
    }
}

impl AdmmConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(JuiceError::Config(format!("admm: {what}")));
        if !(self.beta1 >= 0.0 && self.beta2 >= 0.0 && self.beta3 >= 0.0) {
            return bad("beta1, beta2, beta3 must be nonnegative");
        }
        if !(self.rho > 0.0) {
            return bad("rho must be positive");
        }
        if !(self.eps0 > 0.0) {
            return bad("eps0 must be positive");
        }
        if !(self.eps_thr >= 0.0) || !(self.eps_stp >= 0.0) {
            return bad("eps_thr and eps_stp must be nonnegative");
        }
        if self.inner_period == 0 || self.reweight_period == 0 {
            return bad("inner_period and reweight_period must be at least 1");
        }
        if self.k_c_max == 0 {
            return bad("k_c_max must be at least 1");
        }
        if !(self.d > 0.0) {
            return bad("d must be positive");
        }
        if self.beta2 > 0.0 && self.beta3 == 0.0 {
            return bad("beta3 must be positive when beta2 is");
        }
        Ok(())
    }

    fn learns_covariance(&self) -> bool {
        self.beta2 > 0.0 || self.beta3 > 0.0
    }
}

/// Outer MM weights, one per UE and identical inside a cluster.
pub fn mm_weights_outer(x: &CMat, clusters: Clusters, eps0: f64) -> Vec<f64> {
    let norms = linalg::col_norms(x);
    let mut q = vec![0.0; norms.len()];
    for l in 0..clusters.count {
        let total: f64 = clusters.members(l).map(|i| norms[i]).sum();
        let w = 1.0 / (total + eps0);
        for i in clusters.members(l) {
            q[i] = w;
        }
    }
    q
}

/// Inner MM weights `gᵢ = (‖xᵢ‖ + ε₀)⁻¹` for `i ∈ support`, in support order.
pub fn mm_weights_inner(x: &CMat, support: &[usize], eps0: f64) -> Vec<f64> {
    support.iter().map(|&i| 1.0 / (linalg::col_norm(x, i) + eps0)).collect()
}

/// `(ΦᵀΦ* + ρI)⁻¹`. Goes through the `τ_p × τ_p` system when `N > τ_p`.
pub fn gram_inverse(phi: &CMat, rho: f64) -> Result<CMat> {
    let (tau, n) = phi.shape();
    let pt = phi.transpose();
    let pc = phi.conjugate();
    let fail = || JuiceError::NumericalFailure("ADMM Gram matrix is not invertible".into());
    if n > tau {
        let small = linalg::hermitized(&pc * &pt + linalg::identity(tau) * real(rho));
        let inner = linalg::hpd_inverse(&small).ok_or_else(fail)?;
        let out = (linalg::identity(n) - &pt * inner * &pc) / real(rho);
        Ok(linalg::hermitized(out))
    } else {
        linalg::hpd_inverse(&(&pt * &pc + linalg::identity(n) * real(rho))).ok_or_else(fail)
    }
}

/// `Z = (ρX + Λ_z + YᵀΦ*)(ΦᵀΦ* + ρI)⁻¹`.
pub fn z_update(x: &CMat, lam_z: &CMat, yt_phi_conj: &CMat, gram_inv: &CMat, rho: f64) -> CMat {
    (x * real(rho) + lam_z + yt_phi_conj) * gram_inv
}

/// Inverts `R`, adding `1e−9·I` once when it is singular.
fn invert_covariance(r: &CMat) -> Result<CMat> {
    linalg::hpd_inverse(r)
        .or_else(|| linalg::hpd_inverse(&(r + linalg::identity(r.nrows()) * real(1e-9))))
        .ok_or_else(|| JuiceError::NumericalFailure("cluster covariance is not invertible".into()))
}

/// The matrix `W` of the `V` quadratic for one cluster covariance.
pub fn penalty_matrix(r: &CMat, form: VForm) -> Result<CMat> {
    match form {
        VForm::Precision => invert_covariance(r),
        VForm::Covariance => Ok(r.clone()),
    }
}

/// `vᵢ = (β₂W + ρI)⁻¹(ρxᵢ + λ_{v,i})` where column `i` uses `w[owner[i]]`.
pub fn v_update(x: &CMat, lam_v: &CMat, w: &[CMat], owner: &[usize], beta2: f64, rho: f64) -> Result<CMat> {
    let m = x.nrows();
    let solvers: Vec<CMat> = w
        .iter()
        .map(|wl| {
            linalg::hpd_inverse(&linalg::hermitized(wl * real(beta2) + linalg::identity(m) * real(rho)))
                .ok_or_else(|| JuiceError::NumericalFailure("V-update system is not positive definite".into()))
        })
        .collect::<Result<_>>()?;
    let rhs = x * real(rho) + lam_v;
    let mut v = CMat::zeros(m, x.ncols());
    for i in 0..x.ncols() {
        v.set_column(i, &(&solvers[owner[i]] * rhs.column(i)));
    }
    Ok(v)
}

/// `C = ½(Z + V − (Λ_z + Λ_v)/ρ)`.
pub fn combine(z: &CMat, v: &CMat, lam_z: &CMat, lam_v: &CMat, rho: f64) -> CMat {
    (z + v - (lam_z + lam_v) / real(rho)) * real(0.5)
}

/// Group shrinkage minimizing `Σ αᵢ‖xᵢ‖ + ρ‖X − C‖²`.
pub fn x_update(c: &CMat, alpha: &[f64], rho: f64) -> CMat {
    let mut x = c.clone();
    for i in 0..c.ncols() {
        let norm = linalg::col_norm(c, i);
        if alpha[i] <= 0.0 {
            continue;
        }
        let keep = (norm - alpha[i] / (2.0 * rho)).max(0.0);
        if keep == 0.0 || norm == 0.0 {
            x.column_mut(i).fill(ZERO);
        } else {
            x.column_mut(i).scale_mut(keep / norm);
        }
    }
    x
}

/// `αᵢ = β₁qᵢ − β₂ log|R_{l(i)}| qᵢ`.
pub fn alpha_weights(weights: &[f64], log_det: &[f64], owner: &[usize], beta1: f64, beta2: f64, clamp: bool) -> Vec<f64> {
    weights
        .iter()
        .zip(owner)
        .map(|(&q, &l)| {
            let a = beta1 * q - beta2 * log_det[l] * q;
            if clamp {
                a.max(0.0)
            } else {
                a
            }
        })
        .collect()
}

/// `μ_l = β₂ Σᵢ pᵢ^M qᵢ ‖xᵢ‖ + β₃ L d` over the members of one cluster.
pub fn mu_value(weights: &[f64], norms: &[f64], powers: &[f64], m: usize, beta2: f64, beta3: f64, l: usize, d: f64) -> f64 {
    let data: f64 = weights
        .iter()
        .zip(norms)
        .zip(powers)
        .map(|((q, x), p)| p.powi(m as i32) * q * x)
        .sum();
    beta2 * data + beta3 * l as f64 * d
}

/// `R = (β₂ Σᵢ vᵢvᵢᴴ + β₃ L B)/μ`, with `μ` floored at `1e−10`.
pub fn r_update(v_cols: &CMat, mu: f64, b: &CMat, beta2: f64, beta3: f64, l: usize) -> CMat {
    let mut acc = b * real(beta3 * l as f64);
    acc += (v_cols * v_cols.adjoint()) * real(beta2);
    linalg::hermitized(acc / real(mu.max(1e-10)))
}

/// `Λ += ρ(X − other)`.
pub fn dual_update(lam: &mut CMat, x: &CMat, other: &CMat, rho: f64) {
    *lam += (x - other) * real(rho);
}

fn is_above(norm: f64, max: f64, eps_thr: f64, mode: ThresholdMode) -> bool {
    match mode {
        ThresholdMode::Relative => max > 0.0 && norm > eps_thr * max,
        ThresholdMode::Absolute => norm > eps_thr,
    }
}

/// Clusters with at least one column above threshold, and the union of their
/// members.
pub fn detect_active_clusters(x: &CMat, clusters: Clusters, eps_thr: f64, mode: ThresholdMode) -> (Vec<usize>, Vec<usize>) {
    let norms = linalg::col_norms(x);
    let max = norms.iter().cloned().fold(0.0, f64::max);
    let active: Vec<usize> = (0..clusters.count)
        .filter(|&l| clusters.members(l).any(|i| is_above(norms[i], max, eps_thr, mode)))
        .collect();
    let support = active.iter().flat_map(|&l| clusters.members(l)).collect();
    (support, active)
}

fn log_det_hpd(r: &CMat) -> Result<f64> {
    let chol = linalg::cholesky(r)
        .or_else(|| linalg::cholesky(&(r + linalg::identity(r.nrows()) * real(1e-9))))
        .ok_or_else(|| JuiceError::NumericalFailure("cluster covariance is not positive definite".into()))?;
    Ok(linalg::chol_log_det(&chol))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmmIteration {
    pub iteration: usize,
    /// Linearized outer objective at the new iterate.
    pub objective: f64,
    /// `‖X − Z‖_F`
    pub residual_z: f64,
    /// `‖X − V‖_F`
    pub residual_v: f64,
    pub active_clusters: usize,
}

#[derive(Debug, Clone)]
pub struct AdmmEstimate {
    pub x_hat: CMat,
    pub support: Vec<usize>,
    pub r_cl: Vec<CMat>,
    /// Outer iterations run.
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<AdmmIteration>,
}

/// Primal and dual variables of a set of columns.
#[derive(Debug, Clone)]
pub struct AdmmState {
    pub x: CMat,
    pub z: CMat,
    pub v: CMat,
    pub lam_z: CMat,
    pub lam_v: CMat,
    pub r_cl: Vec<CMat>,
}

impl AdmmState {
    fn gather(&self, cols: &[usize]) -> AdmmState {
        let pick = |a: &CMat| CMat::from_fn(a.nrows(), cols.len(), |r, k| a[(r, cols[k])]);
        AdmmState {
            x: pick(&self.x),
            z: pick(&self.z),
            v: pick(&self.v),
            lam_z: pick(&self.lam_z),
            lam_v: pick(&self.lam_v),
            r_cl: self.r_cl.clone(),
        }
    }

    fn scatter(&mut self, cols: &[usize], local: &AdmmState) {
        for (k, &i) in cols.iter().enumerate() {
            self.x.set_column(i, &local.x.column(k));
            self.z.set_column(i, &local.z.column(k));
            self.v.set_column(i, &local.v.column(k));
            self.lam_z.set_column(i, &local.lam_z.column(k));
            self.lam_v.set_column(i, &local.lam_v.column(k));
        }
        self.r_cl.clone_from(&local.r_cl);
    }
}

/// A subproblem over whole clusters: the column set, the cluster of each
/// column and the cached fit quantities.
struct Block {
    cols: Vec<usize>,
    /// Cluster ids covered, ascending.
    cluster_ids: Vec<usize>,
    /// Position in `cluster_ids` of each column's cluster.
    owner: Vec<usize>,
    yt_phi_conj: CMat,
    gram_inv: CMat,
}

impl Block {
    fn new(problem: &Problem, cluster_ids: Vec<usize>, rho: f64) -> Result<Block> {
        let clusters = problem.clusters;
        let mut cols = Vec::new();
        let mut owner = Vec::new();
        for (k, &l) in cluster_ids.iter().enumerate() {
            for i in clusters.members(l) {
                cols.push(i);
                owner.push(k);
            }
        }
        let phi = CMat::from_fn(problem.tau_p(), cols.len(), |t, k| problem.phi[(t, cols[k])]);
        let yt_phi_conj = problem.y.transpose() * phi.conjugate();
        let gram_inv = gram_inverse(&phi, rho)?;
        Ok(Block {
            cols,
            cluster_ids,
            owner,
            yt_phi_conj,
            gram_inv,
        })
    }

    /// One pass of the Z, V, X, R and dual updates with MM weights `weights`
    /// (one per column of the block).
    fn step(&self, st: &mut AdmmState, weights: &[f64], problem: &Problem, cfg: &AdmmConfig) -> Result<()> {
        let m = problem.antennas();
        let size = problem.clusters.size;
        let rho = cfg.rho;
        let learn = cfg.learns_covariance();
        let norms = linalg::col_norms(&st.x);

        let mut log_det = vec![0.0; self.cluster_ids.len()];
        let mut mu = vec![0.0; self.cluster_ids.len()];
        if learn {
            for (k, &l) in self.cluster_ids.iter().enumerate() {
                log_det[k] = log_det_hpd(&st.r_cl[l])?;
                let idx: Vec<usize> = (0..self.cols.len()).filter(|&a| self.owner[a] == k).collect();
                let w: Vec<f64> = idx.iter().map(|&a| weights[a]).collect();
                let nr: Vec<f64> = idx.iter().map(|&a| norms[a]).collect();
                let p: Vec<f64> = idx.iter().map(|&a| problem.power[self.cols[a]]).collect();
                mu[k] = mu_value(&w, &nr, &p, m, cfg.beta2, cfg.beta3, size, cfg.d);
            }
        }
        let alpha = alpha_weights(weights, &log_det, &self.owner, cfg.beta1, cfg.beta2, cfg.clamp_alpha);

        st.z = z_update(&st.x, &st.lam_z, &self.yt_phi_conj, &self.gram_inv, rho);
        let w: Vec<CMat> = if cfg.beta2 > 0.0 {
            self.cluster_ids
                .iter()
                .map(|&l| penalty_matrix(&st.r_cl[l], cfg.v_form))
                .collect::<Result<_>>()?
        } else {
            vec![CMat::zeros(m, m); self.cluster_ids.len()]
        };
        st.v = v_update(&st.x, &st.lam_v, &w, &self.owner, cfg.beta2, rho)?;
        let c = combine(&st.z, &st.v, &st.lam_z, &st.lam_v, rho);
        st.x = x_update(&c, &alpha, rho);
        if learn {
            for (k, &l) in self.cluster_ids.iter().enumerate() {
                let idx: Vec<usize> = (0..self.cols.len()).filter(|&a| self.owner[a] == k).collect();
                let v_cols = CMat::from_fn(m, idx.len(), |r, j| st.v[(r, idx[j])]);
                st.r_cl[l] = r_update(&v_cols, mu[k], &problem.b_prior[l], cfg.beta2, cfg.beta3, size);
            }
        }
        let (x, z, v) = (st.x.clone(), st.z.clone(), st.v.clone());
        dual_update(&mut st.lam_z, &x, &z, rho);
        dual_update(&mut st.lam_v, &x, &v, rho);
        Ok(())
    }
}

fn weights_for(x: &CMat, clusters: Clusters, cfg: &AdmmConfig) -> Vec<f64> {
    match cfg.weighting {
        Weighting::Cluster => mm_weights_outer(x, clusters, cfg.eps0),
        Weighting::Ue => {
            let all: Vec<usize> = (0..x.ncols()).collect();
            mm_weights_inner(x, &all, cfg.eps0)
        }
    }
}

/// The linearized outer objective
/// `½‖Y − ΦXᵀ‖² + β₁Σ qᵢ‖xᵢ‖ + β₂Σ xᵢᴴWxᵢ + Σ_l (μ_l log|R_l| + β₃L tr(B_l R_l⁻¹))`.
pub fn outer_objective(problem: &Problem, x: &CMat, r_cl: &[CMat], q: &[f64], cfg: &AdmmConfig) -> Result<f64> {
    let clusters = problem.clusters;
    let m = problem.antennas();
    let fit = 0.5 * linalg::fro_sq(&(problem.y - problem.phi * x.transpose()));
    let norms = linalg::col_norms(x);
    let mut total = fit + cfg.beta1 * q.iter().zip(&norms).map(|(a, b)| a * b).sum::<f64>();
    if cfg.learns_covariance() {
        for l in 0..clusters.count {
            let members: Vec<usize> = clusters.members(l).collect();
            let w = penalty_matrix(&r_cl[l], cfg.v_form)?;
            let quad: f64 = members.iter().map(|&i| x.column(i).dotc(&(&w * x.column(i))).re).sum();
            let mu = mu_value(
                &members.iter().map(|&i| q[i]).collect::<Vec<_>>(),
                &members.iter().map(|&i| norms[i]).collect::<Vec<_>>(),
                &members.iter().map(|&i| problem.power[i]).collect::<Vec<_>>(),
                m,
                cfg.beta2,
                cfg.beta3,
                clusters.size,
                cfg.d,
            );
            let r_inv = invert_covariance(&r_cl[l])?;
            let tr = linalg::trace_re(&(&problem.b_prior[l] * r_inv));
            total += cfg.beta2 * quad + mu * log_det_hpd(&r_cl[l])? + cfg.beta3 * clusters.size as f64 * tr;
        }
    }
    Ok(total)
}

/// Runs `k_u_max` inner iterations on the clusters in `active` and writes the
/// restricted variables back.
fn inner_loop(problem: &Problem, st: &mut AdmmState, active: &[usize], cfg: &AdmmConfig) -> Result<()> {
    let block = Block::new(problem, active.to_vec(), cfg.rho)?;
    let mut local = st.gather(&block.cols);
    let all: Vec<usize> = (0..block.cols.len()).collect();
    for _ in 0..cfg.k_u_max {
        let g = mm_weights_inner(&local.x, &all, cfg.eps0);
        block.step(&mut local, &g, problem, cfg)?;
    }
    st.scatter(&block.cols, &local);
    Ok(())
}

pub fn run_corr_map_admm(problem: &Problem, cfg: &AdmmConfig) -> Result<AdmmEstimate> {
    problem.validate()?;
    cfg.validate()?;
    let clusters = problem.clusters;
    let n = problem.num_ues();
    let full = Block::new(problem, (0..clusters.count).collect(), cfg.rho)?;

    // ridge start: the Z-update from X = 0, Λ = 0
    let x0 = &full.yt_phi_conj * &full.gram_inv;
    let mut st = AdmmState {
        x: x0.clone(),
        z: x0.clone(),
        v: x0,
        lam_z: CMat::zeros(problem.antennas(), n),
        lam_v: CMat::zeros(problem.antennas(), n),
        r_cl: problem.b_prior.to_vec(),
    };

    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut last_inner: Option<(usize, Vec<usize>)> = None;
    let mut prev_inner: Option<CMat> = None;
    let mut q = Vec::new();
    for k in 1..=cfg.k_c_max {
        iterations = k;
        let prev = st.x.clone();
        if (k - 1) % cfg.reweight_period == 0 {
            q = weights_for(&st.x, clusters, cfg);
        }
        full.step(&mut st, &q, problem, cfg)?;
        let mut n_active = clusters.count;
        if cfg.inner_loop && k % cfg.inner_period == 0 {
            let (_, active) = detect_active_clusters(&st.x, clusters, cfg.eps_thr, cfg.threshold_mode);
            n_active = active.len();
            if !active.is_empty() {
                inner_loop(problem, &mut st, &active, cfg)?;
            }
            last_inner = Some((k, active));
        }
        if cfg.trace {
            trace.push(AdmmIteration {
                iteration: k,
                objective: outer_objective(problem, &st.x, &st.r_cl, &q, cfg)?,
                residual_z: (&st.x - &st.z).norm(),
                residual_v: (&st.x - &st.v).norm(),
                active_clusters: n_active,
            });
        }
        let scale = st.x.norm().max(st.z.norm()).max(st.v.norm());
        if cfg.inner_loop {
            // compare successive inner-loop solutions
            if k % cfg.inner_period != 0 {
                continue;
            }
            let delta = prev_inner.as_ref().map_or(f64::INFINITY, |p| (&st.x - p).norm());
            debug!("admm outer {k}: change since last inner loop {delta:.3e}");
            prev_inner = Some(st.x.clone());
            if delta <= cfg.eps_stp * scale {
                converged = true;
                break;
            }
            continue;
        }
        let delta = (&st.x - &prev).norm();
        let residual = (&st.x - &st.z).norm().max((&st.x - &st.v).norm());
        debug!("admm outer {k}: delta {delta:.3e}, primal residual {residual:.3e}");
        // a zero X with large splitting residuals is not a fixed point yet
        if delta <= cfg.eps_stp * scale && residual <= cfg.eps_stp.sqrt() * scale {
            converged = true;
            break;
        }
    }

    // the estimate always comes out of an inner loop on the current clusters
    let allowed: Vec<usize> = if cfg.inner_loop {
        let active = match last_inner {
            Some((k, active)) if k == iterations => active,
            _ => {
                let (_, active) = detect_active_clusters(&st.x, clusters, cfg.eps_thr, cfg.threshold_mode);
                if !active.is_empty() {
                    inner_loop(problem, &mut st, &active, cfg)?;
                }
                active
            }
        };
        active.iter().flat_map(|&l| clusters.members(l)).collect()
    } else {
        (0..n).collect()
    };

    let norms = linalg::col_norms(&st.x);
    let max = allowed.iter().map(|&i| norms[i]).fold(0.0, f64::max);
    let support: Vec<usize> = allowed
        .into_iter()
        .filter(|&i| is_above(norms[i], max, cfg.eps_thr, cfg.threshold_mode))
        .collect();
    let mut x_hat = CMat::zeros(problem.antennas(), n);
    for &i in &support {
        x_hat.set_column(i, &st.x.column(i));
    }
    Ok(AdmmEstimate {
        x_hat,
        support,
        r_cl: st.r_cl,
        iterations,
        converged,
        trace,
    })
}
