//! EM-EP: expectation propagation with per-cluster spike-and-slab sites and EM
//! updates of the slab hyper-parameters.
//!
//! Vectorized conventions: the stacked channel is `x[i·M + m] = X[m, i]`, the
//! stacked observation `y[t·M + m] = Y[t, m]`, and `Θ = Φ ⊗ I_M`, so the
//! likelihood precision is `(1/σ²)(ΦᴴΦ) ⊗ I_M`.

use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::{JuiceError, Result};
use crate::gaussian::{GaussianBelief, NaturalParams};
use crate::linalg::{self, real, CMat, CVec, ZERO};
use crate::model::{Clusters, Problem};

/// Order in which cluster sites see each other's updates within a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    Serial,
    Parallel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmEpConfig {
    /// Prior probability that a cluster is active.
    pub epsilon: f64,
    /// Site damping in natural parameters; 1 disables damping.
    pub damping: f64,
    pub max_iters: usize,
    /// Relative Frobenius change of the mean matrix that stops the loop.
    pub tol: f64,
    /// Gate posterior below which a cluster is pruned.
    pub prune_threshold: f64,
    /// Relative column energy needed for a UE to be declared active.
    pub activity_threshold: f64,
    /// Inverse-Wishart exponent `d`.
    pub wishart_d: f64,
    /// Variance of the near-flat initial sites.
    pub init_site_variance: f64,
    pub zeta_start: f64,
    pub zeta_attempts: usize,
    /// Keep site precisions that are not positive definite, as long as the
    /// joint posterior stays proper. When off they are jitter-repaired.
    pub negative_sites: bool,
    pub schedule: Schedule,
    /// Plain EP iterations before the M-step and pruning start.
    pub warmup_iters: usize,
    pub m_step: bool,
    /// Weight the M-step by the cluster gate posterior, i.e. fit the slab to
    /// `E[xxᴴ | c_l = 1]`. When off, the marginal second moment is used as is.
    pub gate_weighted_m_step: bool,
    pub prune: bool,
    pub trace: bool,
}

impl Default for EmEpConfig {
    fn default() -> Self {
        EmEpConfig {
            epsilon: 0.1,
            damping: 1.0,
            max_iters: 30,
            tol: 1e-4,
            prune_threshold: 1e-3,
            activity_threshold: 0.05,
            wishart_d: 1.0,
            init_site_variance: 1e6,
            zeta_start: 1e-6,
            zeta_attempts: 6,
            negative_sites: false,
            schedule: Schedule::Serial,
            warmup_iters: 3,
            m_step: true,
            gate_weighted_m_step: true,
            prune: true,
            trace: false,
        }
    }
}

impl EmEpConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(JuiceError::Config(format!("em-ep: {what}")));
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad("epsilon must lie in (0, 1)");
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return bad("damping must lie in (0, 1]");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1");
        }
        if !(self.tol >= 0.0) || !(self.prune_threshold >= 0.0) || !(self.activity_threshold >= 0.0) {
            return bad("thresholds must be nonnegative");
        }
        if !(self.wishart_d > 0.0) {
            return bad("wishart_d must be positive");
        }
        if !(self.init_site_variance > 0.0) || !(self.zeta_start > 0.0) {
            return bad("init_site_variance and zeta_start must be positive");
        }
        Ok(())
    }
}

/// Slab hyper-parameters `γ̄ᵢ`, `R̄_l` plus the fixed gate prior.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HyperParams {
    pub gamma_bar: Vec<f64>,
    /// One shared matrix per cluster.
    pub r_bar: Vec<CMatSer>,
    pub epsilon: f64,
    pub d: f64,
}

/// Serializable wrapper so hyper-parameters can be dumped alongside results.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatSer(pub CMat);

impl Serialize for CMatSer {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = (0..self.0.nrows())
            .map(|i| (0..self.0.ncols()).map(|j| [self.0[(i, j)].re, self.0[(i, j)].im]).collect())
            .collect();
        rows.serialize(s)
    }
}

impl HyperParams {
    pub fn slab(&self, clusters: Clusters, i: usize) -> CMat {
        &self.r_bar[clusters.cluster_of(i)].0 * real(self.gamma_bar[i])
    }
}

#[derive(Debug, Clone)]
pub struct EpState {
    pub m: usize,
    pub sigma2: f64,
    pub clusters: Clusters,
    pub phi: CMat,
    /// `ΦᴴΦ`
    pub gram: CMat,
    /// `ΦᴴY`, row `i` is the matched-filter output of UE `i`.
    pub phi_h_y: CMat,
    pub y: CMat,
    pub b_prior: Vec<CMat>,
    pub site: Vec<NaturalParams>,
    pub mean: Vec<CVec>,
    pub cov: Vec<CMat>,
    pub gate_post: Vec<f64>,
    pub hyper: HyperParams,
    pub live_clusters: Vec<bool>,
}

impl EpState {
    pub fn num_ues(&self) -> usize {
        self.site.len()
    }

    pub fn live_ues(&self) -> Vec<usize> {
        (0..self.clusters.count)
            .filter(|&l| self.live_clusters[l])
            .flat_map(|l| self.clusters.members(l))
            .collect()
    }

    /// Marginal means as an `M × N` matrix.
    pub fn mean_matrix(&self) -> CMat {
        let mut x = CMat::zeros(self.m, self.num_ues());
        for (i, v) in self.mean.iter().enumerate() {
            x.set_column(i, v);
        }
        x
    }
}

pub fn init_state(problem: &Problem, config: &EmEpConfig) -> Result<EpState> {
    problem.validate()?;
    config.validate()?;
    let m = problem.antennas();
    let n = problem.num_ues();
    let clusters = problem.clusters;
    let site = vec![NaturalParams::flat(m, config.init_site_variance); n];
    Ok(EpState {
        m,
        sigma2: problem.sigma2,
        clusters,
        phi: problem.phi.clone(),
        gram: problem.phi.adjoint() * problem.phi,
        phi_h_y: problem.phi.adjoint() * problem.y,
        y: problem.y.clone(),
        b_prior: problem.b_prior.to_vec(),
        site,
        mean: vec![CVec::zeros(m); n],
        cov: vec![linalg::identity(m) * real(config.init_site_variance); n],
        gate_post: vec![config.epsilon; clusters.count],
        hyper: HyperParams {
            gamma_bar: vec![1.0; n],
            r_bar: problem.b_prior.iter().map(|b| CMatSer(b.clone())).collect(),
            epsilon: config.epsilon,
            d: config.wishart_d,
        },
        live_clusters: vec![true; clusters.count],
    })
}

/// Recomputes the global marginals `(mᵢ, Σᵢ)` of all live UEs from the
/// likelihood and the current sites. Pruned UEs get `(0, 0)`.
pub fn global_refresh(state: &mut EpState) -> Result<()> {
    let live = state.live_ues();
    for i in 0..state.num_ues() {
        state.mean[i].fill(ZERO);
        state.cov[i].fill(ZERO);
    }
    if live.is_empty() {
        return Ok(());
    }
    let mut engine = Engine::build(state, &live)?;
    let marginals = engine.marginals(state, &live)?;
    for (&i, (mean, cov)) in live.iter().zip(marginals) {
        state.mean[i] = mean;
        state.cov[i] = cov;
    }
    Ok(())
}

type Marginals = Vec<(CVec, CMat)>;
type Chol = nalgebra::Cholesky<num_complex::Complex64, nalgebra::Dyn>;

fn factor_with_retry(a: CMat, what: &str) -> Result<Chol> {
    if let Some(ch) = linalg::cholesky(&a) {
        return Ok(ch);
    }
    let n = a.nrows();
    linalg::cholesky(&(a + linalg::identity(n) * real(1e-9)))
        .ok_or_else(|| JuiceError::NumericalFailure(format!("{what} is singular even after jitter")))
}

/// Posterior solver over a fixed live set. Marginals can be read for any
/// subset of the live UEs, and sites can be changed a cluster at a time.
enum Engine {
    /// Joint precision over the live UEs, used when they are at most `τ_p`.
    Dense(DenseSolver),
    /// Observation-space covariance, used when the live UEs outnumber `τ_p`.
    Observation(ObservationSolver),
}

impl Engine {
    fn build(state: &EpState, live: &[usize]) -> Result<Engine> {
        if live.len() > state.phi.nrows() {
            if let Some(obs) = ObservationSolver::new(state, live)? {
                return Ok(Engine::Observation(obs));
            }
            debug!("site covariance not invertible; using the dense solve");
        }
        Ok(Engine::Dense(DenseSolver::new(state, live)?))
    }

    fn marginals(&mut self, state: &EpState, ues: &[usize]) -> Result<Marginals> {
        if let Engine::Observation(obs) = self {
            if let Some(out) = obs.marginals(ues) {
                return Ok(out);
            }
            debug!("observation-space marginal indefinite; switching to the dense solve");
            *self = Engine::Dense(DenseSolver::new(state, &obs.live)?);
        }
        match self {
            Engine::Dense(d) => Ok(d.marginals(ues)),
            Engine::Observation(_) => unreachable!(),
        }
    }

    /// Re-reads the sites of `ues` from `state`.
    fn update_sites(&mut self, state: &EpState, ues: &[usize]) -> Result<()> {
        match self {
            Engine::Dense(d) => {
                *d = DenseSolver::new(state, &d.live)?;
            }
            Engine::Observation(obs) => {
                if !obs.update_sites(state, ues)? {
                    debug!("updated site not invertible; switching to the dense solve");
                    *self = Engine::Dense(DenseSolver::new(state, &obs.live)?);
                }
            }
        }
        Ok(())
    }
}

fn position_map(n: usize, live: &[usize]) -> Vec<usize> {
    let mut pos = vec![usize::MAX; n];
    for (a, &i) in live.iter().enumerate() {
        pos[i] = a;
    }
    pos
}

struct DenseSolver {
    live: Vec<usize>,
    pos: Vec<usize>,
    m: usize,
    chol: Chol,
    mean: CVec,
}

impl DenseSolver {
    fn new(state: &EpState, live: &[usize]) -> Result<DenseSolver> {
        let m = state.m;
        let n = live.len();
        let dim = n * m;
        let inv_s2 = 1.0 / state.sigma2;
        let mut p = CMat::zeros(dim, dim);
        let mut rhs = CVec::zeros(dim);
        for (a, &i) in live.iter().enumerate() {
            for (b, &j) in live.iter().enumerate() {
                let g = state.gram[(i, j)] * inv_s2;
                for k in 0..m {
                    p[(a * m + k, b * m + k)] = g;
                }
            }
            let site = &state.site[i];
            for r in 0..m {
                for c in 0..m {
                    p[(a * m + r, a * m + c)] += site.precision[(r, c)];
                }
                rhs[a * m + r] = state.phi_h_y[(i, r)] * inv_s2 + site.shift[r];
            }
        }
        linalg::hermitize(&mut p);
        let chol = factor_with_retry(p, "joint posterior precision")?;
        let mean = chol.solve(&rhs);
        Ok(DenseSolver {
            live: live.to_vec(),
            pos: position_map(state.num_ues(), live),
            m,
            chol,
            mean,
        })
    }

    fn marginals(&self, ues: &[usize]) -> Marginals {
        let m = self.m;
        let dim = self.live.len() * m;
        let mut e = CMat::zeros(dim, ues.len() * m);
        for (k, &i) in ues.iter().enumerate() {
            for r in 0..m {
                e[(self.pos[i] * m + r, k * m + r)] = real(1.0);
            }
        }
        let cols = self.chol.solve(&e);
        ues.iter()
            .enumerate()
            .map(|(k, &i)| {
                let a = self.pos[i];
                let mu = self.mean.rows(a * m, m).into_owned();
                let s = linalg::hermitized(cols.view((a * m, k * m), (m, m)).into_owned());
                (mu, s)
            })
            .collect()
    }
}

/// Works with `K = σ²I + Σᵢ (φᵢφᵢᴴ) ⊗ Sᵢ` (`Sᵢ` the site covariances) and the
/// residual `r = y − Θ m₂`. For UE `i`, with `Wᵢ = φᵢ ⊗ I`,
/// `Tᵢ = Wᵢᴴ K⁻¹ Wᵢ` and `bᵢ = Wᵢᴴ K⁻¹ r`, the marginal is
/// `Σᵢ = Sᵢ − Sᵢ Tᵢ Sᵢ`, `mᵢ = m₂ᵢ + Sᵢ bᵢ`.
struct ObservationSolver {
    live: Vec<usize>,
    pos: Vec<usize>,
    m: usize,
    /// `τ_p × N_live`
    phi: CMat,
    s_site: Vec<CMat>,
    m_site: Vec<CVec>,
    k: CMat,
    resid: CVec,
    chol: Chol,
    /// `K⁻¹ r`
    u: CVec,
}

impl ObservationSolver {
    fn new(state: &EpState, live: &[usize]) -> Result<Option<ObservationSolver>> {
        let m = state.m;
        let tau = state.phi.nrows();
        let n = live.len();
        let mut s_site = Vec::with_capacity(n);
        let mut m_site = Vec::with_capacity(n);
        for &i in live {
            let Some(s) = linalg::hpd_inverse(&state.site[i].precision) else {
                return Ok(None);
            };
            m_site.push(&s * &state.site[i].shift);
            s_site.push(s);
        }
        let phi = CMat::from_fn(tau, n, |t, a| state.phi[(t, live[a])]);
        let phi_h = phi.adjoint();

        let dim = tau * m;
        let mut k = CMat::zeros(dim, dim);
        let mut scaled = phi.clone();
        for r in 0..m {
            for c in r..m {
                for a in 0..n {
                    let w = s_site[a][(r, c)];
                    for t in 0..tau {
                        scaled[(t, a)] = phi[(t, a)] * w;
                    }
                }
                let block = &scaled * &phi_h;
                for t in 0..tau {
                    for s in 0..tau {
                        let v = block[(t, s)];
                        k[(t * m + r, s * m + c)] += v;
                        if c != r {
                            k[(s * m + c, t * m + r)] += v.conj();
                        }
                    }
                }
            }
        }
        for d in 0..dim {
            k[(d, d)] += real(state.sigma2);
        }
        linalg::hermitize(&mut k);

        let m2 = CMat::from_fn(n, m, |a, r| m_site[a][r]);
        let resid_mat = &state.y - &phi * &m2;
        let resid = CVec::from_fn(dim, |row, _| resid_mat[(row / m, row % m)]);

        let chol = factor_with_retry(k.clone(), "observation-space covariance")?;
        let u = chol.solve(&resid);
        Ok(Some(ObservationSolver {
            live: live.to_vec(),
            pos: position_map(state.num_ues(), live),
            m,
            phi,
            s_site,
            m_site,
            k,
            resid,
            chol,
            u,
        }))
    }

    /// Columns `K⁻¹ Wᵢ` for every requested UE, laid out as one `τ_p·M × M`
    /// block per UE.
    fn solve_lifted(&self, ues: &[usize]) -> CMat {
        let m = self.m;
        let tau = self.phi.nrows();
        let dim = tau * m;
        if ues.len() * m <= dim {
            let mut w = CMat::zeros(dim, ues.len() * m);
            for (k, &i) in ues.iter().enumerate() {
                let a = self.pos[i];
                for t in 0..tau {
                    let v = self.phi[(t, a)];
                    for r in 0..m {
                        w[(t * m + r, k * m + r)] = v;
                    }
                }
            }
            return self.chol.solve(&w);
        }
        // many UEs: go through K⁻¹ once, one product per antenna index
        let kinv = self.chol.inverse();
        let cols: Vec<usize> = ues.iter().map(|&i| self.pos[i]).collect();
        let phi_sel = CMat::from_fn(tau, cols.len(), |t, k| self.phi[(t, cols[k])]);
        let mut out = CMat::zeros(dim, ues.len() * m);
        for c in 0..m {
            let sub = CMat::from_fn(dim, tau, |row, s| kinv[(row, s * m + c)]);
            let prod = sub * &phi_sel;
            for k in 0..ues.len() {
                out.column_mut(k * m + c).copy_from(&prod.column(k));
            }
        }
        out
    }

    /// `None` when a marginal comes out indefinite.
    fn marginals(&self, ues: &[usize]) -> Option<Marginals> {
        let m = self.m;
        let tau = self.phi.nrows();
        let kw = self.solve_lifted(ues);
        let mut out = Vec::with_capacity(ues.len());
        for (k, &i) in ues.iter().enumerate() {
            let a = self.pos[i];
            let mut t_mat = CMat::zeros(m, m);
            let mut b = CVec::zeros(m);
            for t in 0..tau {
                let pc = self.phi[(t, a)].conj();
                for r in 0..m {
                    for c in 0..m {
                        t_mat[(r, c)] += pc * kw[(t * m + r, k * m + c)];
                    }
                    b[r] += pc * self.u[t * m + r];
                }
            }
            let s = &self.s_site[a];
            let cov = linalg::hermitized(s - s * t_mat * s);
            if !linalg::is_positive_definite(&cov) {
                return None;
            }
            let mean = &self.m_site[a] + s * b;
            out.push((mean, cov));
        }
        Some(out)
    }

    /// Returns `false` when a new site covariance cannot be formed.
    fn update_sites(&mut self, state: &EpState, ues: &[usize]) -> Result<bool> {
        let m = self.m;
        let tau = self.phi.nrows();
        for &i in ues {
            let a = self.pos[i];
            let Some(s_new) = linalg::hpd_inverse(&state.site[i].precision) else {
                return Ok(false);
            };
            let m_new = &s_new * &state.site[i].shift;
            let ds = &s_new - &self.s_site[a];
            let dm = &m_new - &self.m_site[a];
            for t in 0..tau {
                let pt = self.phi[(t, a)];
                for r in 0..m {
                    self.resid[t * m + r] -= pt * dm[r];
                }
                for s in 0..tau {
                    let g = pt * self.phi[(s, a)].conj();
                    for r in 0..m {
                        for c in 0..m {
                            self.k[(t * m + r, s * m + c)] += g * ds[(r, c)];
                        }
                    }
                }
            }
            self.s_site[a] = s_new;
            self.m_site[a] = m_new;
        }
        linalg::hermitize(&mut self.k);
        self.chol = factor_with_retry(self.k.clone(), "observation-space covariance")?;
        self.u = self.chol.solve(&self.resid);
        Ok(true)
    }
}

/// Adds `ζ·I`, `10ζ·I`, ... to a precision until it is positive definite.
fn repair(a: &CMat, config: &EmEpConfig) -> Option<CMat> {
    linalg::jitter_until_pd(&linalg::hermitized(a.clone()), config.zeta_start, config.zeta_attempts).map(|(r, _)| r)
}

/// Cavity beliefs of the members of cluster `l`, or `None` when one of them
/// cannot be made proper.
pub fn cavity(l: usize, state: &EpState, config: &EmEpConfig) -> Option<Vec<GaussianBelief>> {
    let mut out = Vec::with_capacity(state.clusters.size);
    for i in state.clusters.members(l) {
        let marginal = GaussianBelief::new(state.mean[i].clone(), state.cov[i].clone());
        let Ok(nat) = marginal.natural() else {
            debug!("cluster {l}: marginal of UE {i} is singular");
            return None;
        };
        let diff = nat.sub(&state.site[i]);
        let Some(precision) = repair(&diff.precision, config) else {
            debug!("cluster {l}: cavity of UE {i} could not be repaired");
            return None;
        };
        let cav = NaturalParams::new(precision, diff.shift).to_belief().ok()?;
        out.push(cav);
    }
    Some(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterNormalizer {
    /// `log(ε · Π CN(0; m̂ᵢ, Σ̂ᵢ + Rᵢ))`
    pub log_a: f64,
    /// `log((1−ε) · Π CN(0; m̂ᵢ, Σ̂ᵢ))`
    pub log_b: f64,
    pub log_g: f64,
}

impl ClusterNormalizer {
    /// Posterior probability that the cluster is active.
    pub fn gate(&self) -> f64 {
        if self.log_g == f64::NEG_INFINITY {
            return 0.0;
        }
        (self.log_a - self.log_g).exp().clamp(0.0, 1.0)
    }
}

pub fn cluster_normalizer(cavities: &[GaussianBelief], slabs: &[CMat], epsilon: f64) -> Result<ClusterNormalizer> {
    let zero = CVec::zeros(cavities.first().map(|c| c.dim()).unwrap_or(0));
    let mut log_a = epsilon.ln();
    let mut log_b = (1.0 - epsilon).ln();
    for (cav, r) in cavities.iter().zip(slabs) {
        log_b += linalg::log_cn(&zero, cav.mean(), cav.cov())
            .ok_or_else(|| JuiceError::DegenerateBelief("cavity covariance is not positive definite".into()))?;
        log_a += linalg::log_cn(&zero, cav.mean(), &(cav.cov() + r))
            .ok_or_else(|| JuiceError::DegenerateBelief("slab-plus-cavity covariance is not positive definite".into()))?;
    }
    Ok(ClusterNormalizer {
        log_a,
        log_b,
        log_g: linalg::log_sum_exp(log_a, log_b),
    })
}

#[derive(Debug, Clone)]
pub struct TiltedMoments {
    pub gate: f64,
    pub mean: Vec<CVec>,
    pub cov: Vec<CMat>,
}

/// First two moments of the cluster's tilted distribution, a two-component
/// mixture of the spike (weight `1−w`) and the slab-times-cavity posterior.
pub fn tilted_moments(cavities: &[GaussianBelief], slabs: &[CMat], norm: &ClusterNormalizer) -> Result<TiltedMoments> {
    let w = norm.gate();
    let mut mean = Vec::with_capacity(cavities.len());
    let mut cov = Vec::with_capacity(cavities.len());
    for (cav, r) in cavities.iter().zip(slabs) {
        let chol = linalg::cholesky(&linalg::hermitized(r + cav.cov()))
            .ok_or_else(|| JuiceError::DegenerateBelief("slab-plus-cavity covariance is not positive definite".into()))?;
        let mu = r * chol.solve(cav.mean());
        let c = linalg::hermitized(r - r * chol.solve(r));
        let e = &mu * real(w);
        let v = linalg::hermitized(c * real(w) + linalg::outer(&mu) * real(w * (1.0 - w)));
        mean.push(e);
        cov.push(v);
    }
    Ok(TiltedMoments { gate: w, mean, cov })
}

/// New site natural parameters from the moment-matched tilted distribution,
/// damped towards the old site. A member whose site cannot be made proper
/// keeps its old site.
pub fn update_site(
    l: usize,
    state: &mut EpState,
    tilted: &TiltedMoments,
    cavities: &[GaussianBelief],
    config: &EmEpConfig,
) {
    state.gate_post[l] = tilted.gate;
    for (k, i) in state.clusters.members(l).enumerate() {
        let Some(var) = linalg::jitter_until_pd(&tilted.cov[k], config.zeta_start, config.zeta_attempts)
            .map(|(v, _)| v)
        else {
            debug!("UE {i}: tilted covariance could not be repaired");
            continue;
        };
        let Some(var_inv) = linalg::hpd_inverse(&var) else {
            continue;
        };
        let Ok(cav) = cavities[k].natural() else {
            continue;
        };
        let precision = linalg::hermitized(&var_inv - &cav.precision);
        let shift = &var_inv * &tilted.mean[k] - &cav.shift;
        let repaired = if config.negative_sites && precision.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            Some(precision)
        } else {
            repair(&precision, config)
        };
        let Some(precision) = repaired else {
            debug!("UE {i}: site precision could not be repaired; site kept");
            continue;
        };
        let target = NaturalParams::new(precision, shift);
        state.site[i] = state.site[i].interpolate(&target, config.damping);
    }
}

fn safe_inverse(a: &CMat) -> CMat {
    linalg::hpd_inverse(a).unwrap_or_else(|| {
        let floor = 1e-10 * linalg::trace_re(a).abs().max(1e-300) / a.nrows() as f64;
        linalg::hpd_inverse(&linalg::clip_eigenvalues(a, floor)).expect("clipped matrix is positive definite")
    })
}

/// Closed-form `γ̄ᵢ` maximizing `−wM log γ̄ − tr(R̄⁻¹Q)/γ̄`.
pub fn gamma_bar_update(r_bar_inv: &CMat, second_moment: &CMat, weight: f64) -> f64 {
    let m = second_moment.nrows() as f64;
    (linalg::trace_re(&(r_bar_inv * second_moment)) / (m * weight)).max(0.0)
}

/// Closed-form `R̄` maximizing
/// `−(wL + Ld) log|R̄| − tr(R̄⁻¹(Σᵢ Qᵢ/γ̄ᵢ + L·B))`.
pub fn r_bar_update(second_moments: &[CMat], gamma_bar: &[f64], b: &CMat, weight: f64, d: f64) -> CMat {
    let big_l = second_moments.len() as f64;
    let mut acc = b * real(big_l);
    for (q, &g) in second_moments.iter().zip(gamma_bar) {
        acc += q / real(g.max(1e-10));
    }
    linalg::hermitized(acc / real(weight * big_l + big_l * d))
}

/// EM update of `γ̄ᵢ` and the shared per-cluster `R̄_l`.
pub fn m_step(state: &mut EpState, gate_weighted: bool) {
    let clusters = state.clusters;
    for l in 0..clusters.count {
        if !state.live_clusters[l] {
            continue;
        }
        let w = if gate_weighted { state.gate_post[l].max(1e-10) } else { 1.0 };
        let r_inv = safe_inverse(&state.hyper.r_bar[l].0);
        let second: Vec<CMat> = clusters
            .members(l)
            .map(|i| linalg::outer(&state.mean[i]) + &state.cov[i])
            .collect();
        let mut gammas = Vec::with_capacity(second.len());
        for (k, i) in clusters.members(l).enumerate() {
            let g = gamma_bar_update(&r_inv, &second[k], w);
            state.hyper.gamma_bar[i] = g;
            gammas.push(g);
        }
        let r = r_bar_update(&second, &gammas, &state.b_prior[l], w, state.hyper.d);
        state.hyper.r_bar[l] = CMatSer(r);
    }
}

/// Masks every live cluster whose gate posterior fell below `threshold`.
/// Returns the clusters pruned by this call.
pub fn prune(state: &mut EpState, threshold: f64) -> Vec<usize> {
    let mut pruned = Vec::new();
    for l in 0..state.clusters.count {
        if state.live_clusters[l] && state.gate_post[l] < threshold {
            state.live_clusters[l] = false;
            for i in state.clusters.members(l) {
                state.mean[i].fill(ZERO);
                state.cov[i].fill(ZERO);
            }
            pruned.push(l);
        }
    }
    pruned
}

/// One sweep over the live clusters in ascending order. Returns the number of
/// clusters whose update was skipped.
///
/// With [`Schedule::Serial`] each cluster sees marginals that already include
/// the site updates of the clusters before it; with [`Schedule::Parallel`]
/// every cluster reads the marginals of the last global refresh.
pub fn sweep(state: &mut EpState, config: &EmEpConfig) -> Result<usize> {
    let live = state.live_ues();
    if live.is_empty() {
        return Ok(0);
    }
    let mut engine = match config.schedule {
        Schedule::Serial => Some(Engine::build(state, &live)?),
        Schedule::Parallel => None,
    };
    let mut skipped = 0;
    for l in 0..state.clusters.count {
        if !state.live_clusters[l] {
            continue;
        }
        let members: Vec<usize> = state.clusters.members(l).collect();
        if let Some(engine) = engine.as_mut() {
            let marginals = engine.marginals(state, &members)?;
            for (&i, (mean, cov)) in members.iter().zip(marginals) {
                state.mean[i] = mean;
                state.cov[i] = cov;
            }
        }
        let Some(cavities) = cavity(l, state, config) else {
            skipped += 1;
            continue;
        };
        let slabs: Vec<CMat> = members.iter().map(|&i| state.hyper.slab(state.clusters, i)).collect();
        let norm = cluster_normalizer(&cavities, &slabs, state.hyper.epsilon)?;
        let tilted = tilted_moments(&cavities, &slabs, &norm)?;
        let old: Vec<NaturalParams> = members.iter().map(|&i| state.site[i].clone()).collect();
        let old_gate = state.gate_post[l];
        update_site(l, state, &tilted, &cavities, config);
        if let Some(eng) = engine.as_mut() {
            if let Err(err) = eng.update_sites(state, &members) {
                if !config.negative_sites {
                    return Err(err);
                }
                debug!("cluster {l}: joint posterior improper after the update; sites restored");
                for (&i, site) in members.iter().zip(old) {
                    state.site[i] = site;
                }
                state.gate_post[l] = old_gate;
                skipped += 1;
                engine = Some(Engine::build(state, &live)?);
            }
        }
    }
    Ok(skipped)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmEpIteration {
    pub iteration: usize,
    pub delta: f64,
    pub live_clusters: usize,
    pub gate_post: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct EmEpEstimate {
    /// `M × N`, zero outside the detected support.
    pub x_hat: CMat,
    pub support: Vec<usize>,
    /// Marginal posterior means of every UE, before detection.
    pub mean: CMat,
    pub gate_post: Vec<f64>,
    pub hyper: HyperParams,
    pub live_clusters: Vec<bool>,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<EmEpIteration>,
    /// Final marginal covariances (zero for pruned UEs).
    pub cov: Vec<CMat>,
}

pub fn run_em_ep(problem: &Problem, config: &EmEpConfig) -> Result<EmEpEstimate> {
    let mut state = init_state(problem, config)?;
    global_refresh(&mut state)?;
    let mut prev = state.mean_matrix();
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut settled = false;
    for k in 1..=config.max_iters {
        iterations = k;
        let skipped = sweep(&mut state, config)?;
        if skipped > 0 {
            debug!("iteration {k}: {skipped} cluster updates skipped");
        }
        global_refresh(&mut state)?;
        let warm = settled || k > config.warmup_iters;
        if config.m_step && warm {
            m_step(&mut state, config.gate_weighted_m_step);
        }
        if config.prune && warm {
            let pruned = prune(&mut state, config.prune_threshold);
            if !pruned.is_empty() {
                global_refresh(&mut state)?;
            }
        }
        let current = state.mean_matrix();
        let delta = (&current - &prev).norm();
        let scale = current.norm();
        if config.trace {
            trace.push(EmEpIteration {
                iteration: k,
                delta,
                live_clusters: state.live_clusters.iter().filter(|&&b| b).count(),
                gate_post: state.gate_post.clone(),
            });
        }
        prev = current;
        let small = delta <= config.tol * scale || scale == 0.0;
        let learning = config.m_step || config.prune;
        if small && (warm || !learning) {
            converged = true;
            break;
        }
        // EP has settled before the warm-up ended: start learning now
        settled = settled || small;
    }
    let support = detect(&state, config.activity_threshold);
    let mut x_hat = CMat::zeros(state.m, state.num_ues());
    for &i in &support {
        x_hat.set_column(i, &state.mean[i]);
    }
    Ok(EmEpEstimate {
        x_hat,
        support,
        mean: state.mean_matrix(),
        gate_post: state.gate_post.clone(),
        hyper: state.hyper.clone(),
        live_clusters: state.live_clusters.clone(),
        iterations,
        converged,
        trace,
        cov: state.cov,
    })
}

/// Live UEs whose mean energy is within `threshold` of the strongest one and
/// above the noise floor `σ²`.
fn detect(state: &EpState, threshold: f64) -> Vec<usize> {
    let live = state.live_ues();
    let energy: Vec<f64> = live.iter().map(|&i| state.mean[i].norm_squared()).collect();
    let max = energy.iter().cloned().fold(0.0, f64::max);
    live.into_iter()
        .zip(energy)
        .filter(|&(_, e)| e >= threshold * max && e > state.sigma2)
        .map(|(i, _)| i)
        .collect()
}
