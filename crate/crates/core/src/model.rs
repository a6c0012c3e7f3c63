//! Synthetic scenario generation: cluster layout, spatial covariances,
//! activity patterns, pilots, effective channels and the received pilot
//! signal `Y = Φ Xᵀ + W`.

use std::f64::consts::PI;
use std::ops::Range;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{JuiceError, Result};
use crate::linalg::{self, c, real, CMat, CVec};

/// How the `K` active UEs are placed over the clusters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ActivityMode {
    /// `active_clusters` clusters, each with exactly `per_cluster_active` active UEs.
    Clustered {
        active_clusters: usize,
        per_cluster_active: usize,
    },
    /// `K` UEs drawn uniformly from the whole population.
    Independent,
}

fn default_spread() -> f64 {
    10.0
}
fn default_jitter() -> f64 {
    2.0
}
fn default_mismatch() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Total number of UEs `N`.
    pub num_ues: usize,
    /// Number of clusters `N_c`.
    pub num_clusters: usize,
    /// UEs per cluster `L`.
    pub cluster_size: usize,
    /// BS antennas `M`.
    pub antennas: usize,
    /// Pilot length in symbols.
    pub tau_p: usize,
    /// Total number of active UEs `K`.
    pub num_active: usize,
    pub activity: ActivityMode,
    pub snr_db: f64,
    #[serde(default = "default_spread")]
    pub angular_spread_deg: f64,
    #[serde(default = "default_jitter")]
    pub angle_jitter_deg: f64,
    /// Mixing weight of the random matrix in the covariance prior `B_l`.
    #[serde(default = "default_mismatch")]
    pub cov_mismatch: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for ScenarioConfig {
    /// N=200 UEs in 20 clusters of 10, 16 active UEs spread over two clusters,
    /// M=4, τ_p=24, 16 dB.
    fn default() -> Self {
        ScenarioConfig {
            num_ues: 200,
            num_clusters: 20,
            cluster_size: 10,
            antennas: 4,
            tau_p: 24,
            num_active: 16,
            activity: ActivityMode::Clustered {
                active_clusters: 2,
                per_cluster_active: 8,
            },
            snr_db: 16.0,
            angular_spread_deg: default_spread(),
            angle_jitter_deg: default_jitter(),
            cov_mismatch: default_mismatch(),
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(JuiceError::Config(msg));
        if self.cluster_size == 0 || self.num_clusters == 0 {
            return fail("cluster_size and num_clusters must be positive".into());
        }
        if self.num_ues != self.cluster_size * self.num_clusters {
            return fail(format!(
                "num_ues ({}) must equal cluster_size·num_clusters ({}·{})",
                self.num_ues, self.cluster_size, self.num_clusters
            ));
        }
        if self.num_active > self.num_ues {
            return fail(format!(
                "num_active ({}) exceeds num_ues ({})",
                self.num_active, self.num_ues
            ));
        }
        if self.tau_p == 0 {
            return fail("tau_p must be at least 1".into());
        }
        if self.antennas == 0 {
            return fail("antennas must be at least 1".into());
        }
        if !(self.angular_spread_deg > 0.0) {
            return fail("angular_spread_deg must be positive".into());
        }
        if !(self.angle_jitter_deg >= 0.0) {
            return fail("angle_jitter_deg must be non-negative".into());
        }
        if !(0.0..=1.0).contains(&self.cov_mismatch) {
            return fail("cov_mismatch must lie in [0, 1]".into());
        }
        if !self.snr_db.is_finite() {
            return fail("snr_db must be finite".into());
        }
        if let ActivityMode::Clustered {
            active_clusters,
            per_cluster_active,
        } = self.activity
        {
            if active_clusters * per_cluster_active != self.num_active {
                return fail(format!(
                    "active_clusters·per_cluster_active ({}·{}) must equal num_active ({})",
                    active_clusters, per_cluster_active, self.num_active
                ));
            }
            if per_cluster_active > self.cluster_size {
                return fail(format!(
                    "per_cluster_active ({}) exceeds cluster_size ({})",
                    per_cluster_active, self.cluster_size
                ));
            }
            if active_clusters > self.num_clusters {
                return fail(format!(
                    "active_clusters ({}) exceeds num_clusters ({})",
                    active_clusters, self.num_clusters
                ));
            }
        }
        Ok(())
    }

    pub fn clusters(&self) -> Clusters {
        Clusters {
            count: self.num_clusters,
            size: self.cluster_size,
        }
    }

    /// Noise variance; unit-gain effective channels make this `10^(−SNR/10)`.
    pub fn sigma2(&self) -> f64 {
        10f64.powf(-self.snr_db / 10.0)
    }

    /// Expected fraction of clusters holding at least one active UE.
    pub fn expected_active_cluster_fraction(&self) -> f64 {
        match self.activity {
            ActivityMode::Clustered {
                active_clusters, ..
            } => active_clusters as f64 / self.num_clusters as f64,
            ActivityMode::Independent => {
                // P(cluster silent) = C(N−L, K) / C(N, K)
                let (n, l, k) = (self.num_ues, self.cluster_size, self.num_active);
                if k + l > n {
                    return 1.0;
                }
                let silent: f64 = (0..k)
                    .map(|j| (n - l - j) as f64 / (n - j) as f64)
                    .product();
                1.0 - silent
            }
        }
    }
}

/// Partition of `{0..N}` into consecutive equal-size clusters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Clusters {
    pub count: usize,
    pub size: usize,
}

impl Clusters {
    pub fn new(count: usize, size: usize) -> Self {
        Clusters { count, size }
    }

    pub fn num_ues(&self) -> usize {
        self.count * self.size
    }

    pub fn members(&self, l: usize) -> Range<usize> {
        l * self.size..(l + 1) * self.size
    }

    pub fn cluster_of(&self, i: usize) -> usize {
        i / self.size
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActivityPattern {
    /// Cluster gates `c_l`.
    pub cluster_gate: Vec<bool>,
    /// UE activity `γ_i`.
    pub gamma: Vec<bool>,
    /// Active support, ascending.
    pub support: Vec<usize>,
}

impl ActivityPattern {
    pub fn from_support(clusters: Clusters, mut support: Vec<usize>) -> Self {
        support.sort_unstable();
        let mut gamma = vec![false; clusters.num_ues()];
        let mut cluster_gate = vec![false; clusters.count];
        for &i in &support {
            gamma[i] = true;
            cluster_gate[clusters.cluster_of(i)] = true;
        }
        ActivityPattern {
            cluster_gate,
            gamma,
            support,
        }
    }
}

/// One generated ground truth plus its received pilot signal.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub clusters: Clusters,
    /// Per-UE spatial covariance, trace `M`.
    pub r_true: Vec<CMat>,
    /// Per-cluster covariance prior `B_l`.
    pub b_prior: Vec<CMat>,
    pub power: Vec<f64>,
    /// `τ_p × N` pilot matrix with unit-norm columns.
    pub phi: CMat,
    pub activity: ActivityPattern,
    /// `M × N` effective channel matrix.
    pub x_true: CMat,
    /// `τ_p × M` received signal.
    pub y: CMat,
    pub sigma2: f64,
}

/// What an estimator is allowed to see: the observation plus the statistical
/// side information (cluster layout, covariance priors, powers).
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub y: &'a CMat,
    pub phi: &'a CMat,
    pub sigma2: f64,
    pub clusters: Clusters,
    pub b_prior: &'a [CMat],
    pub power: &'a [f64],
}

impl<'a> Problem<'a> {
    pub fn antennas(&self) -> usize {
        self.y.ncols()
    }

    pub fn num_ues(&self) -> usize {
        self.phi.ncols()
    }

    pub fn tau_p(&self) -> usize {
        self.phi.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let (tau, n) = self.phi.shape();
        let m = self.y.ncols();
        if self.y.nrows() != tau {
            return Err(JuiceError::dim("problem: Y rows vs Φ rows", tau, self.y.nrows()));
        }
        if self.clusters.num_ues() != n {
            return Err(JuiceError::dim("problem: cluster layout vs Φ columns", n, self.clusters.num_ues()));
        }
        if self.b_prior.len() != self.clusters.count {
            return Err(JuiceError::dim("problem: number of B_l", self.clusters.count, self.b_prior.len()));
        }
        if self.power.len() != n {
            return Err(JuiceError::dim("problem: number of powers", n, self.power.len()));
        }
        if let Some(b) = self.b_prior.iter().find(|b| b.shape() != (m, m)) {
            return Err(JuiceError::dim("problem: B_l shape", format!("{m}x{m}"), format!("{:?}", b.shape())));
        }
        if !(self.sigma2 > 0.0) {
            return Err(JuiceError::Config(format!("noise variance must be positive, got {}", self.sigma2)));
        }
        Ok(())
    }
}

impl Scenario {
    pub fn problem(&self) -> Problem<'_> {
        Problem {
            y: &self.y,
            phi: &self.phi,
            sigma2: self.sigma2,
            clusters: self.clusters,
            b_prior: &self.b_prior,
            power: &self.power,
        }
    }
}

/// Standard circularly-symmetric complex normal `CN(0, 1)`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> num_complex::Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Gaussian local-scattering covariance for a half-wavelength ULA,
/// normalized to trace `M`.
pub fn generate_covariance(nominal_angle_rad: f64, spread_rad: f64, m: usize) -> CMat {
    let mut r = CMat::zeros(m, m);
    for a in 0..m {
        for b in 0..m {
            let d = a as f64 - b as f64;
            let phase = PI * d * nominal_angle_rad.sin();
            let spread = PI * d * nominal_angle_rad.cos();
            let mag = (-0.5 * spread_rad * spread_rad * spread * spread).exp();
            r[(a, b)] = num_complex::Complex64::from_polar(mag, phase);
        }
    }
    let mut r = psd_project(r);
    let tr = linalg::trace_re(&r);
    r *= real(m as f64 / tr);
    linalg::hermitized(r)
}

/// Clips eigenvalues below zero (tolerance −1e−10 is numerical noise) to zero.
fn psd_project(r: CMat) -> CMat {
    let r = linalg::hermitized(r);
    if linalg::min_eigenvalue(&r) >= 0.0 {
        return r;
    }
    linalg::clip_eigenvalues(&r, 0.0)
}

/// Pilot matrix with entries `(±1 ± j)/√(2τ_p)`.
pub fn generate_pilots<R: Rng + ?Sized>(tau_p: usize, n: usize, rng: &mut R) -> CMat {
    let scale = 1.0 / (2.0 * tau_p as f64).sqrt();
    CMat::from_fn(tau_p, n, |_, _| {
        let re = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        let im = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        c(re * scale, im * scale)
    })
}

pub fn sample_activity<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> ActivityPattern {
    let clusters = config.clusters();
    let support = match config.activity {
        ActivityMode::Clustered {
            active_clusters,
            per_cluster_active,
        } => {
            let mut support = Vec::with_capacity(config.num_active);
            let mut chosen = sample(rng, clusters.count, active_clusters).into_vec();
            chosen.sort_unstable();
            for l in chosen {
                let start = clusters.members(l).start;
                support.extend(
                    sample(rng, clusters.size, per_cluster_active)
                        .into_iter()
                        .map(|k| start + k),
                );
            }
            support
        }
        ActivityMode::Independent => sample(rng, config.num_ues, config.num_active).into_vec(),
    };
    ActivityPattern::from_support(clusters, support)
}

/// Effective channels `x_i = √p_i h_i`, `h_i ~ CN(0, R_i)` for active UEs and
/// exactly zero otherwise.
pub fn sample_channels<R: Rng + ?Sized>(
    r_true: &[CMat],
    power: &[f64],
    activity: &ActivityPattern,
    rng: &mut R,
) -> Result<CMat> {
    let n = activity.gamma.len();
    if r_true.len() != n || power.len() != n {
        return Err(JuiceError::dim("sample_channels", n, r_true.len().min(power.len())));
    }
    let m = r_true.first().map(|r| r.nrows()).unwrap_or(0);
    let mut x = CMat::zeros(m, n);
    for &i in &activity.support {
        if linalg::min_eigenvalue(&r_true[i]) < -1e-8 {
            return Err(JuiceError::NumericalFailure(format!(
                "covariance of UE {i} is not positive semidefinite"
            )));
        }
        let f = linalg::psd_factor(&r_true[i]);
        let w = CVec::from_fn(m, |_, _| complex_normal(rng));
        let h = f * w;
        x.set_column(i, &(h * real(power[i].sqrt())));
    }
    Ok(x)
}

/// `Y = Φ Xᵀ + W` with `W` i.i.d. `CN(0, σ²)`.
pub fn synthesize_rx<R: Rng + ?Sized>(phi: &CMat, x: &CMat, sigma2: f64, rng: &mut R) -> Result<CMat> {
    if phi.ncols() != x.ncols() {
        return Err(JuiceError::dim("synthesize_rx: Φ columns vs X columns", phi.ncols(), x.ncols()));
    }
    let mut y = phi * x.transpose();
    if sigma2 > 0.0 {
        let s = sigma2.sqrt();
        for v in y.iter_mut() {
            *v += complex_normal(rng) * s;
        }
    }
    Ok(y)
}

/// Builds a full scenario, reproducible bit-exactly from `config` (including
/// its seed).
pub fn generate_scenario(config: &ScenarioConfig) -> Result<Scenario> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let clusters = config.clusters();
    let m = config.antennas;
    let spread = config.angular_spread_deg.to_radians();
    let jitter = config.angle_jitter_deg.to_radians();
    let sixty = 60f64.to_radians();

    let mut r_true = Vec::with_capacity(config.num_ues);
    for _ in 0..clusters.count {
        let nominal = rng.gen_range(-sixty..=sixty);
        for _ in 0..clusters.size {
            let offset = if jitter > 0.0 { rng.gen_range(-jitter..=jitter) } else { 0.0 };
            r_true.push(generate_covariance(nominal + offset, spread, m));
        }
    }

    let zeta = config.cov_mismatch;
    let mut b_prior = Vec::with_capacity(clusters.count);
    for l in 0..clusters.count {
        let a = CMat::from_fn(m, m, |_, _| complex_normal(&mut rng));
        let mut psi = &a * a.adjoint();
        psi *= real(m as f64 / linalg::trace_re(&psi));
        let mut avg = CMat::zeros(m, m);
        for i in clusters.members(l) {
            avg += &r_true[i];
        }
        avg *= real(1.0 / clusters.size as f64);
        let b = psi * real(zeta) + avg * real(1.0 - zeta);
        b_prior.push(linalg::hermitized(b));
    }

    let power: Vec<f64> = r_true
        .iter()
        .map(|r| m as f64 / linalg::trace_re(r))
        .collect();

    let phi = generate_pilots(config.tau_p, config.num_ues, &mut rng);
    let activity = sample_activity(config, &mut rng);
    let x_true = sample_channels(&r_true, &power, &activity, &mut rng)?;
    let sigma2 = config.sigma2();
    let y = synthesize_rx(&phi, &x_true, sigma2, &mut rng)?;

    Ok(Scenario {
        config: config.clone(),
        clusters,
        r_true,
        b_prior,
        power,
        phi,
        activity,
        x_true,
        y,
        sigma2,
    })
}
