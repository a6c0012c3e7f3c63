//! Independent reference computations shared by the integration tests.

#![allow(dead_code)]

use juice::emep::EmEpConfig;
use juice::linalg::{self, real, CMat, CVec};
use juice::model::{self, Clusters, Problem};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Small spike-and-slab instance with one UE per cluster and scalar channels.
pub struct TinyInstance {
    pub phi: CMat,
    pub y: CMat,
    pub sigma2: f64,
    pub epsilon: f64,
    pub slab_var: Vec<f64>,
    pub b_prior: Vec<CMat>,
    pub power: Vec<f64>,
}

impl TinyInstance {
    pub fn sample(seed: u64, n: usize, tau: usize) -> TinyInstance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sigma2 = model::ScenarioConfig::default().sigma2();
        let epsilon = EmEpConfig::default().epsilon;
        let phi = model::generate_pilots(tau, n, &mut rng);
        let slab_var = vec![1.0_f64; n];
        let mut x = CMat::zeros(1, n);
        for i in 0..n {
            if rng.gen::<f64>() < epsilon {
                x[(0, i)] = model::complex_normal(&mut rng) * slab_var[i].sqrt();
            }
        }
        let y = model::synthesize_rx(&phi, &x, sigma2, &mut rng).unwrap();
        TinyInstance {
            phi,
            y,
            sigma2,
            epsilon,
            b_prior: slab_var.iter().map(|&v| CMat::from_element(1, 1, real(v))).collect(),
            slab_var,
            power: vec![1.0; n],
        }
    }

    pub fn problem(&self) -> Problem<'_> {
        Problem {
            y: &self.y,
            phi: &self.phi,
            sigma2: self.sigma2,
            clusters: Clusters::new(self.phi.ncols(), 1),
            b_prior: &self.b_prior,
            power: &self.power,
        }
    }
}

/// Exact posterior means and activity probabilities by summing over all
/// `2^N` activity patterns.
pub fn enumerate_posterior(inst: &TinyInstance) -> (Vec<Complex64>, Vec<f64>) {
    let n = inst.phi.ncols();
    let tau = inst.phi.nrows();
    let y: CVec = inst.y.column(0).into_owned();
    let mut log_w = Vec::new();
    let mut means = Vec::new();
    for pattern in 0..(1usize << n) {
        let on = |i: usize| pattern >> i & 1 == 1;
        let mut cov = linalg::identity(tau) * real(inst.sigma2);
        let mut lp = 0.0;
        for i in 0..n {
            if on(i) {
                let p = inst.phi.column(i).into_owned();
                cov += linalg::outer(&p) * real(inst.slab_var[i]);
                lp += inst.epsilon.ln();
            } else {
                lp += (1.0 - inst.epsilon).ln();
            }
        }
        lp += linalg::log_cn(&y, &CVec::zeros(tau), &cov).unwrap();
        let sol = linalg::hpd_inverse(&cov).unwrap() * &y;
        let mean: Vec<Complex64> = (0..n)
            .map(|i| {
                if on(i) {
                    inst.phi.column(i).dotc(&sol) * inst.slab_var[i]
                } else {
                    real(0.0)
                }
            })
            .collect();
        log_w.push(lp);
        means.push(mean);
    }
    let top = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_w.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = w.iter().sum();
    let mut mean = vec![real(0.0); n];
    let mut gate = vec![0.0; n];
    for (pattern, (wk, mk)) in w.iter().zip(&means).enumerate() {
        for i in 0..n {
            mean[i] += mk[i] * (wk / total);
            if pattern >> i & 1 == 1 {
                gate[i] += wk / total;
            }
        }
    }
    (mean, gate)
}

/// Trapezoid rule on `[lo, hi]²` with `n × n` cells.
pub fn quad_2d(f: impl Fn(f64, f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / n as f64;
    let mut total = 0.0;
    for a in 0..=n {
        let wa = if a == 0 || a == n { 0.5 } else { 1.0 };
        let u = lo + a as f64 * h;
        for b in 0..=n {
            let wb = if b == 0 || b == n { 0.5 } else { 1.0 };
            total += wa * wb * f(u, lo + b as f64 * h);
        }
    }
    total * h * h
}

/// Central-difference derivative.
pub fn diff(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Random Hermitian positive-definite `m × m` matrix.
pub fn random_hpd<R: Rng>(m: usize, rng: &mut R) -> CMat {
    let a = CMat::from_fn(m, m + 2, |_, _| model::complex_normal(rng));
    linalg::hermitized(&a * a.adjoint() / real((m + 2) as f64) + linalg::identity(m) * real(0.1))
}

/// Composite Simpson rule on `[lo, hi]` with an even number `n` of panels.
pub fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (hi - lo) / n as f64;
    let mut total = f(lo) + f(hi);
    for k in 1..n {
        total += if k % 2 == 1 { 4.0 } else { 2.0 } * f(lo + k as f64 * h);
    }
    total * h / 3.0
}

/// Central-difference gradient.
pub fn fd_gradient(f: &impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|k| {
            let h = 1e-6 * x[k].abs().max(1.0);
            p[k] = x[k] + h;
            let up = f(&p);
            p[k] = x[k] - h;
            let down = f(&p);
            p[k] = x[k];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// BFGS with finite-difference gradients and Armijo backtracking.
pub fn bfgs(f: impl Fn(&[f64]) -> f64, x0: &[f64], max_iters: usize) -> Vec<f64> {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    let mut g = fd_gradient(&f, &x);
    let mut h = vec![vec![0.0; n]; n];
    for (k, row) in h.iter_mut().enumerate() {
        row[k] = 1.0;
    }
    for _ in 0..max_iters {
        let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gnorm < 1e-11 {
            break;
        }
        let mut d: Vec<f64> = h.iter().map(|row| -row.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>()).collect();
        let mut slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
        if slope >= 0.0 {
            for (row_k, row) in h.iter_mut().enumerate() {
                row.iter_mut().enumerate().for_each(|(j, v)| *v = if j == row_k { 1.0 } else { 0.0 });
            }
            d = g.iter().map(|v| -v).collect();
            slope = -gnorm * gnorm;
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + t * b).collect();
            let ft = f(&trial);
            if ft <= fx + 1e-4 * t * slope {
                accepted = Some((trial, ft));
                break;
            }
            t *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else { break };
        let g_new = fd_gradient(&f, &x_new);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&yv).map(|(a, b)| a * b).sum();
        if sy > 1e-300 {
            let hy: Vec<f64> = h.iter().map(|row| row.iter().zip(&yv).map(|(a, b)| a * b).sum()).collect();
            let yhy: f64 = yv.iter().zip(&hy).map(|(a, b)| a * b).sum();
            let r = 1.0 / sy;
            for i in 0..n {
                for j in 0..n {
                    h[i][j] += (1.0 + yhy * r) * r * s[i] * s[j] - r * (hy[i] * s[j] + s[i] * hy[j]);
                }
            }
        }
        let stalled = (fx - f_new).abs() <= 1e-16 * fx.abs().max(1e-300);
        x = x_new;
        fx = f_new;
        g = g_new;
        if stalled {
            break;
        }
    }
    x
}

/// Real coordinates `(re, im)` of a complex matrix, column-major.
pub fn to_reals(a: &CMat) -> Vec<f64> {
    a.iter().flat_map(|z| [z.re, z.im]).collect()
}

pub fn from_reals(v: &[f64], rows: usize, cols: usize) -> CMat {
    CMat::from_iterator(rows, cols, v.chunks(2).map(|p| Complex64::new(p[0], p[1])))
}

/// Random complex Gaussian matrix.
pub fn random_cmat<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    CMat::from_fn(rows, cols, |_, _| model::complex_normal(rng))
}
