//! Acceptance suite. Every test prints one PASS/FAIL line to stderr before
//! asserting, so the verdicts are visible even under output capture.

mod common;

use std::io::Write;
use std::sync::OnceLock;
use std::time::Instant;

use common::{bfgs, diff, enumerate_posterior, from_reals, quad_2d, random_cmat, random_hpd, simpson, to_reals, TinyInstance};
use juice::admm::{self, AdmmConfig, VForm};
use juice::emep::{self, EmEpConfig};
use juice::gaussian::{self, GaussianBelief};
use juice::harness::{self, ExperimentConfig, ResultTable, Sweep, SweepAxis};
use juice::linalg::{self, c, real, CMat, CVec};
use juice::model::{self, ActivityMode, ScenarioConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ALGOS: [&str; 3] = ["emep", "corr_map_admm", "irw_l21"];

fn report(id: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let line = format!("[acceptance] {id:<34} {verdict}  {detail}\n");
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn rel_max(a: &CMat, b: &CMat) -> f64 {
    (a - b).camax() / b.camax().max(1.0)
}

// 1 ----------------------------------------------------------------------

fn random_belief(m: usize, rng: &mut ChaCha8Rng) -> GaussianBelief {
    let mean = CVec::from_fn(m, |_, _| model::complex_normal(rng));
    GaussianBelief::new(mean, random_hpd(m, rng))
}

fn real_gauss(t: f64, mean: f64, var: f64) -> f64 {
    (-(t - mean).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

#[test]
fn c01_gaussian_algebra() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst_round = 0.0_f64;
    let mut worst_scale = 0.0_f64;
    for &m in &[1usize, 2, 4] {
        for _ in 0..100 {
            let g1 = random_belief(m, &mut rng);
            let g2 = random_belief(m, &mut rng);
            let (p, log_kp) = gaussian::product(&g1, &g2).unwrap();
            let (back, log_kq) = gaussian::quotient(&p, &g2).unwrap();
            worst_round = worst_round
                .max((back.mean() - g1.mean()).camax())
                .max((back.cov() - g1.cov()).camax());
            worst_scale = worst_scale.max((log_kq.expect("Σ₂ − Σ_p is PD") + log_kp).abs());

            let (q, _) = gaussian::quotient(&g1, &g2).unwrap();
            let restored = q.natural().unwrap().add(g2.natural().unwrap()).to_belief().unwrap();
            worst_round = worst_round
                .max((restored.mean() - g1.mean()).camax())
                .max((restored.cov() - g1.cov()).camax());
        }
    }

    let mut worst_quad = 0.0_f64;
    for _ in 0..20 {
        let (m1, m2) = (model::complex_normal(&mut rng), model::complex_normal(&mut rng));
        let (v1, v2) = (rng.gen_range(0.2..2.0), rng.gen_range(0.2..2.0));
        let g1 = GaussianBelief::new(CVec::from_element(1, m1), CMat::from_element(1, 1, real(v1)));
        let g2 = GaussianBelief::new(CVec::from_element(1, m2), CMat::from_element(1, 1, real(v2)));
        let (_, log_kp) = gaussian::product(&g1, &g2).unwrap();
        // CN(μ, v) splits into independent N(Re μ, v/2) and N(Im μ, v/2)
        let part = |a: f64, b: f64| simpson(|t| real_gauss(t, a, v1 / 2.0) * real_gauss(t, b, v2 / 2.0), -12.0, 12.0, 4000);
        let quad = part(m1.re, m2.re) * part(m1.im, m2.im);
        worst_quad = worst_quad.max((quad.ln() - log_kp).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst_round < 1e-8 && worst_scale < 1e-8 && worst_quad < 1e-4 && secs < 1.0;
    report(
        "1 gaussian algebra",
        pass,
        &format!("round trip {worst_round:.1e}, log K_q + log K_p {worst_scale:.1e}, quadrature {worst_quad:.1e}, {secs:.3} s"),
    );
    assert!(pass);
}

// 2 ----------------------------------------------------------------------

#[test]
fn c02_ep_matches_enumeration() {
    let start = Instant::now();
    let mut worst_mean = 0.0_f64;
    let mut worst_gate = 0.0_f64;
    let mut within = 0;
    for seed in 0..50 {
        let inst = TinyInstance::sample(seed, 2, 4);
        let cfg = EmEpConfig {
            epsilon: inst.epsilon,
            m_step: false,
            prune: false,
            max_iters: 500,
            tol: 1e-10,
            ..EmEpConfig::default()
        };
        let est = emep::run_em_ep(&inst.problem(), &cfg).unwrap();
        let (mean, gate) = enumerate_posterior(&inst);
        let e_mean = (0..2).map(|i| (est.mean[(0, i)] - mean[i]).norm()).fold(0.0, f64::max);
        let e_gate = (0..2).map(|i| (est.gate_post[i] - gate[i]).abs()).fold(0.0, f64::max);
        worst_mean = worst_mean.max(e_mean);
        worst_gate = worst_gate.max(e_gate);
        if e_mean <= 5e-2 && e_gate <= 5e-2 {
            within += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = within == 50 && secs < 10.0;
    report(
        "2 EP vs exact enumeration",
        pass,
        &format!("{within}/50 seeds within 5e-2, worst mean error {worst_mean:.3}, worst gate error {worst_gate:.3}, {secs:.2} s"),
    );
    assert!(pass);
}

// 3 ----------------------------------------------------------------------

fn scalar_cn(u: f64, v: f64, mean: num_complex::Complex64, var: f64) -> f64 {
    (-((u - mean.re).powi(2) + (v - mean.im).powi(2)) / var).exp() / (std::f64::consts::PI * var)
}

#[test]
fn c03_tilted_moments_vs_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst = 0.0_f64;
    for _ in 0..20 {
        let eps = rng.gen_range(0.05..0.6);
        let m_hat = c(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5));
        let v_hat = rng.gen_range(0.3..2.0);
        let r = rng.gen_range(0.3..2.0);
        let cav = GaussianBelief::new(CVec::from_element(1, m_hat), CMat::from_element(1, 1, real(v_hat)));
        let slab = CMat::from_element(1, 1, real(r));
        let norm = emep::cluster_normalizer(std::slice::from_ref(&cav), std::slice::from_ref(&slab), eps).unwrap();
        let tm = emep::tilted_moments(&[cav], &[slab], &norm).unwrap();

        let s = |u: f64, v: f64| eps * scalar_cn(u, v, c(0.0, 0.0), r) * scalar_cn(u, v, m_hat, v_hat);
        let (lo, hi, n) = (-10.0, 10.0, 800);
        let a = quad_2d(s, lo, hi, n);
        // the spike contributes mass only at the origin
        let b = (1.0 - eps) * scalar_cn(0.0, 0.0, m_hat, v_hat);
        let z = a + b;
        let mean = c(quad_2d(|u, v| u * s(u, v), lo, hi, n), quad_2d(|u, v| v * s(u, v), lo, hi, n)) / z;
        let second = quad_2d(|u, v| (u * u + v * v) * s(u, v), lo, hi, n) / z;
        let var = second - mean.norm_sqr();

        worst = worst
            .max((tm.gate - a / z).abs())
            .max((tm.mean[0][0] - mean).norm())
            .max((tm.cov[0][(0, 0)].re - var).abs());
    }
    let pass = worst < 1e-4;
    report("3 tilted moments vs quadrature", pass, &format!("worst deviation {worst:.1e} over 20 instances"));
    assert!(pass);
}

// 4 ----------------------------------------------------------------------

/// Hermitian basis of `m × m` matrices.
fn hermitian_basis(m: usize) -> Vec<CMat> {
    let mut out = Vec::new();
    for j in 0..m {
        for k in j..m {
            let mut e = CMat::zeros(m, m);
            e[(j, k)] = real(1.0);
            e[(k, j)] = real(1.0);
            out.push(e);
            if j != k {
                let mut f = CMat::zeros(m, m);
                f[(j, k)] = c(0.0, 1.0);
                f[(k, j)] = c(0.0, -1.0);
                out.push(f);
            }
        }
    }
    out
}

fn log_det(a: &CMat) -> f64 {
    linalg::chol_log_det(&linalg::cholesky(a).expect("positive definite"))
}

#[test]
fn c04_m_step_stationarity() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst_gamma = 0.0_f64;
    let mut worst_r = 0.0_f64;
    for inst in 0..20 {
        let m = rng.gen_range(1..=4);
        let w = if inst % 2 == 0 { 1.0 } else { rng.gen_range(0.05..1.0) };
        let d = 1.0;

        let q = random_hpd(m, &mut rng);
        let r_bar = random_hpd(m, &mut rng);
        let r_inv = linalg::hpd_inverse(&r_bar).unwrap();
        let t = linalg::trace_re(&(&r_inv * &q));
        let g_star = emep::gamma_bar_update(&r_inv, &q, w);
        let f_gamma = |g: f64| -w * m as f64 * g.ln() - t / g;
        worst_gamma = worst_gamma.max(diff(f_gamma, g_star, 1e-4 * g_star).abs());

        let l = rng.gen_range(1..=5);
        let qs: Vec<CMat> = (0..l).map(|_| random_hpd(m, &mut rng)).collect();
        let gammas: Vec<f64> = (0..l).map(|_| rng.gen_range(0.2..3.0)).collect();
        let b = random_hpd(m, &mut rng);
        let r_star = emep::r_bar_update(&qs, &gammas, &b, w, d);
        let mut s = &b * real(l as f64);
        for (qi, g) in qs.iter().zip(&gammas) {
            s += qi / real(*g);
        }
        let lf = l as f64;
        let f_r = |r: &CMat| -(w * lf + lf * d) * log_det(r) - linalg::trace_re(&(linalg::hpd_inverse(r).unwrap() * &s));
        for e in hermitian_basis(m) {
            let g = diff(|h| f_r(&(&r_star + &e * real(h))), 0.0, 1e-5);
            worst_r = worst_r.max(g.abs());
        }
    }
    let pass = worst_gamma < 1e-5 && worst_r < 1e-5;
    report(
        "4 M-step stationarity",
        pass,
        &format!("max |dF/dγ̄| {worst_gamma:.1e}, max |dF/dR̄| {worst_r:.1e}"),
    );
    assert!(pass);
}

// 5 ----------------------------------------------------------------------

struct SubproblemCheck {
    beaten: usize,
    trials: usize,
    gap: f64,
}

impl SubproblemCheck {
    fn new() -> Self {
        SubproblemCheck { beaten: 0, trials: 0, gap: 0.0 }
    }

    fn perturb(&mut self, f: &impl Fn(&CMat) -> f64, x: &CMat, rng: &mut ChaCha8Rng, make: impl Fn(&CMat, &mut ChaCha8Rng) -> Option<CMat>) {
        let base = f(x);
        let mut done = 0;
        while done < 100 {
            let Some(p) = make(x, rng) else { continue };
            done += 1;
            self.trials += 1;
            if f(&p) < base - 1e-12 * base.abs().max(1.0) {
                self.beaten += 1;
            }
        }
    }

    fn ok(&self) -> bool {
        self.beaten == 0 && self.gap < 1e-6
    }

    fn line(&self) -> String {
        format!("{}/{} perturbations better, numerical gap {:.1e}", self.beaten, self.trials, self.gap)
    }
}

fn perturbation(x: &CMat, rng: &mut ChaCha8Rng) -> Option<CMat> {
    let d = random_cmat(x.nrows(), x.ncols(), rng);
    let scale = 1e-2 / d.camax();
    Some(x + d * real(scale))
}

#[test]
fn c05_admm_subproblems() {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let (mut z_chk, mut v_chk, mut x_chk, mut r_chk) =
        (SubproblemCheck::new(), SubproblemCheck::new(), SubproblemCheck::new(), SubproblemCheck::new());
    let n = 6;
    for &m in &[1usize, 2, 4] {
        for &tau in &[3usize, 8] {
            let rho = rng.gen_range(0.2..2.0);
            let phi = model::generate_pilots(tau, n, &mut rng);
            let y = random_cmat(tau, m, &mut rng);
            let x = random_cmat(m, n, &mut rng);
            let lam_z = random_cmat(m, n, &mut rng);
            let lam_v = random_cmat(m, n, &mut rng);

            // Z
            let f_z = |z: &CMat| {
                0.5 * linalg::fro_sq(&(&y - &phi * z.transpose())) + 0.5 * rho * linalg::fro_sq(&(&x - z + &lam_z / real(rho)))
            };
            let gram_inv = admm::gram_inverse(&phi, rho).unwrap();
            let z = admm::z_update(&x, &lam_z, &(y.transpose() * phi.conjugate()), &gram_inv, rho);
            z_chk.perturb(&f_z, &z, &mut rng, perturbation);
            let z_num = from_reals(&bfgs(|v| f_z(&from_reals(v, m, n)), &to_reals(&x), 2000), m, n);
            z_chk.gap = z_chk.gap.max(rel_max(&z_num, &z));

            // V, clusters of two UEs
            let beta2 = rng.gen_range(0.1..2.0);
            let owner: Vec<usize> = (0..n).map(|i| i / 2).collect();
            let w: Vec<CMat> = (0..n / 2)
                .map(|_| admm::penalty_matrix(&random_hpd(m, &mut rng), VForm::Precision).unwrap())
                .collect();
            let f_v = |v: &CMat| {
                let quad: f64 = (0..n)
                    .map(|i| {
                        let col = v.column(i).into_owned();
                        0.5 * beta2 * col.dotc(&(&w[owner[i]] * &col)).re
                    })
                    .sum();
                quad + 0.5 * rho * linalg::fro_sq(&(&x - v + &lam_v / real(rho)))
            };
            let v = admm::v_update(&x, &lam_v, &w, &owner, beta2, rho).unwrap();
            v_chk.perturb(&f_v, &v, &mut rng, perturbation);
            let v_num = from_reals(&bfgs(|p| f_v(&from_reals(p, m, n)), &to_reals(&x), 2000), m, n);
            v_chk.gap = v_chk.gap.max(rel_max(&v_num, &v));

            // X, positive weights so that the shrinkage is the minimizer
            let zz = random_cmat(m, n, &mut rng);
            let vv = random_cmat(m, n, &mut rng);
            let cm = admm::combine(&zz, &vv, &lam_z, &lam_v, rho);
            let alpha: Vec<f64> = (0..n).map(|i| 2.0 * rho * linalg::col_norm(&cm, i) * rng.gen_range(0.1..2.0)).collect();
            let col_obj = |i: usize, xi: &CVec| {
                let a = xi - zz.column(i) + lam_z.column(i) / real(rho);
                let b = xi - vv.column(i) + lam_v.column(i) / real(rho);
                alpha[i] * xi.norm() + 0.5 * rho * (a.norm_squared() + b.norm_squared())
            };
            let f_x = |xm: &CMat| (0..n).map(|i| col_obj(i, &xm.column(i).into_owned())).sum::<f64>();
            let xs = admm::x_update(&cm, &alpha, rho);
            x_chk.perturb(&f_x, &xs, &mut rng, perturbation);
            let mut x_num = CMat::zeros(m, n);
            for i in 0..n {
                let start: CMat = cm.columns(i, 1).into_owned();
                let found = from_reals(
                    &bfgs(|p| col_obj(i, &from_reals(p, m, 1).column(0).into_owned()), &to_reals(&start), 2000),
                    m,
                    1,
                );
                let found: CVec = found.column(0).into_owned();
                if col_obj(i, &found) < col_obj(i, &CVec::zeros(m)) {
                    x_num.set_column(i, &found);
                }
            }
            x_chk.gap = x_chk.gap.max(rel_max(&x_num, &xs));

            // R
            let l = 3;
            let beta2 = rng.gen_range(0.1..1.0);
            let beta3 = rng.gen_range(0.1..1.0);
            let mu = rng.gen_range(0.5..3.0);
            let v_cols = random_cmat(m, l, &mut rng);
            let b = random_hpd(m, &mut rng);
            let f_r = |r: &CMat| {
                let Some(chol) = linalg::cholesky(&linalg::hermitized(r.clone())) else {
                    return f64::INFINITY;
                };
                let inv = chol.inverse();
                let data: f64 = (0..l)
                    .map(|k| {
                        let col = v_cols.column(k).into_owned();
                        col.dotc(&(&inv * &col)).re
                    })
                    .sum();
                beta2 * data + mu * linalg::chol_log_det(&chol) + beta3 * l as f64 * linalg::trace_re(&(&b * &inv))
            };
            let r = admm::r_update(&v_cols, mu, &b, beta2, beta3, l);
            r_chk.perturb(&f_r, &r, &mut rng, |r, rng| {
                let e = random_cmat(m, m, rng);
                let e = linalg::hermitized(&e + e.adjoint());
                let scale = 1e-2 / e.camax();
                let p = linalg::hermitized(r + e * real(scale));
                linalg::is_positive_definite(&p).then_some(p)
            });
            let lower = |p: &[f64]| {
                let mut lm = CMat::zeros(m, m);
                let mut it = p.iter();
                for j in 0..m {
                    lm[(j, j)] = real(*it.next().unwrap());
                    for i in j + 1..m {
                        lm[(i, j)] = c(*it.next().unwrap(), *it.next().unwrap());
                    }
                }
                &lm * lm.adjoint()
            };
            let start: Vec<f64> = (0..m).flat_map(|j| std::iter::once(1.0).chain(std::iter::repeat(0.0).take(2 * (m - j - 1)))).collect();
            let r_num = lower(&bfgs(|p| f_r(&lower(p)), &start, 5000));
            r_chk.gap = r_chk.gap.max(rel_max(&r_num, &r));
        }
    }
    let pass = z_chk.ok() && v_chk.ok() && x_chk.ok() && r_chk.ok();
    report(
        "5 ADMM subproblem optimality",
        pass,
        &format!("Z: {} | V: {} | X: {} | R: {}", z_chk.line(), v_chk.line(), x_chk.line(), r_chk.line()),
    );
    assert!(pass);
}

// shared Monte-Carlo runs --------------------------------------------------

fn timed_run(cfg: ExperimentConfig) -> (ResultTable, f64) {
    let start = Instant::now();
    let table = harness::run_experiment(&cfg).expect("experiment runs");
    (table, start.elapsed().as_secs_f64())
}

fn default_run() -> &'static (ResultTable, f64) {
    static RUN: OnceLock<(ResultTable, f64)> = OnceLock::new();
    RUN.get_or_init(|| timed_run(ExperimentConfig { trials: 200, master_seed: 6006, ..Default::default() }))
}

fn sweep_run(axis: SweepAxis, values: &[f64], seed: u64) -> (ResultTable, f64) {
    timed_run(ExperimentConfig {
        sweep: Sweep { axis, values: values.to_vec() },
        trials: 100,
        master_seed: seed,
        ..Default::default()
    })
}

const TAUS: [f64; 5] = [12.0, 16.0, 20.0, 24.0, 28.0];

fn tau_run() -> &'static (ResultTable, f64) {
    static RUN: OnceLock<(ResultTable, f64)> = OnceLock::new();
    RUN.get_or_init(|| sweep_run(SweepAxis::TauP, &TAUS, 7007))
}

fn cell<'a>(table: &'a ResultTable, v: f64, alg: &str) -> &'a harness::ResultRow {
    table.row(v, alg).unwrap_or_else(|| panic!("missing row {alg}@{v}"))
}

// 6 ----------------------------------------------------------------------

#[test]
fn c06_oracle_dominance() {
    let (table, secs) = default_run();
    let oracle = cell(table, 0.0, "oracle_mmse");
    let mut pass = *secs < 1800.0;
    let mut parts = vec![format!("oracle {:.2} dB", oracle.nmse_db)];
    for alg in ALGOS {
        let r = cell(table, 0.0, alg);
        let ok = if alg == "irw_l21" {
            oracle.nmse < r.nmse && oracle.nmse_mean_ratio < r.nmse_mean_ratio
        } else {
            oracle.nmse <= r.nmse && oracle.nmse_mean_ratio <= r.nmse_mean_ratio
        };
        pass &= ok;
        parts.push(format!("{alg} {:.2} dB", r.nmse_db));
    }
    report("6 oracle dominance", pass, &format!("{}, 200 trials in {secs:.0} s", parts.join(", ")));
    assert!(pass);
}

// 7 ----------------------------------------------------------------------

#[test]
fn c07_clustered_prior_advantage() {
    let (table, _) = tau_run();
    let mut pass = true;
    let mut parts = Vec::new();
    for &tau in TAUS.iter().filter(|&&t| t <= 24.0) {
        let (e, a, i) = (cell(table, tau, "emep"), cell(table, tau, "corr_map_admm"), cell(table, tau, "irw_l21"));
        pass &= e.mean_srr >= i.mean_srr + 0.05 && a.mean_srr >= i.mean_srr;
        parts.push(format!(
            "τ={tau}: {:.3}/{:.3}/{:.3} (false-alarm form {:.3}/{:.3}/{:.3})",
            e.mean_srr, a.mean_srr, i.mean_srr, e.mean_srr_alt, a.mean_srr_alt, i.mean_srr_alt
        ));
    }
    report("7 clustered-prior SRR advantage", pass, &format!("EM-EP/ADMM/IRW {}", parts.join("; ")));
    assert!(pass);
}

// 8 ----------------------------------------------------------------------

/// Curves that rise more than once, or whose single rise exceeds the
/// summed standard errors of its endpoints.
fn trend_violations(table: &ResultTable, values: &[f64]) -> Vec<String> {
    let mut bad = Vec::new();
    for alg in ["emep", "corr_map_admm", "irw_l21", "oracle_mmse"] {
        let rows: Vec<_> = values.iter().map(|&v| cell(table, v, alg)).collect();
        let mut rises = 0;
        let mut excess = false;
        for pair in rows.windows(2) {
            if pair[1].nmse > pair[0].nmse {
                rises += 1;
                excess |= pair[1].nmse - pair[0].nmse > pair[0].nmse_stderr + pair[1].nmse_stderr;
            }
        }
        if rises > 1 || excess {
            let curve: Vec<String> = rows.iter().map(|r| format!("{:.2}", r.nmse_db)).collect();
            bad.push(format!("{alg} [{}]", curve.join(", ")));
        }
    }
    bad
}

#[test]
fn c08_monotone_trends() {
    const SNRS: [f64; 5] = [8.0, 12.0, 16.0, 20.0, 24.0];
    const MS: [f64; 4] = [2.0, 4.0, 6.0, 8.0];
    let (tau, _) = tau_run();
    let (snr, _) = sweep_run(SweepAxis::SnrDb, &SNRS, 8008);
    let (ant, _) = sweep_run(SweepAxis::Antennas, &MS, 8009);
    let mut bad = Vec::new();
    for (name, table, values) in [("τ_p", tau, &TAUS[..]), ("SNR", &snr, &SNRS[..]), ("M", &ant, &MS[..])] {
        bad.extend(trend_violations(table, values).into_iter().map(|b| format!("{name}: {b}")));
    }
    let pass = bad.is_empty();
    let detail = if pass { "all NMSE curves non-increasing up to one noise-level inversion".to_string() } else { bad.join("; ") };
    report("8 monotone NMSE trends", pass, &detail);
    assert!(pass);
}

// 9 ----------------------------------------------------------------------

#[test]
fn c09_independent_activity() {
    let cfg = ExperimentConfig {
        scenario: ScenarioConfig { activity: ActivityMode::Independent, ..Default::default() },
        trials: 100,
        master_seed: 9009,
        ..Default::default()
    };
    let (table, _) = timed_run(cfg);
    let irw = cell(&table, 0.0, "irw_l21").mean_srr;
    let e = cell(&table, 0.0, "emep").mean_srr;
    let a = cell(&table, 0.0, "corr_map_admm").mean_srr;
    let pass = e >= irw - 0.02 && a >= irw - 0.02;
    report(
        "9 independent activity",
        pass,
        &format!("SRR EM-EP {e:.3}, ADMM {a:.3}, IRW {irw:.3} (floor {:.3})", irw - 0.02),
    );
    assert!(pass);
}

// 10 ---------------------------------------------------------------------

#[test]
fn c10_convergence_envelope() {
    let (table, _) = default_run();
    let e = cell(table, 0.0, "emep").median_iters;
    let a = cell(table, 0.0, "corr_map_admm").median_iters;
    let pass = e <= 15.0 && a <= 80.0;
    report("10 convergence envelope", pass, &format!("median iterations EM-EP {e}, ADMM {a}"));
    assert!(pass);
}

// 11 ---------------------------------------------------------------------

#[test]
fn c11_demo_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str| {
        let out = dir.path().join(sub);
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_juice"))
            .args(["demo", "--trials", "2", "--seed", "5", "--out"])
            .arg(&out)
            .stdout(std::process::Stdio::null())
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(out.join("results.csv")).unwrap()
    };
    let (a, b) = (run("a"), run("b"));
    let pass = !a.is_empty() && a == b;
    report("11 demo determinism", pass, &format!("results.csv {} bytes, identical: {}", a.len(), a == b));
    assert!(pass);
}

// ADMM objective trace ---------------------------------------------------

#[test]
fn admm_objective_trace_non_increasing() {
    let cfg = AdmmConfig { trace: true, ..Default::default() };
    let mut monotone = 0;
    let seeds = 40;
    for seed in 0..seeds {
        let sc = model::generate_scenario(&ScenarioConfig { seed, ..Default::default() }).unwrap();
        let est = admm::run_corr_map_admm(&sc.problem(), &cfg).unwrap();
        let obj: Vec<f64> = est.trace.iter().map(|t| t.objective).collect();
        let ok = obj.windows(2).skip(2).all(|p| p[1] <= p[0] + 1e-9 * p[0].abs().max(1.0));
        monotone += ok as usize;
    }
    let pass = monotone * 100 >= 95 * seeds as usize;
    report(
        "ADMM objective trace",
        pass,
        &format!("{monotone}/{seeds} seeded runs non-increasing after iteration 3"),
    );
    assert!(pass);
}
