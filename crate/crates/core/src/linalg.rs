//! Dense complex linear-algebra helpers shared by every module.
//!
//! Everything works on `nalgebra` dynamic matrices of `Complex64`. Hermitian
//! positive-definite matrices go through Cholesky; anything that may be
//! indefinite is checked through its Hermitian eigen-decomposition.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
pub const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[inline]
pub fn real(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// `(A + Aᴴ) / 2`, in place.
pub fn hermitize(a: &mut CMat) {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    for i in 0..n {
        a[(i, i)] = real(a[(i, i)].re);
        for j in (i + 1)..n {
            let v = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
            a[(i, j)] = v;
            a[(j, i)] = v.conj();
        }
    }
}

pub fn hermitized(mut a: CMat) -> CMat {
    hermitize(&mut a);
    a
}

/// Largest entry-wise deviation from Hermitian symmetry.
pub fn hermitian_defect(a: &CMat) -> f64 {
    let n = a.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Cholesky factorization of a Hermitian matrix. `None` unless positive definite.
pub fn cholesky(a: &CMat) -> Option<Cholesky<Complex64, Dyn>> {
    let chol = Cholesky::new(a.clone())?;
    let l = chol.l_dirty();
    // nalgebra takes complex square roots of negative pivots without failing.
    let ok = (0..l.nrows()).all(|i| {
        let d = l[(i, i)];
        d.re.is_finite() && d.re > 0.0 && d.im.abs() <= 1e-8 * d.re
    });
    if ok {
        Some(chol)
    } else {
        None
    }
}

pub fn chol_log_det(chol: &Cholesky<Complex64, Dyn>) -> f64 {
    let l = chol.l_dirty();
    2.0 * (0..l.nrows()).map(|i| l[(i, i)].re.ln()).sum::<f64>()
}

/// Inverse of a Hermitian positive-definite matrix, re-symmetrized.
pub fn hpd_inverse(a: &CMat) -> Option<CMat> {
    let inv = cholesky(a)?.inverse();
    if inv.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Some(hermitized(inv))
    } else {
        None
    }
}

/// Inverse of a Hermitian matrix that may be indefinite. `None` when singular
/// to working precision.
pub fn hermitian_inverse(a: &CMat) -> Option<CMat> {
    if let Some(inv) = hpd_inverse(a) {
        return Some(inv);
    }
    let eig = eigh(a);
    let scale = eig
        .eigenvalues
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    if eig.eigenvalues.iter().any(|v| v.abs() <= 1e-14 * scale) {
        return None;
    }
    let n = a.nrows();
    let mut out = CMat::zeros(n, n);
    for k in 0..n {
        let u = eig.eigenvectors.column(k);
        let w = 1.0 / eig.eigenvalues[k];
        out += (&u * u.adjoint()) * real(w);
    }
    Some(hermitized(out))
}

pub fn eigh(a: &CMat) -> SymmetricEigen<Complex64, Dyn> {
    SymmetricEigen::new(hermitized(a.clone()))
}

pub fn min_eigenvalue(a: &CMat) -> f64 {
    eigh(a).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

pub fn is_positive_definite(a: &CMat) -> bool {
    cholesky(a).is_some()
}

/// Adds `start·I`, `10·start·I`, ... (at most `attempts` times) until the
/// matrix becomes positive definite. Returns the repaired matrix and the
/// jitter that was needed, or `None` when every attempt failed.
pub fn jitter_until_pd(a: &CMat, start: f64, attempts: usize) -> Option<(CMat, f64)> {
    if is_positive_definite(a) {
        return Some((a.clone(), 0.0));
    }
    let n = a.nrows();
    let mut zeta = start;
    for _ in 0..attempts {
        let candidate = a + identity(n) * real(zeta);
        if is_positive_definite(&candidate) {
            return Some((candidate, zeta));
        }
        zeta *= 10.0;
    }
    None
}

/// Hermitian square-root-type factor `F` with `F Fᴴ = A`, negative eigenvalues
/// clipped to zero. Works for singular PSD matrices where Cholesky does not.
pub fn psd_factor(a: &CMat) -> CMat {
    let eig = eigh(a);
    let n = a.nrows();
    let mut f = eig.eigenvectors.clone();
    for k in 0..n {
        let s = eig.eigenvalues[k].max(0.0).sqrt();
        f.column_mut(k).scale_mut(s);
    }
    f
}

/// Rebuilds `A` with eigenvalues below `floor` raised to `floor`.
pub fn clip_eigenvalues(a: &CMat, floor: f64) -> CMat {
    let eig = eigh(a);
    let n = a.nrows();
    let mut out = CMat::zeros(n, n);
    for k in 0..n {
        let u = eig.eigenvectors.column(k);
        out += (&u * u.adjoint()) * real(eig.eigenvalues[k].max(floor));
    }
    hermitized(out)
}

pub fn trace_re(a: &CMat) -> f64 {
    (0..a.nrows()).map(|i| a[(i, i)].re).sum()
}

pub fn fro_sq(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

pub fn col_norm(a: &CMat, j: usize) -> f64 {
    a.column(j).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn col_norms(a: &CMat) -> Vec<f64> {
    (0..a.ncols()).map(|j| col_norm(a, j)).collect()
}

pub fn outer(v: &CVec) -> CMat {
    v * v.adjoint()
}

/// Kronecker product `A ⊗ B`.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMat::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let s = a[(i, j)];
            if s == ZERO {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = s * b[(k, l)];
                }
            }
        }
    }
    out
}

/// `log CN(x; μ, Σ) = −M log π − log|Σ| − (x−μ)ᴴ Σ⁻¹ (x−μ)`. `None` when Σ is
/// not positive definite.
pub fn log_cn(x: &CVec, mean: &CVec, cov: &CMat) -> Option<f64> {
    let chol = cholesky(cov)?;
    let d = x - mean;
    let sol = chol.solve(&d);
    let quad = d.dotc(&sol).re;
    let m = x.len() as f64;
    Some(-m * std::f64::consts::PI.ln() - chol_log_det(&chol) - quad)
}

pub fn log_sum_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY && b == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}
