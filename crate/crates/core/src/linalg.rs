//! Dense Hermitian eigensolver.
//!
//! Householder reduction of a complex Hermitian matrix to tridiagonal form,
//! a diagonal phase rotation making the tridiagonal real, and implicit-shift
//! QL iterations on the result. Fully deterministic.

use num_complex::Complex64;

use crate::error::{Error, Result};

const QL_MAX_SWEEPS: usize = 60;

/// Eigenvalues and eigenvectors of a symmetric real tridiagonal matrix.
///
/// `d` is the diagonal, `e[i]` couples `i` and `i + 1` (length `n - 1` or `n`;
/// any trailing entry is ignored). When `z` is given it must hold an `n × n`
/// column-major matrix; it is post-multiplied by the rotations, so passing
/// the identity yields the eigenvectors. Eigenvalues come back ascending,
/// with the columns of `z` permuted to match.
pub fn tridiagonal_ql(d: &mut [f64], e: &[f64], mut z: Option<&mut [f64]>) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    if let Some(z) = z.as_deref() {
        if z.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, found: z.len() });
        }
    }
    let mut e_work = vec![0.0; n];
    let m = e.len().min(n - 1);
    e_work[..m].copy_from_slice(&e[..m]);
    let e = &mut e_work;

    let mut f = 0.0_f64;
    let mut tst1 = 0.0_f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > QL_MAX_SWEEPS {
                    return Err(Error::NoConvergence {
                        what: format!("tridiagonal QL (eigenvalue {l} of {n})"),
                        iterations: iter - 1,
                    });
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some(z) = z.as_deref_mut() {
                        let (left, right) = z.split_at_mut((i + 1) * n);
                        let col_i = &mut left[i * n..];
                        let col_i1 = &mut right[..n];
                        for k in 0..n {
                            let hk = col_i1[k];
                            col_i1[k] = s * col_i[k] + c * hk;
                            col_i[k] = c * col_i[k] - s * hk;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }

    // Selection sort keeps the permutation cheap to apply to the columns.
    for i in 0..n.saturating_sub(1) {
        let mut k = i;
        for j in i + 1..n {
            if d[j] < d[k] {
                k = j;
            }
        }
        if k != i {
            d.swap(i, k);
            if let Some(z) = z.as_deref_mut() {
                for row in 0..n {
                    z.swap(i * n + row, k * n + row);
                }
            }
        }
    }
    Ok(())
}

/// Householder data produced by [`tridiagonalize`].
struct Tridiagonal {
    n: usize,
    diag: Vec<f64>,
    /// Real, non-negative subdiagonal after the phase rotation.
    offdiag: Vec<f64>,
    /// Unit phases δ_k with T_complex = D T_real D†.
    phases: Vec<Complex64>,
    /// Reflector vectors u_k acting on rows k+1.. (empty when skipped).
    reflectors: Vec<Vec<Complex64>>,
    betas: Vec<f64>,
}

impl Tridiagonal {
    /// Maps an eigenvector of the real tridiagonal back to the original basis.
    fn back_transform(&self, z: &[f64]) -> Vec<Complex64> {
        let n = self.n;
        let mut y: Vec<Complex64> = z.iter().zip(&self.phases).map(|(&zi, &p)| p * zi).collect();
        for k in (0..self.reflectors.len()).rev() {
            let u = &self.reflectors[k];
            if u.is_empty() {
                continue;
            }
            let tail = &mut y[k + 1..n];
            let mut dot = Complex64::new(0.0, 0.0);
            for (ui, yi) in u.iter().zip(tail.iter()) {
                dot += ui.conj() * yi;
            }
            let coef = dot * self.betas[k];
            for (ui, yi) in u.iter().zip(tail.iter_mut()) {
                *yi -= ui * coef;
            }
        }
        y
    }
}

fn tridiagonalize(a: &[Complex64], n: usize) -> Tridiagonal {
    let mut m = a.to_vec();
    let mut reflectors = Vec::with_capacity(n.saturating_sub(2));
    let mut betas = Vec::with_capacity(n.saturating_sub(2));
    let mut sub = vec![Complex64::new(0.0, 0.0); n.saturating_sub(1)];
    let mut p = vec![Complex64::new(0.0, 0.0); n];

    for k in 0..n.saturating_sub(1) {
        let len = n - k - 1;
        let alpha = m[(k + 1) * n + k];
        let mut tail_sq = 0.0;
        for j in k + 2..n {
            tail_sq += m[j * n + k].norm_sqr();
        }
        if k + 2 >= n || tail_sq == 0.0 {
            sub[k] = alpha;
            reflectors.push(Vec::new());
            betas.push(0.0);
            continue;
        }
        let xnorm = (alpha.norm_sqr() + tail_sq).sqrt();
        let phase = if alpha.norm() > 0.0 { alpha / alpha.norm() } else { Complex64::new(1.0, 0.0) };
        let mut u: Vec<Complex64> = (k + 1..n).map(|j| m[j * n + k]).collect();
        u[0] += phase * xnorm;
        let h = xnorm * (xnorm + alpha.norm());
        let beta = 1.0 / h;
        sub[k] = -phase * xnorm;

        // p = beta * A_sub * u
        let p = &mut p[..len];
        for (ii, pi) in p.iter_mut().enumerate() {
            let row = &m[(k + 1 + ii) * n + k + 1..(k + 2 + ii) * n];
            let mut acc = Complex64::new(0.0, 0.0);
            for (aij, uj) in row.iter().zip(&u) {
                acc += aij * uj;
            }
            *pi = acc * beta;
        }
        let mut up = Complex64::new(0.0, 0.0);
        for (ui, pi) in u.iter().zip(p.iter()) {
            up += ui.conj() * pi;
        }
        let kk = 0.5 * beta * up.re;
        for (pi, ui) in p.iter_mut().zip(&u) {
            *pi -= ui * kk;
        }
        // A_sub -= q u† + u q†
        for ii in 0..len {
            let qi = p[ii];
            let ui = u[ii];
            let row = &mut m[(k + 1 + ii) * n + k + 1..(k + 2 + ii) * n];
            for (jj, aij) in row.iter_mut().enumerate() {
                *aij -= qi * u[jj].conj() + ui * p[jj].conj();
            }
        }
        reflectors.push(u);
        betas.push(beta);
    }

    let diag: Vec<f64> = (0..n).map(|i| m[i * n + i].re).collect();
    let mut phases = vec![Complex64::new(1.0, 0.0); n];
    let mut offdiag = vec![0.0; n.saturating_sub(1)];
    for k in 0..n.saturating_sub(1) {
        let e = sub[k];
        let mag = e.norm();
        offdiag[k] = mag;
        phases[k + 1] = if mag > 0.0 { phases[k] * (e / mag) } else { phases[k] };
    }
    Tridiagonal { n, diag, offdiag, phases, reflectors, betas }
}

/// Result of a dense Hermitian eigendecomposition.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub dim: usize,
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// Column-major eigenvectors for the lowest `vectors.len() / dim` eigenvalues.
    pub vectors: Vec<Complex64>,
}

impl HermitianEigen {
    pub fn vector(&self, k: usize) -> &[Complex64] {
        &self.vectors[k * self.dim..(k + 1) * self.dim]
    }

    pub fn n_vectors(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.vectors.len() / self.dim
        }
    }
}

/// Eigendecomposition of a row-major Hermitian matrix.
///
/// `n_vectors` eigenvectors (lowest first) are returned, each phase-fixed so
/// that its largest-magnitude component is real and positive.
pub fn hermitian_eigen(a: &[Complex64], n: usize, n_vectors: usize) -> Result<HermitianEigen> {
    if a.len() != n * n {
        return Err(Error::DimensionMismatch { expected: n * n, found: a.len() });
    }
    let n_vectors = n_vectors.min(n);
    let tri = tridiagonalize(a, n);
    let mut values = tri.diag.clone();
    if n_vectors == 0 {
        tridiagonal_ql(&mut values, &tri.offdiag, None)?;
        return Ok(HermitianEigen { dim: n, values, vectors: Vec::new() });
    }
    let mut z = vec![0.0; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }
    tridiagonal_ql(&mut values, &tri.offdiag, Some(&mut z))?;
    let mut vectors = Vec::with_capacity(n * n_vectors);
    for k in 0..n_vectors {
        let mut v = tri.back_transform(&z[k * n..(k + 1) * n]);
        fix_phase(&mut v);
        vectors.extend_from_slice(&v);
    }
    Ok(HermitianEigen { dim: n, values, vectors })
}

/// Rotates `v` so its largest-magnitude component is real positive.
pub fn fix_phase(v: &mut [Complex64]) {
    let mut best = 0;
    let mut best_mag = -1.0;
    for (i, c) in v.iter().enumerate() {
        let mag = c.norm();
        if mag > best_mag * (1.0 + 1e-12) {
            best = i;
            best_mag = mag;
        }
    }
    if best_mag > 0.0 {
        let rot = v[best].conj() / best_mag;
        for c in v.iter_mut() {
            *c *= rot;
        }
        v[best] = Complex64::new(v[best].norm(), 0.0);
    }
}

/// Spectral 2-norm bound used to scale residual tolerances (max row sum).
pub fn norm_bound(a: &[Complex64], n: usize) -> f64 {
    (0..n)
        .map(|i| a[i * n..(i + 1) * n].iter().map(|c| c.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}
