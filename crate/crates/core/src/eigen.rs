//! Lowest eigenpair of large Hermitian operators.
//!
//! Lanczos with full reorthogonalization and thick (Krylov-Schur style)
//! restarts: once the basis reaches `max_basis` vectors, the `keep` lowest Ritz
//! vectors are retained together with the residual direction and the
//! recurrence continues from there.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use rand::Rng as _;

use crate::sparse::{axpy, dot, norm, HermitianOperator};
use crate::{Error, Result, C64};

#[derive(Debug, Clone)]
pub struct LanczosOptions {
    pub max_basis: usize,
    pub keep: usize,
    /// Target for `||A v - lambda v||`.
    pub tol: f64,
    pub max_matvecs: usize,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions {
            max_basis: 64,
            keep: 12,
            tol: 1e-8,
            max_matvecs: 20_000,
            seed: 0x5eed_1a2c,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigenResult {
    pub eigenvalue: f64,
    /// Euclidean-normalized eigenvector.
    pub eigenvector: Vec<C64>,
    pub residual_norm: f64,
    pub iterations: usize,
}

/// Smallest eigenpair of `op`. `start` seeds the Krylov space (warm start);
/// otherwise a deterministic random vector is used.
pub fn lowest_eigenpair<A: HermitianOperator + ?Sized>(
    op: &A,
    start: Option<&[C64]>,
    opts: &LanczosOptions,
) -> Result<EigenResult> {
    let n = op.dim();
    if n == 0 {
        return Err(Error::invalid("operator", "empty operator"));
    }
    let m = opts.max_basis.clamp(2, n.max(2));
    let keep = opts.keep.clamp(1, m - 1);

    let mut v0 = match start {
        Some(s) if s.len() == n && norm(s) > 0.0 => s.to_vec(),
        Some(s) if s.len() != n => {
            return Err(Error::ShapeMismatch {
                expected: n,
                found: s.len(),
            })
        }
        _ => {
            let mut rng = crate::rng_from_seed(opts.seed);
            (0..n)
                .map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                .collect()
        }
    };
    let nv = norm(&v0);
    v0.iter_mut().for_each(|z| *z /= nv);

    if n == 1 {
        let mut y = vec![C64::new(0.0, 0.0); 1];
        op.apply(&v0, &mut y);
        return Ok(EigenResult {
            eigenvalue: y[0].re / v0[0].norm_sqr(),
            eigenvector: v0,
            residual_norm: 0.0,
            iterations: 1,
        });
    }

    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(m + 1);
    basis.push(v0);
    // projected matrix, row-major m x m
    let mut h = vec![C64::new(0.0, 0.0); m * m];
    let mut w = vec![C64::new(0.0, 0.0); n];
    let mut matvecs = 0usize;
    // number of leading basis vectors whose projected columns are already known
    let mut locked_cols = 0usize;

    loop {
        // Expand the basis up to m vectors.
        let mut beta = 0.0;
        let mut j = locked_cols;
        while j < m {
            op.apply(&basis[j], &mut w);
            matvecs += 1;
            let mut coeffs = vec![C64::new(0.0, 0.0); j + 1];
            for pass in 0..2 {
                for (i, vi) in basis.iter().enumerate().take(j + 1) {
                    let c = dot(vi, &w);
                    axpy(-c, vi, &mut w);
                    if pass == 0 {
                        coeffs[i] = c;
                    } else {
                        coeffs[i] += c;
                    }
                }
            }
            for (i, c) in coeffs.iter().enumerate() {
                h[i * m + j] = *c;
                h[j * m + i] = c.conj();
            }
            h[j * m + j] = C64::new(h[j * m + j].re, 0.0);
            beta = norm(&w);
            if j + 1 < m {
                if beta <= 1e-14 * (1.0 + h[j * m + j].norm()) {
                    // invariant subspace found; restart the expansion randomly
                    let mut rng = crate::rng_from_seed(opts.seed ^ (matvecs as u64));
                    for z in w.iter_mut() {
                        *z = C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
                    }
                    for _ in 0..2 {
                        for vi in basis.iter().take(j + 1) {
                            let c = dot(vi, &w);
                            axpy(-c, vi, &mut w);
                        }
                    }
                    let nw = norm(&w);
                    w.iter_mut().for_each(|z| *z /= nw);
                    beta = 0.0;
                } else {
                    w.iter_mut().for_each(|z| *z /= beta);
                }
                h[(j + 1) * m + j] = C64::new(beta, 0.0);
                h[j * m + j + 1] = C64::new(beta, 0.0);
                if basis.len() <= j + 1 {
                    basis.push(w.clone());
                } else {
                    basis[j + 1].copy_from_slice(&w);
                }
            }
            j += 1;
        }

        // Rayleigh-Ritz on the full basis.
        let (theta, s) = hermitian_eigen(&h, m);
        let resid: Vec<f64> = (0..m).map(|k| beta * s[(m - 1) * m + k].norm()).collect();

        let converged = resid[0] <= opts.tol;
        if converged || matvecs >= opts.max_matvecs {
            let mut vec_out = vec![C64::new(0.0, 0.0); n];
            for (i, vi) in basis.iter().enumerate().take(m) {
                axpy(s[i * m], vi, &mut vec_out);
            }
            let nv = norm(&vec_out);
            vec_out.iter_mut().for_each(|z| *z /= nv);
            // exact residual of the returned pair
            let mut av = vec![C64::new(0.0, 0.0); n];
            op.apply(&vec_out, &mut av);
            let lam = dot(&vec_out, &av).re;
            axpy(C64::new(-lam, 0.0), &vec_out, &mut av);
            let r = norm(&av);
            if !converged && r > opts.tol {
                return Err(Error::NotConverged {
                    iterations: matvecs,
                    residual: r,
                });
            }
            return Ok(EigenResult {
                eigenvalue: lam,
                eigenvector: vec_out,
                residual_norm: r,
                iterations: matvecs,
            });
        }

        // Thick restart: keep the lowest Ritz vectors plus the residual direction.
        let mut kept: Vec<Vec<C64>> = Vec::with_capacity(keep + 1);
        for k in 0..keep {
            let mut y = vec![C64::new(0.0, 0.0); n];
            for (i, vi) in basis.iter().enumerate().take(m) {
                axpy(s[i * m + k], vi, &mut y);
            }
            kept.push(y);
        }
        // residual direction w (already orthogonal to the old basis, unit norm)
        let mut f = w.clone();
        for _ in 0..2 {
            for y in &kept {
                let c = dot(y, &f);
                axpy(-c, y, &mut f);
            }
        }
        let nf = norm(&f);
        f.iter_mut().for_each(|z| *z /= nf);
        kept.push(f);

        h.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        for k in 0..keep {
            h[k * m + k] = C64::new(theta[k], 0.0);
            let b = s[(m - 1) * m + k] * beta;
            h[keep * m + k] = b;
            h[k * m + keep] = b.conj();
        }
        basis.truncate(0);
        basis.extend(kept);
        locked_cols = keep;
    }
}

/// Eigen-decomposition of a dense Hermitian matrix (row-major, `m x m`) by
/// cyclic complex Jacobi rotations. Returns ascending eigenvalues and the
/// matrix of eigenvectors stored column-wise (row-major storage).
pub fn hermitian_eigen(a: &[C64], m: usize) -> (Vec<f64>, Vec<C64>) {
    let mut a = a.to_vec();
    let mut v = vec![C64::new(0.0, 0.0); m * m];
    for i in 0..m {
        v[i * m + i] = C64::new(1.0, 0.0);
        a[i * m + i] = C64::new(a[i * m + i].re, 0.0);
    }
    let scale: f64 = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().max(1e-300);
    for _sweep in 0..100 {
        let off: f64 = (0..m)
            .flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * m + j].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..m {
            for q in (p + 1)..m {
                let apq = a[p * m + q];
                let r = apq.norm();
                if r <= 1e-300 {
                    continue;
                }
                let app = a[p * m + p].re;
                let aqq = a[q * m + q].re;
                let phase = apq / r; // e^{i phi}
                let theta = (aqq - app) / (2.0 * r);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (theta * theta + 1.0).sqrt())
                } else {
                    -1.0 / (-theta + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // U acts on columns p, q
                let upp = C64::new(c, 0.0);
                let upq = C64::new(s, 0.0);
                let uqp = C64::new(-s, 0.0) * phase.conj();
                let uqq = C64::new(c, 0.0) * phase.conj();
                // columns: A <- A U
                for k in 0..m {
                    let akp = a[k * m + p];
                    let akq = a[k * m + q];
                    a[k * m + p] = akp * upp + akq * uqp;
                    a[k * m + q] = akp * upq + akq * uqq;
                }
                // rows: A <- U^H A
                for k in 0..m {
                    let apk = a[p * m + k];
                    let aqk = a[q * m + k];
                    a[p * m + k] = upp.conj() * apk + uqp.conj() * aqk;
                    a[q * m + k] = upq.conj() * apk + uqq.conj() * aqk;
                }
                a[p * m + q] = C64::new(0.0, 0.0);
                a[q * m + p] = C64::new(0.0, 0.0);
                a[p * m + p] = C64::new(a[p * m + p].re, 0.0);
                a[q * m + q] = C64::new(a[q * m + q].re, 0.0);
                for k in 0..m {
                    let vkp = v[k * m + p];
                    let vkq = v[k * m + q];
                    v[k * m + p] = vkp * upp + vkq * uqp;
                    v[k * m + q] = vkp * upq + vkq * uqq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| a[i * m + i].re.total_cmp(&a[j * m + j].re));
    let vals = order.iter().map(|&i| a[i * m + i].re).collect();
    let mut vecs = vec![C64::new(0.0, 0.0); m * m];
    for (new, &old) in order.iter().enumerate() {
        for k in 0..m {
            vecs[k * m + new] = v[k * m + old];
        }
    }
    (vals, vecs)
}
