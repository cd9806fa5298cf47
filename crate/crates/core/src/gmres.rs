//! Matrix-free GMRES without restarts.
//!
//! The operator is only ever applied to vectors, which is what the
//! continuation method needs: its Jacobian-vector products come from forward
//! differences of the optimality residual.

use alloc::vec;
use alloc::vec::Vec;


#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GmresStatus {
    /// Residual fell below the requested tolerance.
    Converged,
    /// The Krylov space became invariant; the iterate solves the system.
    HappyBreakdown,
    /// Iteration cap reached above tolerance; the best iterate is returned.
    Stagnated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresOutcome {
    pub iterations: usize,
    pub residual_norm: f64,
    pub status: GmresStatus,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves `A x = b` starting from the contents of `x`. `apply(v, out)` writes
/// `A v` into `out`. Stops after `max_iter` Arnoldi steps or once the residual
/// norm drops below `tol`.
pub fn gmres<A>(mut apply: A, b: &[f64], x: &mut [f64], max_iter: usize, tol: f64) -> GmresOutcome
where
    A: FnMut(&[f64], &mut [f64]),
{
    let n = b.len();
    assert_eq!(x.len(), n, "gmres: x and b differ in length");
    let k_max = max_iter.min(n).max(1);

    let mut r = vec![0.0; n];
    apply(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let beta = norm(&r);
    if beta <= tol || beta == 0.0 {
        return GmresOutcome { iterations: 0, residual_norm: beta, status: GmresStatus::Converged };
    }

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k_max + 1);
    basis.push(r.iter().map(|v| v / beta).collect());
    // Hessenberg columns, already rotated.
    let mut hess: Vec<Vec<f64>> = Vec::with_capacity(k_max);
    let mut cs: Vec<f64> = Vec::with_capacity(k_max);
    let mut sn: Vec<f64> = Vec::with_capacity(k_max);
    let mut g = vec![0.0; k_max + 1];
    g[0] = beta;

    let mut status = GmresStatus::Stagnated;
    let mut k = 0;
    let mut w = vec![0.0; n];
    while k < k_max {
        apply(&basis[k], &mut w);
        let w_norm0 = norm(&w);
        let mut h = vec![0.0; k + 2];
        // modified Gram-Schmidt
        for (j, v) in basis.iter().enumerate() {
            let hj = dot(&w, v);
            h[j] = hj;
            for (wi, vi) in w.iter_mut().zip(v) {
                *wi -= hj * vi;
            }
        }
        let h_next = norm(&w);
        h[k + 1] = h_next;
        for j in 0..k {
            let t = cs[j] * h[j] + sn[j] * h[j + 1];
            h[j + 1] = -sn[j] * h[j] + cs[j] * h[j + 1];
            h[j] = t;
        }
        let denom = h[k].hypot(h[k + 1]);
        let (c, s) = if denom == 0.0 { (1.0, 0.0) } else { (h[k] / denom, h[k + 1] / denom) };
        h[k] = denom;
        h[k + 1] = 0.0;
        cs.push(c);
        sn.push(s);
        g[k + 1] = -s * g[k];
        g[k] *= c;
        hess.push(h);
        k += 1;

        let res = g[k].abs();
        if h_next <= 1e-14 * w_norm0.max(f64::MIN_POSITIVE) {
            status = GmresStatus::HappyBreakdown;
            break;
        }
        if res <= tol {
            status = GmresStatus::Converged;
            break;
        }
        basis.push(w.iter().map(|v| v / h_next).collect());
    }

    // back substitution on the k×k upper-triangular system
    let mut y = vec![0.0; k];
    for i in (0..k).rev() {
        let mut acc = g[i];
        for j in (i + 1)..k {
            acc -= hess[j][i] * y[j];
        }
        y[i] = if hess[i][i] != 0.0 { acc / hess[i][i] } else { 0.0 };
    }
    for (j, yj) in y.iter().enumerate() {
        for (xi, vi) in x.iter_mut().zip(&basis[j]) {
            *xi += yj * vi;
        }
    }
    GmresOutcome { iterations: k, residual_norm: g[k].abs(), status }
}
