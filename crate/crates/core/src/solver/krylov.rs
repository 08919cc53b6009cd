//! Restarted GMRES with right preconditioning.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresStats {
    pub iterations: usize,
    /// Final residual `||b - A x|| / ||b||`.
    pub relative_residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves `A x = b` as `A M y = b`, `x = M y`. Starts from `x = 0`.
pub fn gmres(
    op: impl Fn(&[f64]) -> Vec<f64>,
    precond: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    tol: f64,
    restart: usize,
    max_iter: usize,
) -> (Vec<f64>, GmresStats) {
    let len = b.len();
    let bnorm = norm(b);
    let mut x = vec![0.0; len];
    if bnorm == 0.0 {
        return (
            x,
            GmresStats {
                iterations: 0,
                relative_residual: 0.0,
                converged: true,
            },
        );
    }
    let mut total = 0;
    let mut previous = f64::INFINITY;
    while total < max_iter {
        let ax = op(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = norm(&r);
        let rel = beta / bnorm;
        if rel <= tol {
            return (
                x,
                GmresStats {
                    iterations: total,
                    relative_residual: rel,
                    converged: true,
                },
            );
        }
        // a restart cycle that gains nothing will not gain anything later
        if rel >= 0.999 * previous {
            break;
        }
        previous = rel;
        let m = restart.min(max_iter - total);
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut h = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            let z = precond(&basis[k]);
            let mut w = op(&z);
            let before = norm(&w);
            for (i, v) in basis.iter().enumerate() {
                let hij = dot(&w, v);
                h[i][k] = hij;
                for (wj, vj) in w.iter_mut().zip(v) {
                    *wj -= hij * vj;
                }
            }
            let wn = norm(&w);
            h[k + 1][k] = wn;
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let denom = (h[k][k] * h[k][k] + h[k + 1][k] * h[k + 1][k]).sqrt();
            if denom == 0.0 {
                k_used = k;
                break;
            }
            cs[k] = h[k][k] / denom;
            sn[k] = h[k + 1][k] / denom;
            h[k][k] = denom;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            total += 1;
            k_used = k + 1;
            // breakdown: the Krylov space is invariant up to rounding
            if g[k + 1].abs() / bnorm <= tol || wn <= 1e-13 * before {
                break;
            }
            basis.push(w.iter().map(|v| v / wn).collect());
        }
        // back substitution for the Krylov coefficients
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        let mut update = vec![0.0; len];
        for (yi, v) in y.iter().zip(&basis) {
            for (u, vi) in update.iter_mut().zip(v) {
                *u += yi * vi;
            }
        }
        let dx = precond(&update);
        for (xi, d) in x.iter_mut().zip(&dx) {
            *xi += d;
        }
        if k_used == 0 {
            break;
        }
    }
    let ax = op(&x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let rel = norm(&r) / bnorm;
    (
        x,
        GmresStats {
            iterations: total,
            relative_residual: rel,
            converged: rel <= tol,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn solves_dense_system() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = 30;
        let a = DMatrix::from_fn(d, d, |i, j| {
            if i == j {
                4.0
            } else {
                rng.random_range(-0.2..0.2)
            }
        });
        let b: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let op = |x: &[f64]| (&a * DVector::from_column_slice(x)).as_slice().to_vec();
        let (x, stats) = gmres(op, |v: &[f64]| v.to_vec(), &b, 1e-12, 10, 500);
        assert!(stats.converged, "{stats:?}");
        let r = &a * DVector::from_column_slice(&x) - DVector::from_column_slice(&b);
        assert!(r.norm() < 1e-10);
    }

    #[test]
    fn preconditioner_is_applied() {
        let diag: Vec<f64> = (1..=50).map(|i| i as f64).collect();
        let b = vec![1.0; 50];
        let op = |x: &[f64]| x.iter().zip(&diag).map(|(a, d)| a * d).collect::<Vec<_>>();
        let pre = |x: &[f64]| x.iter().zip(&diag).map(|(a, d)| a / d).collect::<Vec<_>>();
        let (x, stats) = gmres(op, pre, &b, 1e-14, 20, 20);
        assert!(stats.iterations <= 2);
        assert!((x[9] - 0.1).abs() < 1e-14);
    }

    #[test]
    fn zero_rhs() {
        let (x, stats) = gmres(
            |v: &[f64]| v.to_vec(),
            |v: &[f64]| v.to_vec(),
            &[0.0; 4],
            1e-12,
            4,
            4,
        );
        assert_eq!(x, vec![0.0; 4]);
        assert!(stats.converged);
    }
}
