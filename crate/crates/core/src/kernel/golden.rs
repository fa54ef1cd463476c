use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use super::{DetectionProblem, NonPositiveDiagonal};

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);

/// G = Ĥᴴ Ĥ + σ² I (full square, row-major) and z = Ĥᴴ y.
pub fn gram_and_matched_filter(p: &DetectionProblem) -> (Vec<C>, Vec<C>) {
    let (nt, nr) = (p.n_tx, p.n_rx);
    let h = |r: usize, c: usize| p.h[r * nt + c];
    let mut g = vec![ZERO; nt * nt];
    for i in 0..nt {
        for j in 0..=i {
            let mut s = ZERO;
            for k in 0..nr {
                s += h(k, i).conj() * h(k, j);
            }
            if i == j {
                // exactly real and exactly Hermitian
                s = C::new(s.re + p.sigma2, 0.0);
            }
            g[i * nt + j] = s;
            g[j * nt + i] = s.conj();
        }
    }
    let z = (0..nt)
        .map(|i| (0..nr).map(|k| h(k, i).conj() * p.y[k]).sum())
        .collect();
    (g, z)
}

/// Lower-triangular L with G = L·Lᴴ and a real positive diagonal.
pub fn cholesky(g: &[C], n: usize) -> Result<Vec<C>, NonPositiveDiagonal> {
    let mut l = vec![ZERO; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = g[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k].conj();
            }
            if i == j {
                if !(s.re > 0.0) {
                    return Err(NonPositiveDiagonal { index: i });
                }
                l[i * n + i] = C::new(libm::sqrt(s.re), 0.0);
            } else {
                l[i * n + j] = s / l[j * n + j].re;
            }
        }
    }
    Ok(l)
}

/// Solve L·u = b for lower-triangular L.
pub fn tri_solve_lower(l: &[C], b: &[C], n: usize) -> Vec<C> {
    let mut u = vec![ZERO; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * u[k];
        }
        u[i] = s / l[i * n + i];
    }
    u
}

/// Solve Lᴴ·x = u, given the lower-triangular L.
pub fn tri_solve_upper(l: &[C], u: &[C], n: usize) -> Vec<C> {
    let mut x = vec![ZERO; n];
    for i in (0..n).rev() {
        let mut s = u[i];
        for k in i + 1..n {
            s -= l[k * n + i].conj() * x[k];
        }
        x[i] = s / l[i * n + i].conj();
    }
    x
}

/// Double-precision MMSE estimate through the Cholesky path.
pub fn golden_mmse(p: &DetectionProblem) -> Result<Vec<C>, NonPositiveDiagonal> {
    let (g, z) = gram_and_matched_filter(p);
    let l = cholesky(&g, p.n_tx)?;
    let u = tri_solve_lower(&l, &z, p.n_tx);
    Ok(tri_solve_upper(&l, &u, p.n_tx))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_cholesky() {
        let g = [C::new(4.0, 0.0), ZERO, ZERO, C::new(9.0, 0.0)];
        let l = cholesky(&g, 2).unwrap();
        assert_eq!(l, vec![C::new(2.0, 0.0), ZERO, ZERO, C::new(3.0, 0.0)]);
        let id = [C::new(1.0, 0.0), ZERO, ZERO, C::new(1.0, 0.0)];
        assert_eq!(cholesky(&id, 2).unwrap(), id.to_vec());
        let bad = [C::new(-1.0, 0.0)];
        assert_eq!(cholesky(&bad, 1), Err(NonPositiveDiagonal { index: 0 }));
    }

    #[test]
    fn scalar_identity_channel() {
        let p = DetectionProblem {
            n_tx: 1,
            n_rx: 1,
            h: vec![C::new(1.0, 0.0)],
            y: vec![C::new(2.0, 0.0)],
            sigma2: 1.0,
        };
        // 2/√2/√2 is not exactly one in binary64
        let x = golden_mmse(&p).unwrap();
        assert!((x[0] - C::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn identity_with_vanishing_noise() {
        let p = DetectionProblem {
            n_tx: 2,
            n_rx: 2,
            h: vec![C::new(1.0, 0.0), ZERO, ZERO, C::new(1.0, 0.0)],
            y: vec![C::new(0.3, -0.7), C::new(-1.1, 0.2)],
            sigma2: 1e-12,
        };
        let x = golden_mmse(&p).unwrap();
        for (a, b) in x.iter().zip(&p.y) {
            assert!((a - b).norm() < 1e-11);
        }
    }
}
