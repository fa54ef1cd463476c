//! Direct-inverse MMSE: form Hᴴ H + σ² I explicitly, invert it by
//! Gauss-Jordan elimination with partial pivoting, then multiply.

use num_complex::Complex64;

/// Inverse of a square row-major matrix. Panics if it is singular.
pub fn inverse(a: &[Complex64], n: usize) -> Vec<Complex64> {
    assert_eq!(a.len(), n * n);
    let w = 2 * n;
    let mut m = vec![Complex64::new(0.0, 0.0); n * w];
    for i in 0..n {
        for j in 0..n {
            m[i * w + j] = a[i * n + j];
        }
        m[i * w + n + i] = Complex64::new(1.0, 0.0);
    }
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| m[x * w + col].norm().total_cmp(&m[y * w + col].norm()))
            .unwrap();
        assert!(m[piv * w + col].norm() > 0.0, "singular matrix");
        if piv != col {
            for j in 0..w {
                m.swap(piv * w + j, col * w + j);
            }
        }
        let inv = Complex64::new(1.0, 0.0) / m[col * w + col];
        for j in 0..w {
            m[col * w + j] *= inv;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = m[r * w + col];
            if f == Complex64::new(0.0, 0.0) {
                continue;
            }
            for j in 0..w {
                let v = m[col * w + j];
                m[r * w + j] -= f * v;
            }
        }
    }
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        out.extend_from_slice(&m[i * w + n..i * w + w]);
    }
    out
}

/// x = (Hᴴ H + σ² I)⁻¹ Hᴴ y with H row-major n_rx × n_tx.
pub fn mmse_direct(
    h: &[Complex64],
    y: &[Complex64],
    sigma2: f64,
    n_rx: usize,
    n_tx: usize,
) -> Vec<Complex64> {
    let mut g = vec![Complex64::new(0.0, 0.0); n_tx * n_tx];
    for i in 0..n_tx {
        for j in 0..n_tx {
            let mut s = Complex64::new(0.0, 0.0);
            for r in 0..n_rx {
                s += h[r * n_tx + i].conj() * h[r * n_tx + j];
            }
            g[i * n_tx + j] = s;
        }
        g[i * n_tx + i] += sigma2;
    }
    let mut z = vec![Complex64::new(0.0, 0.0); n_tx];
    for (i, zi) in z.iter_mut().enumerate() {
        for r in 0..n_rx {
            *zi += h[r * n_tx + i].conj() * y[r];
        }
    }
    let gi = inverse(&g, n_tx);
    (0..n_tx)
        .map(|i| (0..n_tx).map(|j| gi[i * n_tx + j] * z[j]).sum())
        .collect()
}
