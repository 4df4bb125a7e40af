//! Fock-basis matrix elements of the displacement operator `D(beta)`.

use num_complex::Complex64;

/// Generalized Laguerre polynomial `L_n^(alpha)(x)` by upward recurrence.
pub fn laguerre(n: usize, alpha: f64, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 + alpha - x;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + alpha - x) * cur - (kf + alpha) * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Real magnitude part of `<m|D(r e^{i theta})|n>` on a `dim`-level truncation, row major.
///
/// The full element is `d[m][n] * exp(i (m - n) theta)`, so the phase of the
/// displacement can be applied as two diagonal phase vectors.
pub fn displacement_magnitudes(r: f64, dim: usize) -> Vec<f64> {
    let x = r * r;
    let envelope = (-x / 2.0).exp();
    let mut d = vec![0.0; dim * dim];
    for m in 0..dim {
        for n in 0..=m {
            let k = m - n;
            // sqrt(n!/m!) r^k
            let mut pref = 1.0;
            for j in (n + 1)..=m {
                pref *= r / (j as f64).sqrt();
            }
            let v = pref * envelope * laguerre(n, k as f64, x);
            d[m * dim + n] = v;
            if m != n {
                d[n * dim + m] = if k % 2 == 0 { v } else { -v };
            }
        }
    }
    d
}

/// Dense `D(beta)` on a `dim`-level truncation.
pub fn displacement_matrix(beta: Complex64, dim: usize) -> Vec<Complex64> {
    let d = displacement_magnitudes(beta.norm(), dim);
    let theta = beta.arg();
    let mut out = vec![Complex64::new(0.0, 0.0); dim * dim];
    for m in 0..dim {
        for n in 0..dim {
            out[m * dim + n] = d[m * dim + n] * Complex64::from_polar(1.0, (m as f64 - n as f64) * theta);
        }
    }
    out
}

/// `<n|D(gamma)|n>` without truncation.
pub fn diagonal_element(gamma: Complex64, n: usize) -> f64 {
    let x = gamma.norm_sqr();
    (-x / 2.0).exp() * laguerre(n, 0.0, x)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// exp(A) by scaling and squaring with a Taylor series; independent oracle.
    fn expm(a: &[Complex64], dim: usize) -> Vec<Complex64> {
        let norm: f64 = a.iter().map(|z| z.norm()).sum::<f64>();
        let squarings = (norm.max(1.0).log2().ceil() as i32 + 4).max(0) as u32;
        let scale = 0.5f64.powi(squarings as i32);
        let scaled: Vec<Complex64> = a.iter().map(|z| z * scale).collect();
        let mut result = identity(dim);
        let mut term = identity(dim);
        for k in 1..40 {
            term = matmul(&term, &scaled, dim);
            for z in term.iter_mut() {
                *z /= k as f64;
            }
            for (r, t) in result.iter_mut().zip(&term) {
                *r += t;
            }
        }
        for _ in 0..squarings {
            result = matmul(&result, &result, dim);
        }
        result
    }

    fn identity(dim: usize) -> Vec<Complex64> {
        let mut m = vec![Complex64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            m[i * dim + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    fn matmul(a: &[Complex64], b: &[Complex64], dim: usize) -> Vec<Complex64> {
        let mut c = vec![Complex64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            for k in 0..dim {
                let aik = a[i * dim + k];
                for j in 0..dim {
                    c[i * dim + j] += aik * b[k * dim + j];
                }
            }
        }
        c
    }

    #[test]
    fn matches_matrix_exponential_in_large_space() {
        let big = 70;
        let small = 12;
        for &beta in &[Complex64::new(0.0, 0.083), Complex64::new(0.7, -0.4), Complex64::new(-1.3, 0.2)] {
            let mut gen = vec![Complex64::new(0.0, 0.0); big * big];
            for n in 0..big - 1 {
                let s = ((n + 1) as f64).sqrt();
                gen[(n + 1) * big + n] += beta * s; // beta a^dagger
                gen[n * big + n + 1] -= beta.conj() * s; // -beta* a
            }
            let exact = expm(&gen, big);
            let ours = displacement_matrix(beta, small);
            for m in 0..small {
                for n in 0..small {
                    let diff = (exact[m * big + n] - ours[m * small + n]).norm();
                    assert!(diff < 1e-11, "beta={beta} m={m} n={n} diff={diff}");
                }
            }
        }
    }

    #[test]
    fn laguerre_low_orders() {
        let x = 0.37;
        assert!((laguerre(2, 1.0, x) - (x * x / 2.0 - 3.0 * x + 3.0)).abs() < 1e-14);
        assert!((laguerre(1, 0.0, x) - (1.0 - x)).abs() < 1e-15);
    }

    #[test]
    fn diagonal_element_of_ground_state() {
        let g = Complex64::new(0.3, 0.4);
        assert!((diagonal_element(g, 0) - (-0.125f64).exp()).abs() < 1e-15);
    }
}
