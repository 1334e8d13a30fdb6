//! Dense determinants by LU factorization with partial pivoting.

/// `sign * exp(log_abs)`; `sign == 0` for an exactly singular matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogDet {
    pub sign: f64,
    pub log_abs: f64,
}

impl LogDet {
    pub fn value(&self) -> f64 {
        if self.sign == 0.0 {
            0.0
        } else {
            self.sign * self.log_abs.exp()
        }
    }
}

/// Determinant of the row-major `n x n` matrix `a`, which is overwritten by
/// its LU factors. `log|det|` is accumulated so tiny determinants do not
/// underflow before the caller sees them.
pub fn log_det_in_place(a: &mut [f64], n: usize) -> LogDet {
    assert_eq!(a.len(), n * n, "matrix buffer has wrong length");
    let mut sign = 1.0;
    let mut log_abs = 0.0;
    for k in 0..n {
        let (pivot_row, pivot_abs) = (k..n)
            .map(|i| (i, a[i * n + k].abs()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pivot_abs == 0.0 || !pivot_abs.is_finite() {
            return LogDet {
                sign: if pivot_abs == 0.0 { 0.0 } else { f64::NAN },
                log_abs: if pivot_abs == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    f64::NAN
                },
            };
        }
        if pivot_row != k {
            for j in 0..n {
                a.swap(k * n + j, pivot_row * n + j);
            }
            sign = -sign;
        }
        let pivot = a[k * n + k];
        if pivot < 0.0 {
            sign = -sign;
        }
        log_abs += pivot.abs().ln();

        let (head, tail) = a.split_at_mut((k + 1) * n);
        let pivot_tail = &head[k * n + k + 1..(k + 1) * n];
        for row in tail.chunks_exact_mut(n) {
            let factor = row[k] / pivot;
            if factor != 0.0 {
                for (x, &p) in row[k + 1..].iter_mut().zip(pivot_tail) {
                    *x -= factor * p;
                }
            }
        }
    }
    LogDet { sign, log_abs }
}

pub fn log_det(a: &[f64], n: usize) -> LogDet {
    let mut work = a.to_vec();
    log_det_in_place(&mut work, n)
}

/// Solve a tridiagonal system (Thomas algorithm). `lower[0]` and
/// `upper[n-1]` are ignored.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let denom = diag[i] - lower[i] * c[i - 1];
        c[i] = if i + 1 < n { upper[i] / denom } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_determinants() {
        assert_eq!(log_det(&[2.0], 1).value(), 2.0);
        let d = log_det(&[0.0, 1.0, 1.0, 0.0], 2);
        assert_eq!(d.sign, -1.0);
        assert!((d.value() + 1.0).abs() < 1e-15);
        let d = log_det(&[1.0, 2.0, 2.0, 4.0], 2);
        assert!(d.value().abs() < 1e-15);
        let d = log_det(&[2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0], 3);
        assert!((d.value() - 18.0).abs() < 1e-13);
    }

    #[test]
    fn no_underflow_for_tiny_determinants() {
        let n = 400;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            a[i * n + i] = 1e-3;
        }
        let d = log_det(&a, n);
        assert_eq!(d.sign, 1.0);
        assert!((d.log_abs - n as f64 * 1e-3f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn tridiagonal_solve() {
        let lower = [0.0, 1.0, 1.0, 1.0];
        let diag = [4.0, 4.0, 4.0, 4.0];
        let upper = [1.0, 1.0, 1.0, 0.0];
        let x = [1.0, -2.0, 3.0, 0.5];
        let rhs: Vec<f64> = (0..4)
            .map(|i| {
                diag[i] * x[i]
                    + if i > 0 { lower[i] * x[i - 1] } else { 0.0 }
                    + if i < 3 { upper[i] * x[i + 1] } else { 0.0 }
            })
            .collect();
        let got = solve_tridiagonal(&lower, &diag, &upper, &rhs);
        for (g, e) in got.iter().zip(x) {
            assert!((g - e).abs() < 1e-14);
        }
    }
}
