//! Composite quadrature on uniform grids.

use std::ops::{Add, Mul};

/// Composite Simpson rule for samples `f_0, …, f_{m}` with spacing `h`.
///
/// An odd number of intervals is handled by closing with the 3/8 rule on
/// the last three. Two samples fall back to the trapezoid.
pub fn simpson<T>(f: &[T], h: f64) -> T
where
    T: Copy + Add<Output = T> + Mul<f64, Output = T> + Default,
{
    let m = f.len();
    match m {
        0 | 1 => T::default(),
        2 => (f[0] + f[1]) * (0.5 * h),
        _ => {
            let intervals = m - 1;
            let (simpson_end, tail) = if intervals % 2 == 0 {
                (m - 1, false)
            } else {
                (m - 4, true)
            };
            let mut acc = T::default();
            if simpson_end >= 2 {
                let mut odd = T::default();
                let mut even = T::default();
                for j in 1..simpson_end {
                    if j % 2 == 1 {
                        odd = odd + f[j];
                    } else {
                        even = even + f[j];
                    }
                }
                acc = (f[0] + f[simpson_end] + odd * 4.0 + even * 2.0) * (h / 3.0);
            }
            if tail {
                let k = m - 4;
                acc = acc + (f[k] + f[k + 1] * 3.0 + f[k + 2] * 3.0 + f[k + 3]) * (3.0 * h / 8.0);
            }
            acc
        }
    }
}

/// Simpson weights (the same rule as [`simpson`]) for `m` samples.
pub fn simpson_weights(m: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; m];
    match m {
        0 | 1 => {}
        2 => {
            w[0] = 0.5 * h;
            w[1] = 0.5 * h;
        }
        _ => {
            let intervals = m - 1;
            let (end, tail) = if intervals % 2 == 0 {
                (m - 1, false)
            } else {
                (m - 4, true)
            };
            if end >= 2 {
                for (j, wj) in w.iter_mut().enumerate().take(end + 1) {
                    *wj = if j == 0 || j == end {
                        h / 3.0
                    } else if j % 2 == 1 {
                        4.0 * h / 3.0
                    } else {
                        2.0 * h / 3.0
                    };
                }
            }
            if tail {
                let k = m - 4;
                for (i, c) in [1.0, 3.0, 3.0, 1.0].iter().enumerate() {
                    w[k + i] += c * 3.0 * h / 8.0;
                }
            }
        }
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_cubics_on_even_and_odd_interval_counts() {
        for m in [3usize, 4, 5, 8, 11, 12] {
            let h = 2.0 / (m - 1) as f64;
            let f: Vec<f64> = (0..m)
                .map(|j| {
                    let x = -1.0 + j as f64 * h;
                    x * x * x + 2.0 * x * x - x + 1.0
                })
                .collect();
            assert!(
                (simpson(&f, h) - (2.0 * 2.0 / 3.0 + 2.0)).abs() < 1e-13,
                "m = {m}"
            );
        }
    }

    #[test]
    fn weights_reproduce_rule() {
        for m in [2usize, 3, 4, 5, 6, 9, 10] {
            let w = simpson_weights(m, 0.25);
            let f: Vec<f64> = (0..m).map(|j| (j as f64 * 0.25).exp()).collect();
            let a: f64 = w.iter().zip(&f).map(|(w, f)| w * f).sum();
            assert!((a - simpson(&f, 0.25)).abs() < 1e-14, "m = {m}");
        }
    }
}
