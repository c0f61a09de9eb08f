//! Dense complex Gaussian elimination for the small boundary-matching systems.

use num_complex::Complex64 as C64;

/// Solution of `A x = b` together with the infinity-norm condition number of `A`.
#[derive(Debug, Clone, Copy)]
pub struct Solved<const N: usize> {
    pub x: [C64; N],
    pub condition: f64,
}

/// LU factorization with partial pivoting; `None` if a pivot is exactly zero.
#[derive(Debug, Clone, Copy)]
struct Lu<const N: usize> {
    a: [[C64; N]; N],
    perm: [usize; N],
}

impl<const N: usize> Lu<N> {
    fn factor(mut a: [[C64; N]; N]) -> Option<Self> {
        let mut perm = [0usize; N];
        for (i, p) in perm.iter_mut().enumerate() {
            *p = i;
        }
        for col in 0..N {
            let mut best = col;
            let mut best_mag = a[col][col].norm();
            for row in col + 1..N {
                let mag = a[row][col].norm();
                if mag > best_mag {
                    best = row;
                    best_mag = mag;
                }
            }
            if best_mag == 0.0 {
                return None;
            }
            a.swap(col, best);
            perm.swap(col, best);
            let pivot = a[col][col];
            for row in col + 1..N {
                let f = a[row][col] / pivot;
                a[row][col] = f;
                for k in col + 1..N {
                    let v = a[col][k];
                    a[row][k] -= f * v;
                }
            }
        }
        Some(Lu { a, perm })
    }

    fn solve(&self, b: &[C64; N]) -> [C64; N] {
        let mut y = [C64::new(0.0, 0.0); N];
        for i in 0..N {
            let mut s = b[self.perm[i]];
            for k in 0..i {
                s -= self.a[i][k] * y[k];
            }
            y[i] = s;
        }
        let mut x = [C64::new(0.0, 0.0); N];
        for i in (0..N).rev() {
            let mut s = y[i];
            for k in i + 1..N {
                s -= self.a[i][k] * x[k];
            }
            x[i] = s / self.a[i][i];
        }
        x
    }
}

fn inf_norm<const N: usize>(a: &[[C64; N]; N]) -> f64 {
    a.iter()
        .map(|row| row.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Solves `A x = b`. The condition number is `‖A‖∞ ‖A⁻¹‖∞`, infinite when a
/// pivot vanishes (in which case `x` is all NaN).
pub fn solve<const N: usize>(a: [[C64; N]; N], b: [C64; N]) -> Solved<N> {
    let Some(lu) = Lu::factor(a) else {
        return Solved {
            x: [C64::new(f64::NAN, f64::NAN); N],
            condition: f64::INFINITY,
        };
    };
    let x = lu.solve(&b);
    let mut inv_rows = [[C64::new(0.0, 0.0); N]; N];
    for j in 0..N {
        let mut e = [C64::new(0.0, 0.0); N];
        e[j] = C64::new(1.0, 0.0);
        let col = lu.solve(&e);
        for i in 0..N {
            inv_rows[i][j] = col[i];
        }
    }
    let condition = inf_norm(&a) * inf_norm(&inv_rows);
    Solved {
        x,
        condition: if condition.is_finite() {
            condition
        } else {
            f64::INFINITY
        },
    }
}
