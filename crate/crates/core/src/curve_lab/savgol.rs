use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Window length and polynomial order of a Savitzky-Golay smoother.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SavGolParams {
    pub window: usize,
    pub order: usize,
}

impl Default for SavGolParams {
    fn default() -> Self {
        SavGolParams { window: 11, order: 3 }
    }
}

impl SavGolParams {
    pub fn validate(&self) -> Result<()> {
        if self.window % 2 == 0 || self.window == 0 {
            return Err(Error::Config(format!("window {} must be odd", self.window)));
        }
        if self.order >= self.window {
            return Err(Error::Config(format!(
                "polynomial order {} must be below window {}",
                self.order, self.window
            )));
        }
        Ok(())
    }
}

/// Convolution weights that evaluate the least-squares polynomial fit at the window center.
pub fn savgol_coefficients<T: Scalar>(window: usize, order: usize) -> Result<Vec<T>> {
    SavGolParams { window, order }.validate()?;
    let half = (window / 2) as i64;
    let n = order + 1;
    // Offsets are scaled into [-1, 1] to keep the normal equations well conditioned.
    let scale = T::from_i64(half.max(1)).unwrap();
    let z: Vec<T> = (-half..=half).map(|k| T::from_i64(k).unwrap() / scale).collect();

    // Gram matrix G[a][b] = Σ z^(a+b), augmented with e0.
    let mut g = vec![vec![T::zero(); n + 1]; n];
    for (a, row) in g.iter_mut().enumerate() {
        for (b, cell) in row.iter_mut().take(n).enumerate() {
            *cell = z.iter().map(|&v| v.powi((a + b) as i32)).sum();
        }
        row[n] = if a == 0 { T::one() } else { T::zero() };
    }
    let u = solve_augmented(g)?;
    Ok(z.iter()
        .map(|&v| {
            u.iter()
                .enumerate()
                .fold(T::zero(), |acc, (j, &uj)| acc + uj * v.powi(j as i32))
        })
        .collect())
}

fn solve_augmented<T: Scalar>(mut m: Vec<Vec<T>>) -> Result<Vec<T>> {
    let n = m.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&a, &b| m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap())
            .unwrap();
        if m[pivot][col].abs() <= T::epsilon() {
            return Err(Error::Config("singular Savitzky-Golay normal equations".into()));
        }
        m.swap(col, pivot);
        for r in 0..n {
            if r != col {
                let f = m[r][col] / m[col][col];
                for c in col..=n {
                    let v = m[col][c];
                    m[r][c] = m[r][c] - f * v;
                }
            }
        }
    }
    Ok((0..n).map(|r| m[r][n] / m[r][r]).collect())
}

/// Smooths `signal` with a centered Savitzky-Golay filter.
///
/// Edges are padded by point reflection about the end samples
/// (`x[-k] = 2·x[0] − x[k]`), which keeps straight lines straight.
pub fn savitzky_golay<T: Scalar>(signal: &[T], window: usize, order: usize) -> Result<Vec<T>> {
    let coeffs = savgol_coefficients::<T>(window, order)?;
    let n = signal.len();
    if n < window {
        return Err(Error::Config(format!(
            "signal of length {n} shorter than window {window}"
        )));
    }
    let half = window / 2;
    let two = T::lit(2.0);
    let at = |i: i64| -> T {
        if i < 0 {
            two * signal[0] - signal[(-i) as usize]
        } else if i as usize >= n {
            let k = i as usize - (n - 1);
            two * signal[n - 1] - signal[n - 1 - k]
        } else {
            signal[i as usize]
        }
    };
    Ok((0..n as i64)
        .map(|i| {
            coeffs
                .iter()
                .enumerate()
                .fold(T::zero(), |acc, (j, &c)| acc + c * at(i + j as i64 - half as i64))
        })
        .collect())
}
