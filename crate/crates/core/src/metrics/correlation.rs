use std::hash::Hash;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, FisherSnedecor};

use super::rbo::paired_positions;
use super::MetricsError;

fn positions_for_pairing<T: Eq + Hash>(a: &[T], b: &[T]) -> Result<Vec<usize>, MetricsError> {
    let pos = paired_positions(a, b)?;
    if pos.len() < 2 {
        return Err(MetricsError::TooFewElements {
            needed: 2,
            got: pos.len(),
        });
    }
    Ok(pos)
}

/// Kendall's tau between two orderings of the same items:
/// `(concordant - discordant) / (n (n - 1) / 2)`.
pub fn kendall_tau<T: Eq + Hash>(a: &[T], b: &[T]) -> Result<f64, MetricsError> {
    // item at a-position i sits at b-position pos[i]; a pair (i < j) is
    // concordant when pos[i] < pos[j]
    let pos = positions_for_pairing(a, b)?;
    let n = pos.len();
    let mut balance: i64 = 0;
    for i in 0..n {
        for j in i + 1..n {
            balance += if pos[i] < pos[j] { 1 } else { -1 };
        }
    }
    Ok(balance as f64 / (n * (n - 1) / 2) as f64)
}

/// Spearman's rho for strict rankings: `1 - 6 Σ d² / (n (n² - 1))`.
pub fn spearman_rho<T: Eq + Hash>(a: &[T], b: &[T]) -> Result<f64, MetricsError> {
    let pos = positions_for_pairing(a, b)?;
    let n = pos.len() as u128;
    let sum_sq: u128 = pos
        .iter()
        .enumerate()
        .map(|(i, &j)| (i as i128 - j as i128).pow(2) as u128)
        .sum();
    Ok(1.0 - (6 * sum_sq) as f64 / (n * (n * n - 1)) as f64)
}

/// Kendall's coefficient of concordance with its significance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KendallsW {
    pub w: f64,
    pub raters: usize,
    pub items: usize,
    /// `m (n - 1) W`, chi-square with `n - 1` degrees of freedom.
    pub chi_square: f64,
    pub chi_square_p: f64,
    /// `(m - 1) W / (1 - W)`; infinite when `W = 1`.
    pub f_statistic: f64,
    /// Upper-tail p-value of the F approximation, df1 = `n - 1 - 2/m`,
    /// df2 = `(m - 1) df1`. Better calibrated than chi-square for few raters.
    pub p_value: f64,
}

/// `rank_matrix[r][j]` is the rank (1-based) rater `r` gives item `j`.
pub fn kendalls_w(rank_matrix: &[Vec<u32>]) -> Result<KendallsW, MetricsError> {
    let m = rank_matrix.len();
    if m < 2 {
        return Err(MetricsError::ShapeError(format!("need >= 2 raters, got {m}")));
    }
    let n = rank_matrix[0].len();
    if n < 2 {
        return Err(MetricsError::ShapeError(format!("need >= 2 items, got {n}")));
    }
    let mut column_sums = vec![0u64; n];
    for (r, row) in rank_matrix.iter().enumerate() {
        if row.len() != n {
            return Err(MetricsError::ShapeError(format!(
                "row {r} has {} items, expected {n}",
                row.len()
            )));
        }
        let mut seen = vec![false; n];
        for (j, &rank) in row.iter().enumerate() {
            let k = rank as usize;
            if k == 0 || k > n || std::mem::replace(&mut seen[k - 1], true) {
                return Err(MetricsError::NotAPermutation { row: r, n });
            }
            column_sums[j] += rank as u64;
        }
    }

    // S = Σ (R_j - m(n+1)/2)², kept integral as 4S = Σ (2R_j - m(n+1))²
    let centre = (m * (n + 1)) as i128;
    let four_s: i128 = column_sums
        .iter()
        .map(|&r| (2 * r as i128 - centre).pow(2))
        .sum();
    let (mf, nf) = (m as f64, n as f64);
    let w = (3 * four_s) as f64 / (mf * mf * (nf * nf * nf - nf));

    let df = nf - 1.0;
    let chi_square = mf * df * w;
    let chi_square_p = ChiSquared::new(df)
        .expect("df >= 1")
        .sf(chi_square);

    let df1 = df - 2.0 / mf;
    let df2 = (mf - 1.0) * df1;
    let (f_statistic, p_value) = if w >= 1.0 {
        (f64::INFINITY, 0.0)
    } else if df1 <= 0.0 {
        // two raters on two items: the F form has no degrees of freedom
        (f64::NAN, chi_square_p)
    } else {
        let f = (mf - 1.0) * w / (1.0 - w);
        (f, FisherSnedecor::new(df1, df2).expect("positive dfs").sf(f))
    };

    Ok(KendallsW {
        w,
        raters: m,
        items: n,
        chi_square,
        chi_square_p,
        f_statistic,
        p_value,
    })
}
