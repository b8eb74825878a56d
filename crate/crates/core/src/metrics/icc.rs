use serde::{Deserialize, Serialize};

use super::{MetricError, RatingsMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IccResult {
    pub icc: f64,
    /// Between-units mean square.
    pub msr: f64,
    /// Between-raters mean square.
    pub msc: f64,
    /// Residual mean square.
    pub mse: f64,
    pub n: usize,
    pub k: usize,
    /// Zero total variance; ICC defined as 1.
    pub degenerate: bool,
}

/// ICC(2,1): two-way random effects, absolute agreement, single rater.
///
/// ```text
/// ICC = (MSR - MSE) / (MSR + (k - 1) MSE + (k / n) (MSC - MSE))
/// ```
///
/// with `MSR = SSR / (n - 1)`, `MSC = SSC / (k - 1)` and
/// `MSE = (SST - SSR - SSC) / ((n - 1)(k - 1))`. Requires a complete numeric
/// matrix with at least two units and two raters.
pub fn icc(m: &RatingsMatrix) -> Result<IccResult, MetricError> {
    let (n, k) = (m.n_units(), m.n_raters());
    if n < 2 {
        return Err(MetricError::TooSmall { what: "units", needed: 2, have: n });
    }
    if k < 2 {
        return Err(MetricError::TooSmall { what: "raters", needed: 2, have: k });
    }
    let mut x = vec![vec![0.0f64; k]; n];
    for (i, row) in m.rows().iter().enumerate() {
        for (j, cell) in row.iter().enumerate() {
            let v = cell.as_deref().ok_or_else(|| MetricError::MissingCell {
                unit: m.units()[i].clone(),
                rater: m.raters()[j].clone(),
            })?;
            x[i][j] = v
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| MetricError::NonNumeric(v.to_string()))?;
        }
    }

    let (nf, kf) = (n as f64, k as f64);
    let grand = x.iter().flatten().sum::<f64>() / (nf * kf);
    let row_means: Vec<f64> = x.iter().map(|r| r.iter().sum::<f64>() / kf).collect();
    let col_means: Vec<f64> = (0..k).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / nf).collect();

    let sst: f64 = x.iter().flatten().map(|v| (v - grand).powi(2)).sum();
    let ssr: f64 = kf * row_means.iter().map(|r| (r - grand).powi(2)).sum::<f64>();
    // Raters agreeing on every unit have no column or residual variance;
    // set that exactly instead of leaving rounding residue.
    let unanimous = x.iter().all(|r| r.iter().all(|v| *v == r[0]));
    let (ssc, sse) = if unanimous {
        (0.0, 0.0)
    } else {
        let ssc: f64 = nf * col_means.iter().map(|c| (c - grand).powi(2)).sum::<f64>();
        (ssc, (sst - ssr - ssc).max(0.0))
    };

    let msr = ssr / (nf - 1.0);
    let msc = ssc / (kf - 1.0);
    let mse = sse / ((nf - 1.0) * (kf - 1.0));

    if sst == 0.0 {
        return Ok(IccResult { icc: 1.0, msr, msc, mse, n, k, degenerate: true });
    }
    let denom = msr + (kf - 1.0) * mse + (kf / nf) * (msc - mse);
    if denom == 0.0 {
        return Err(MetricError::Undefined("ICC(2,1) denominator is zero".into()));
    }
    Ok(IccResult {
        icc: (msr - mse) / denom,
        msr,
        msc,
        mse,
        n,
        k,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::Scale;

    fn matrix(rows: &[Vec<f64>]) -> RatingsMatrix {
        RatingsMatrix::from_numeric(rows, Scale::Interval).unwrap()
    }

    #[test]
    fn identical_columns() {
        let r = icc(&matrix(&[vec![1.0, 1.0], vec![3.0, 3.0], vec![7.0, 7.0]])).unwrap();
        assert_eq!(r.icc, 1.0);
        assert!(!r.degenerate);
        let r = icc(&matrix(&[vec![0.1, 0.1, 0.1], vec![0.7, 0.7, 0.7], vec![1.3, 1.3, 1.3]])).unwrap();
        assert_eq!(r.icc, 1.0);
    }

    #[test]
    fn four_by_two_by_hand() {
        // Grand mean 3; row means 1.5, 2, 3.5, 5; column means 2.75, 3.25.
        // SST = 16, SSR = 15, SSC = 0.5, SSE = 0.5.
        let r = icc(&matrix(&[vec![1.0, 2.0], vec![2.0, 2.0], vec![3.0, 4.0], vec![5.0, 5.0]])).unwrap();
        let (msr, msc, mse) = (5.0, 0.5, 0.5 / 3.0);
        let expected = (msr - mse) / (msr + mse + 0.5 * (msc - mse));
        assert!((r.icc - expected).abs() < 1e-12);
        assert!((r.msr - msr).abs() < 1e-12 && (r.mse - mse).abs() < 1e-12);
    }

    #[test]
    fn constant_matrix_is_degenerate() {
        let r = icc(&matrix(&[vec![2.0, 2.0], vec![2.0, 2.0]])).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.icc, 1.0);
    }

    #[test]
    fn rejects_missing_and_small() {
        let err = icc(&matrix(&[vec![1.0, f64::NAN], vec![2.0, 2.0]])).unwrap_err();
        assert!(matches!(err, MetricError::MissingCell { .. }));
        assert!(matches!(icc(&matrix(&[vec![1.0, 2.0]])), Err(MetricError::TooSmall { .. })));
        let m = RatingsMatrix::from_rows(&[vec![Some("a"), Some("b")], vec![Some("1"), Some("2")]], Scale::Nominal).unwrap();
        assert!(matches!(icc(&m), Err(MetricError::NonNumeric(_))));
    }
}
