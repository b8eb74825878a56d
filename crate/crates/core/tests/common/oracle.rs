//! Reference implementations written from the textbook definitions, kept
//! deliberately naive so they share no code path with the library.

/// Level of measurement for the alpha oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Nominal,
    Ordinal,
    Interval,
}

/// Krippendorff's alpha by explicit pairing of values.
///
/// `D_o` averages the difference over all ordered pairs of values within a
/// unit, each unit weighted by `1 / (m_u - 1)`; `D_e` averages it over all
/// ordered pairs of pairable values pooled across units. Returns `None`
/// when no unit is pairable or `D_e` is zero.
pub fn alpha(rows: &[Vec<Option<f64>>], level: Level) -> Option<f64> {
    let units: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| r.iter().flatten().copied().collect::<Vec<_>>())
        .filter(|v: &Vec<f64>| v.len() >= 2)
        .collect();
    let pooled: Vec<f64> = units.iter().flatten().copied().collect();
    let n = pooled.len() as f64;
    if units.is_empty() {
        return None;
    }
    let freq = |x: f64| pooled.iter().filter(|&&v| v == x).count() as f64;
    let delta = |a: f64, b: f64| -> f64 {
        if a == b {
            return 0.0;
        }
        match level {
            Level::Nominal => 1.0,
            Level::Interval => (a - b) * (a - b),
            Level::Ordinal => {
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                let mut distinct: Vec<f64> = pooled.clone();
                distinct.sort_by(f64::total_cmp);
                distinct.dedup();
                let between: f64 = distinct.iter().filter(|&&g| g >= lo && g <= hi).map(|&g| freq(g)).sum();
                let s = between - (freq(a) + freq(b)) / 2.0;
                s * s
            }
        }
    };
    let mut d_o = 0.0;
    for u in &units {
        let m = u.len() as f64;
        for i in 0..u.len() {
            for j in 0..u.len() {
                if i != j {
                    d_o += delta(u[i], u[j]) / (m - 1.0);
                }
            }
        }
    }
    d_o /= n;
    let mut d_e = 0.0;
    for i in 0..pooled.len() {
        for j in 0..pooled.len() {
            if i != j {
                d_e += delta(pooled[i], pooled[j]);
            }
        }
    }
    d_e /= n * (n - 1.0);
    if d_e == 0.0 {
        return None;
    }
    Some(1.0 - d_o / d_e)
}

/// ICC(2,1) from the definitional two-way ANOVA sums of squares, with the
/// residual computed cell by cell.
pub fn icc21(x: &[Vec<f64>]) -> f64 {
    let n = x.len();
    let k = x[0].len();
    let (nf, kf) = (n as f64, k as f64);
    let grand: f64 = x.iter().flatten().sum::<f64>() / (nf * kf);
    let row_mean: Vec<f64> = x.iter().map(|r| r.iter().sum::<f64>() / kf).collect();
    let col_mean: Vec<f64> = (0..k).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / nf).collect();
    let ssr: f64 = kf * row_mean.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let ssc: f64 = nf * col_mean.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let mut sse = 0.0;
    for i in 0..n {
        for j in 0..k {
            sse += (x[i][j] - row_mean[i] - col_mean[j] + grand).powi(2);
        }
    }
    let msr = ssr / (nf - 1.0);
    let msc = ssc / (kf - 1.0);
    let mse = sse / ((nf - 1.0) * (kf - 1.0));
    (msr - mse) / (msr + (kf - 1.0) * mse + kf * (msc - mse) / nf)
}
