use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{MetricError, RatingsMatrix, Scale};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaResult {
    pub kappa: f64,
    /// Observed agreement.
    pub p_o: f64,
    /// Agreement expected from the product of marginals.
    pub p_e: f64,
    /// Retained pairs.
    pub n: usize,
    /// Pairs dropped because either side was missing.
    pub dropped: usize,
    /// Both raters used a single identical label; kappa defined as 1.
    pub degenerate: bool,
}

/// Cohen's kappa for two raters on nominal labels.
///
/// `kappa = (p_o - p_e) / (1 - p_e)`. When `p_e = 1` (both raters put every
/// unit in the same single class) kappa is reported as 1 with the
/// `degenerate` flag set.
pub fn cohens_kappa(
    r1: &[Option<String>],
    r2: &[Option<String>],
) -> Result<KappaResult, MetricError> {
    if r1.len() != r2.len() {
        return Err(MetricError::LengthMismatch(r1.len(), r2.len()));
    }
    let pairs: Vec<(&str, &str)> = r1
        .iter()
        .zip(r2)
        .filter_map(|(a, b)| Some((a.as_deref()?, b.as_deref()?)))
        .collect();
    let n = pairs.len();
    let dropped = r1.len() - n;
    if n < 2 {
        return Err(MetricError::TooFewPairs { needed: 2, have: n });
    }

    let mut m1: BTreeMap<&str, usize> = BTreeMap::new();
    let mut m2: BTreeMap<&str, usize> = BTreeMap::new();
    let mut agree = 0usize;
    for &(a, b) in &pairs {
        *m1.entry(a).or_default() += 1;
        *m2.entry(b).or_default() += 1;
        agree += usize::from(a == b);
    }
    let nf = n as f64;
    let p_o = agree as f64 / nf;
    let p_e: f64 = m1
        .iter()
        .map(|(k, c1)| (*c1 as f64 / nf) * (m2.get(k).copied().unwrap_or(0) as f64 / nf))
        .sum();

    if m1.len() == 1 && m2.len() == 1 && m1.keys().eq(m2.keys()) {
        return Ok(KappaResult { kappa: 1.0, p_o, p_e: 1.0, n, dropped, degenerate: true });
    }
    if (1.0 - p_e).abs() < 1e-15 {
        return Err(MetricError::DegenerateMarginals { observed: p_o });
    }
    Ok(KappaResult {
        kappa: (p_o - p_e) / (1.0 - p_e),
        p_o,
        p_e,
        n,
        dropped,
        degenerate: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaResult {
    pub alpha: f64,
    /// Observed disagreement.
    pub d_o: f64,
    /// Expected disagreement.
    pub d_e: f64,
    /// Total pairable values (the `n..` of the coincidence matrix).
    pub n_pairable: f64,
    /// Units with two or more values.
    pub pairable_units: usize,
    /// All pairable values identical; alpha defined as 1.
    pub degenerate: bool,
}

/// Krippendorff's alpha via the coincidence matrix.
///
/// Each unit with `m_u >= 2` values contributes `c_a * c_b / (m_u - 1)` to
/// `o[a][b]` (`c_a (c_a - 1) / (m_u - 1)` on the diagonal). With marginals
/// `n_a` and total `n`:
///
/// ```text
/// D_o = Σ o[a][b] δ²(a, b) / n
/// D_e = Σ n_a n_b δ²(a, b) / (n (n - 1))
/// α   = 1 - D_o / D_e
/// ```
///
/// Difference functions: nominal `[a != b]`; interval `(a - b)²`; ordinal
/// `(Σ_{g between a and b} n_g - (n_a + n_b) / 2)²`, with values ranked
/// numerically (or by an explicit order on the matrix).
pub fn krippendorff_alpha(m: &RatingsMatrix) -> Result<AlphaResult, MetricError> {
    // Distinct values, ordered by the scale's sort key.
    let mut distinct: BTreeSet<&str> = BTreeSet::new();
    for row in m.rows() {
        for v in row.iter().flatten() {
            distinct.insert(v.as_str());
        }
    }
    let mut values: Vec<(&str, f64)> = Vec::with_capacity(distinct.len());
    for v in distinct {
        let key = match m.scale() {
            Scale::Nominal => 0.0,
            _ => m.numeric_value(v)?,
        };
        values.push((v, key));
    }
    if m.scale() != Scale::Nominal {
        values.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(b.0)));
    }
    let index: BTreeMap<&str, usize> = values.iter().enumerate().map(|(i, (v, _))| (*v, i)).collect();
    let nv = values.len();

    let mut o = vec![vec![0.0f64; nv]; nv];
    let mut pairable_units = 0;
    let mut counts = vec![0usize; nv];
    for row in m.rows() {
        counts.iter_mut().for_each(|c| *c = 0);
        let mut mu = 0usize;
        for v in row.iter().flatten() {
            counts[index[v.as_str()]] += 1;
            mu += 1;
        }
        if mu < 2 {
            continue;
        }
        pairable_units += 1;
        let w = 1.0 / (mu - 1) as f64;
        for a in 0..nv {
            if counts[a] == 0 {
                continue;
            }
            for b in 0..nv {
                let pairs = if a == b {
                    counts[a] * (counts[a] - 1)
                } else {
                    counts[a] * counts[b]
                };
                if pairs > 0 {
                    o[a][b] += pairs as f64 * w;
                }
            }
        }
    }
    if pairable_units == 0 {
        return Err(MetricError::NoPairableUnits);
    }

    let marg: Vec<f64> = o.iter().map(|r| r.iter().sum()).collect();
    let n: f64 = marg.iter().sum();

    let delta2 = |a: usize, b: usize| -> f64 {
        if a == b {
            return 0.0;
        }
        match m.scale() {
            Scale::Nominal => 1.0,
            Scale::Interval => {
                let d = values[a].1 - values[b].1;
                d * d
            }
            Scale::Ordinal => {
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                let s: f64 = marg[lo..=hi].iter().sum::<f64>() - (marg[a] + marg[b]) / 2.0;
                s * s
            }
        }
    };

    let mut d_o = 0.0;
    let mut d_e = 0.0;
    for a in 0..nv {
        for b in 0..nv {
            if a == b {
                continue;
            }
            let d = delta2(a, b);
            d_o += o[a][b] * d;
            d_e += marg[a] * marg[b] * d;
        }
    }
    d_o /= n;
    d_e /= n * (n - 1.0);

    if d_e == 0.0 {
        if d_o == 0.0 {
            return Ok(AlphaResult {
                alpha: 1.0,
                d_o,
                d_e,
                n_pairable: n,
                pairable_units,
                degenerate: true,
            });
        }
        return Err(MetricError::ZeroExpectedDisagreement(d_o));
    }
    Ok(AlphaResult {
        alpha: 1.0 - d_o / d_e,
        d_o,
        d_e,
        n_pairable: n,
        pairable_units,
        degenerate: false,
    })
}
