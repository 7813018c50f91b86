use serde::{Deserialize, Serialize};

/// Linear-interpolation quantile of sorted data, `q` in `[0, 1]`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}

pub fn median(values: &[f64]) -> Option<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.5)
}

/// Distribution summary of one metric over many stations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub undefined: usize,
    pub mean: Option<f64>,
    pub median: Option<f64>,
    pub q05: Option<f64>,
    pub q25: Option<f64>,
    pub q75: Option<f64>,
    pub q95: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

impl Summary {
    pub fn of(values: &[Option<f64>]) -> Self {
        let mut v: Vec<f64> = values.iter().flatten().copied().collect();
        v.sort_by(f64::total_cmp);
        let q = |p| quantile_sorted(&v, p);
        Summary {
            count: v.len(),
            undefined: values.len() - v.len(),
            mean: (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64),
            median: q(0.5),
            q05: q(0.05),
            q25: q(0.25),
            q75: q(0.75),
            q95: q(0.95),
            min: v.first().copied(),
            max: v.last().copied(),
        }
    }

    pub fn iqr(&self) -> Option<f64> {
        Some(self.q75? - self.q25?)
    }
}

/// Empirical CDF points `(value, F(value))` with `F = rank / n`.
pub fn ecdf(values: &[Option<f64>]) -> Vec<(f64, f64)> {
    let mut v: Vec<f64> = values.iter().flatten().copied().collect();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.into_iter()
        .enumerate()
        .map(|(i, x)| (x, (i + 1) as f64 / n))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_and_iqr() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
        let s = Summary::of(&[Some(1.0), Some(2.0), None, Some(3.0), Some(4.0), Some(5.0)]);
        assert_eq!(s.undefined, 1);
        assert_eq!(s.q25, Some(2.0));
        assert_eq!(s.q75, Some(4.0));
        assert_eq!(s.iqr(), Some(2.0));
    }

    #[test]
    fn ecdf_reaches_one() {
        let e = ecdf(&[Some(2.0), Some(1.0)]);
        assert_eq!(e, vec![(1.0, 0.5), (2.0, 1.0)]);
    }
}
