use super::band::row_ranges;
use super::pretreat::pretreat;
use super::{DtwConfig, Normalization};
use crate::align::{weight_map, AlignError, Samples};
use crate::linalg::Matrix;
use crate::scalar::{mean, sample_std, Real};

/// Weighted Euclidean distance between every reference and query sample.
///
/// `tags` names the rows of `reference.values` and `query.values`. Derivative
/// variants compare pretreated series, giving an `(N_ref-1) × (N_query-1)`
/// matrix. Cells outside the configured global band are `+∞`.
pub fn dtw_cost_matrix<T: Real>(
    reference: &Samples<T>,
    query: &Samples<T>,
    tags: &[String],
    config: &DtwConfig,
) -> Result<Matrix<T>, AlignError> {
    let weights = weight_map(&config.weights, tags)?;
    let mut r_cols = Vec::with_capacity(weights.len());
    let mut q_cols = Vec::with_capacity(weights.len());
    let mut w = Vec::with_capacity(weights.len());
    for (tag, wt) in &weights {
        let j = tags.iter().position(|t| t == tag).expect("weight_map only returns known tags");
        let mut r = pretreat(&reference.values[j], &config.variant)?;
        let mut q = pretreat(&query.values[j], &config.variant)?;
        if config.normalize == Normalization::PerTagStd {
            let (m, s) = (mean(&r), sample_std(&r));
            if !(s > T::zero()) {
                return Err(AlignError::ZeroVarianceTag(tag.clone()));
            }
            r.iter_mut().for_each(|v| *v = (*v - m) / s);
            q.iter_mut().for_each(|v| *v = (*v - m) / s);
        }
        r_cols.push(r);
        q_cols.push(q);
        w.push(T::lit(*wt));
    }
    let n = r_cols[0].len();
    let m = q_cols[0].len();
    if n == 0 || m == 0 {
        return Err(AlignError::SeriesTooShort { needed: 1, got: 0 });
    }
    let shift = usize::from(config.variant.is_derivative());
    let ranges = row_ranges(&config.global_band, n, m, shift)?;
    let mut out = Matrix::filled(n, m, T::infinity());
    for i in 0..n {
        let (lo, hi) = match &ranges {
            Some(r) => r[i],
            None => (0, m - 1),
        };
        for j in lo..=hi.min(m - 1) {
            let mut acc = T::zero();
            for k in 0..w.len() {
                let d = r_cols[k][i] - q_cols[k][j];
                acc = acc + w[k] * d * d;
            }
            out[(i, j)] = acc.sqrt();
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::GlobalBand;
    use super::*;

    fn samples(v: Vec<f64>) -> Samples<f64> {
        Samples { times: (0..v.len()).map(|k| k as f64).collect(), values: vec![v] }
    }

    fn tags() -> Vec<String> {
        vec!["x".into()]
    }

    #[test]
    fn hand_computed_distances() {
        let cfg = DtwConfig { normalize: Normalization::None, ..Default::default() };
        let c = dtw_cost_matrix(&samples(vec![0.0, 1.0]), &samples(vec![0.0, 2.0]), &tags(), &cfg).unwrap();
        assert_eq!(c.to_rows(), vec![vec![0.0, 2.0], vec![1.0, 1.0]]);
    }

    #[test]
    fn identical_series_have_zero_diagonal() {
        let s = samples(vec![3.0, -1.0, 4.0, 1.0, 5.0]);
        let c = dtw_cost_matrix(&s, &s, &tags(), &DtwConfig::default()).unwrap();
        for k in 0..5 {
            assert_eq!(c[(k, k)], 0.0);
        }
    }

    #[test]
    fn weights_scale_squared_terms() {
        let r = Samples { times: vec![0.0], values: vec![vec![0.0], vec![0.0]] };
        let q = Samples { times: vec![0.0], values: vec![vec![1.0], vec![2.0]] };
        let t = vec!["a".to_string(), "b".to_string()];
        let cfg = DtwConfig {
            normalize: Normalization::None,
            weights: [("a".to_string(), 4.0), ("b".to_string(), 0.25)].into(),
            ..Default::default()
        };
        let c = dtw_cost_matrix(&r, &q, &t, &cfg).unwrap();
        assert!((c[(0, 0)] - (4.0f64 + 1.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn band_width_zero_leaves_only_diagonal() {
        let s = samples(vec![1.0, 2.0, 0.0, 5.0]);
        let cfg = DtwConfig { global_band: GlobalBand::SakoeChiba { width: 0 }, ..Default::default() };
        let c = dtw_cost_matrix(&s, &s, &tags(), &cfg).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(c[(i, j)].is_finite(), i == j);
            }
        }
    }

    #[test]
    fn zero_variance_and_empty_tag_set() {
        let flat = samples(vec![1.0, 1.0, 1.0]);
        assert_eq!(
            dtw_cost_matrix(&flat, &flat, &tags(), &DtwConfig::default()),
            Err(AlignError::ZeroVarianceTag("x".into()))
        );
        let cfg = DtwConfig { weights: [("x".to_string(), 0.0)].into(), ..Default::default() };
        assert_eq!(dtw_cost_matrix(&flat, &flat, &tags(), &cfg), Err(AlignError::EmptyTagSet));
    }
}
