//! Outlier injection: each observation is independently replaced, with a
//! small probability, by a level drawn uniformly from a fixed set.

use rand::Rng;

use super::ModelError;
use crate::rng::seeded_rng;

/// `{80, 90, ..., 150}`.
pub const DEFAULT_OUTLIER_LEVELS: [f64; 8] = [80.0, 90.0, 100.0, 110.0, 120.0, 130.0, 140.0, 150.0];

#[derive(Clone, Debug, PartialEq)]
pub struct OutlierInjection {
    pub observations: Vec<f64>,
    /// 0-based indices that were replaced, increasing.
    pub indices: Vec<usize>,
}

pub fn inject_outliers(
    observations: &[f64],
    prob: f64,
    levels: &[f64],
    seed: u64,
) -> Result<OutlierInjection, ModelError> {
    if !(prob > 0.0 && prob < 1.0) {
        return Err(ModelError::InvalidParameter(format!("outlier probability must lie in (0, 1), got {prob}")));
    }
    if levels.is_empty() {
        return Err(ModelError::InvalidParameter("outlier level set is empty".into()));
    }
    let mut rng = seeded_rng(seed);
    let mut out = observations.to_vec();
    let mut indices = Vec::new();
    for (i, y) in out.iter_mut().enumerate() {
        // one uniform per index decides, a second picks the level
        if rng.random::<f64>() < prob {
            *y = levels[rng.random_range(0..levels.len())];
            indices.push(i);
        }
    }
    Ok(OutlierInjection { observations: out, indices })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{chi_square_uniform_pvalue, mean_se};

    #[test]
    fn tiny_probability_leaves_data_unchanged() {
        let ys: Vec<f64> = (0..100).map(|i| i as f64 * 0.1).collect();
        let inj = inject_outliers(&ys, 1e-9, &DEFAULT_OUTLIER_LEVELS, 5).unwrap();
        if inj.indices.is_empty() {
            assert_eq!(inj.observations, ys);
        }
    }

    #[test]
    fn invalid_inputs() {
        assert!(inject_outliers(&[1.0], 0.0, &DEFAULT_OUTLIER_LEVELS, 0).is_err());
        assert!(inject_outliers(&[1.0], 1.0, &DEFAULT_OUTLIER_LEVELS, 0).is_err());
        assert!(inject_outliers(&[1.0], 0.5, &[], 0).is_err());
    }

    #[test]
    fn count_and_level_frequencies() {
        let ys = vec![0.0; 5000];
        let mut counts = Vec::new();
        let mut level_counts = [0u64; 8];
        for seed in 0..200 {
            let inj = inject_outliers(&ys, 1.0 / 500.0, &DEFAULT_OUTLIER_LEVELS, seed).unwrap();
            counts.push(inj.indices.len() as f64);
            for &i in &inj.indices {
                let v = inj.observations[i];
                let k = DEFAULT_OUTLIER_LEVELS.iter().position(|&l| l == v).unwrap();
                level_counts[k] += 1;
            }
        }
        let (m, se) = mean_se(&counts);
        assert!((m - 10.0).abs() < 3.0 * se, "mean count {m} (se {se})");
        assert!(chi_square_uniform_pvalue(&level_counts) > 1e-3);
    }
}
