//! Seed derivation and replicate summaries.

use alive_smc::stats::{jackknife_se, mean_var};

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for replicate `index` of stream `stream` under the run seed.
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    mix(mix(seed ^ mix(stream)) ^ index)
}

/// Per-step relative variance of replicated normalizing-constant estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct RelVarPoint {
    pub time: usize,
    /// Replicates available at this step.
    pub count: usize,
    /// `log Var[gamma_hat / reference]`; `None` with fewer than two
    /// replicates.
    pub log_rel_var: Option<f64>,
    /// Jackknife standard error of `log_rel_var`.
    pub log_rel_var_se: Option<f64>,
}

impl RelVarPoint {
    pub fn rel_var(&self) -> Option<f64> {
        self.log_rel_var.map(f64::exp)
    }
}

/// Log of the sample variance of `exp(xs)`, computed after shifting by
/// `max(xs)` so nothing overflows.
fn log_var_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let scaled: Vec<f64> = xs.iter().map(|&x| (x - m).exp()).collect();
    let (_, v) = mean_var(&scaled);
    2.0 * m + v.ln()
}

/// `log_estimates[r][t]` is replicate `r`'s log estimate at step `t + 1`
/// (replicates may stop early); `reference[t]` the log reference value.
pub fn relative_variance_report(log_estimates: &[Vec<f64>], reference: &[f64]) -> Vec<RelVarPoint> {
    reference
        .iter()
        .enumerate()
        .map(|(t, &r)| {
            let xs: Vec<f64> = log_estimates.iter().filter_map(|run| run.get(t)).map(|&l| l - r).collect();
            let count = xs.len();
            if count < 2 {
                return RelVarPoint { time: t + 1, count, log_rel_var: None, log_rel_var_se: None };
            }
            let lv = log_var_exp(&xs);
            let se = if count > 2 && lv.is_finite() { Some(jackknife_se(&xs, log_var_exp)) } else { None };
            RelVarPoint { time: t + 1, count, log_rel_var: Some(lv), log_rel_var_se: se }
        })
        .collect()
}
