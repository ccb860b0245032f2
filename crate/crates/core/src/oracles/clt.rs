//! Asymptotic variance of the predictor in the ideal i.i.d. scenario.
//!
//! With `M_p(x, .) = nu`, `G_p = G` and `p0 = nu(G)` the general formula
//!
//! ```text
//! sigma_n^2(phi) = eta_n(G) sum_{q=1}^n gamma_q(G)^2 / gamma_n(G)^2
//!                  * eta_q([Q_{q,n}(phi_n) - eta_q(Q_{q,n}(phi_n))]^2)
//! ```
//!
//! has `eta_q = nu`, `gamma_q(G) = p0^q` and, for `q < n`,
//! `Q_{q,n}(phi_n)(x) = G(x) p0^(n-q-1) nu(phi_n)`, so each summand is
//! `p0^(2(q-n)) c_q^2 p0 (1 - p0)` with `c_q = p0^(n-q-1) nu(phi_n)`.
//! Since `phi_n` is centered under `nu` these terms vanish and only the
//! `q = n` term `p0 Var_nu(phi)` survives.

use super::OracleError;

/// Moments of the test function under `nu`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IidMoments {
    pub nu_phi: f64,
    pub nu_phi2: f64,
    pub nu_g_phi: f64,
    pub nu_g_phi2: f64,
}

impl IidMoments {
    fn check(&self, p0: f64) -> Result<(), OracleError> {
        let var = self.nu_phi2 - self.nu_phi * self.nu_phi;
        if var < -1e-12 * self.nu_phi2.abs().max(1.0) {
            return Err(OracleError::InvalidMoments(format!("nu(phi^2) = {} below nu(phi)^2", self.nu_phi2)));
        }
        if self.nu_g_phi2 < -1e-15 || self.nu_g_phi2 > self.nu_phi2 + 1e-12 {
            return Err(OracleError::InvalidMoments("nu(G phi^2) must lie in [0, nu(phi^2)]".into()));
        }
        // Cauchy-Schwarz: nu(G phi)^2 <= nu(G) nu(G phi^2)
        if self.nu_g_phi * self.nu_g_phi > p0 * self.nu_g_phi2 + 1e-12 {
            return Err(OracleError::InvalidMoments("nu(G phi)^2 exceeds p0 nu(G phi^2)".into()));
        }
        Ok(())
    }
}

pub fn clt_variance_ideal(p0: f64, n: usize, moments: &IidMoments) -> Result<f64, OracleError> {
    if !(p0 > 0.0 && p0 < 1.0) {
        return Err(OracleError::InvalidInput(format!("p0 must lie in (0, 1), got {p0}")));
    }
    if n == 0 {
        return Err(OracleError::InvalidInput("n must be at least 1".into()));
    }
    moments.check(p0)?;
    let var_phi = (moments.nu_phi2 - moments.nu_phi * moments.nu_phi).max(0.0);
    // eta_n = nu, so phi_n = phi - eta_n(phi) integrates to zero under nu
    let eta_n_phi = moments.nu_phi;
    let nu_centered = moments.nu_phi - eta_n_phi;
    let mut sum = var_phi;
    for q in 1..n {
        let c = p0.powi((n - q - 1) as i32) * nu_centered;
        sum += p0.powi(2 * (q as i32 - n as i32)) * c * c * p0 * (1.0 - p0);
    }
    Ok(p0 * sum)
}
