//! Phase-space (canonical) approximation and weak-interaction limit.
//!
//! With `q = Sy/√⟨Sx⟩` and `p = Sz/√⟨Sx⟩` the meter is treated as a
//! continuous variable with `[q, p] = 2i`. Note the factor 2: a Gaussian meter
//! wavefunction of position variance σ² then has momentum variance 1/σ², not
//! the 1/(4σ²) of the ħ = 1, `[q, p] = i` convention.
//!
//! The measurement strength is `χ = g|α|/σ` with `σ = e^{−r}`.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicBool, Ordering};

use thiserror::Error;

use crate::tolerances;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PsaError {
    #[error("square error diverges at zero measurement strength")]
    Divergent,
    #[error("invalid phase-space parameter: {0}")]
    InvalidParameter(String),
    #[error("Gauss-Hermite quadrature did not converge with {nodes} nodes (last change {change:e})")]
    QuadratureNonConvergence { nodes: usize, change: f64 },
}

/// Phase-space model parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PsaConfig {
    pub g: f64,
    pub alpha_mag: f64,
    sigma: f64,
}

impl PsaConfig {
    pub fn new(g: f64, alpha_mag: f64, sigma: f64) -> Result<Self, PsaError> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(PsaError::InvalidParameter(format!("σ = {sigma}")));
        }
        if !(g.is_finite() && alpha_mag.is_finite() && alpha_mag >= 0.0) {
            return Err(PsaError::InvalidParameter(format!("g = {g}, |α| = {alpha_mag}")));
        }
        Ok(PsaConfig { g, alpha_mag, sigma })
    }

    /// From the squeezing magnitude, σ = e^{−r}.
    pub fn from_squeezing(g: f64, alpha_mag: f64, r: f64) -> Result<Self, PsaError> {
        Self::new(g, alpha_mag, (-r).exp())
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// χ = g|α|/σ.
    pub fn chi(&self) -> f64 {
        self.g * self.alpha_mag / self.sigma
    }
}

fn check_chi(chi: f64) -> Result<(), PsaError> {
    if chi == 0.0 {
        Err(PsaError::Divergent)
    } else if chi.is_finite() && chi > 0.0 {
        Ok(())
    } else {
        Err(PsaError::InvalidParameter(format!("χ = {chi}")))
    }
}

/// 1/(4χ²)
pub fn eps2_psa(chi: f64) -> Result<f64, PsaError> {
    check_chi(chi)?;
    Ok(1.0 / (4.0 * chi * chi))
}

/// 2(1 − e^{−2χ²})
pub fn eta2_psa(chi: f64) -> Result<f64, PsaError> {
    if !(chi.is_finite() && chi >= 0.0) {
        return Err(PsaError::InvalidParameter(format!("χ = {chi}")));
    }
    Ok(-2.0 * (-2.0 * chi * chi).exp_m1())
}

pub fn wia_is_valid(chi: f64) -> bool {
    chi < tolerances::WIA_VALIDITY_CHI
}

// warns once per process; callers that care per sample check wia_is_valid
fn warn_wia(chi: f64) {
    static WARNED: AtomicBool = AtomicBool::new(false);
    if !wia_is_valid(chi) && !WARNED.swap(true, Ordering::Relaxed) {
        log::warn!("weak-interaction forms used at χ = {chi} ≥ {}", tolerances::WIA_VALIDITY_CHI);
    }
}

/// 1/(4χ²), the weak-interaction square error.
pub fn eps2_wia(chi: f64) -> Result<f64, PsaError> {
    check_chi(chi)?;
    warn_wia(chi);
    Ok(1.0 / (4.0 * chi * chi))
}

/// 4χ², the weak-interaction square disturbance.
pub fn eta2_wia(chi: f64) -> Result<f64, PsaError> {
    if !(chi.is_finite() && chi >= 0.0) {
        return Err(PsaError::InvalidParameter(format!("χ = {chi}")));
    }
    warn_wia(chi);
    Ok(4.0 * chi * chi)
}

/// Gauss–Hermite nodes and weights for the weight `e^{−x²}`, by Newton
/// iteration on the orthonormal Hermite recurrence.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let pim4 = PI.powf(-0.25);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = (j + 1) as f64;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Quadrature estimates of the two Gaussian meter averages.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianMoments {
    /// ⟨q²⟩ over |ψ(q)|² ∝ e^{−q²/2σ²}.
    pub q2_mean: f64,
    /// ⟨cos(2g|α|p)⟩ over the momentum density ∝ e^{−σ²p²/2}.
    pub cos_mean: f64,
    /// Node count at convergence.
    pub nodes: usize,
}

const MIN_NODES: usize = 16;
const MAX_NODES: usize = 256;

fn gaussian_rule(n: usize, sigma: f64, k: f64) -> (f64, f64) {
    let (x, w) = gauss_hermite(n);
    let norm = 1.0 / PI.sqrt();
    let mut q2 = 0.0;
    let mut cos = 0.0;
    for (&xi, &wi) in x.iter().zip(&w) {
        // q = √2 σ x, p = √2 x / σ
        let q = std::f64::consts::SQRT_2 * sigma * xi;
        let p = std::f64::consts::SQRT_2 * xi / sigma;
        q2 += wi * q * q;
        cos += wi * (k * p).cos();
    }
    (norm * q2, norm * cos)
}

/// Integrates ⟨q²⟩ and ⟨cos(2g|α|p)⟩ for the Gaussian meter by Gauss–Hermite
/// quadrature, doubling the node count until both change by at most 1e−12.
pub fn gaussian_oracle(cfg: &PsaConfig) -> Result<GaussianMoments, PsaError> {
    let k = 2.0 * cfg.g * cfg.alpha_mag;
    let mut n = MIN_NODES;
    let (mut q2, mut cos) = gaussian_rule(n, cfg.sigma, k);
    loop {
        let next = 2 * n;
        if next > MAX_NODES {
            let (q2n, cosn) = gaussian_rule(n, cfg.sigma, k);
            return Err(PsaError::QuadratureNonConvergence {
                nodes: n,
                change: (q2n - q2).abs().max((cosn - cos).abs()),
            });
        }
        let (q2n, cosn) = gaussian_rule(next, cfg.sigma, k);
        let change = (q2n - q2).abs().max((cosn - cos).abs());
        n = next;
        q2 = q2n;
        cos = cosn;
        if change <= tolerances::QUADRATURE_ABSOLUTE {
            return Ok(GaussianMoments {
                q2_mean: q2,
                cos_mean: cos,
                nodes: n,
            });
        }
    }
}

/// ε² and η² from the quadrature moments: ⟨q²⟩/(4g²|α|²) and 2(1 − ⟨cos⟩).
pub fn quadrature_edr(cfg: &PsaConfig) -> Result<(f64, f64), PsaError> {
    let m = gaussian_oracle(cfg)?;
    let gain = cfg.g * cfg.alpha_mag;
    if gain == 0.0 {
        return Err(PsaError::Divergent);
    }
    Ok((m.q2_mean / (4.0 * gain * gain), 2.0 * (1.0 - m.cos_mean)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_rule_integrates_moments() {
        let (x, w) = gauss_hermite(20);
        let total: f64 = w.iter().sum();
        assert!((total - PI.sqrt()).abs() < 1e-13);
        let second: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
        assert!((second - PI.sqrt() / 2.0).abs() < 1e-13);
        let fourth: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(4)).sum();
        assert!((fourth - 3.0 * PI.sqrt() / 4.0).abs() < 1e-12);
    }

    #[test]
    fn closed_forms() {
        assert!((eps2_psa(0.5).unwrap() - 1.0).abs() < 1e-15);
        assert!((eta2_psa(0.5).unwrap() - 0.786939).abs() < 1e-6);
        assert!((eta2_psa(50.0).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(eps2_psa(0.0), Err(PsaError::Divergent));
        let chi = 1e-4;
        assert!((eta2_psa(chi).unwrap() / (4.0 * chi * chi) - 1.0).abs() < 1e-7);
    }

    #[test]
    fn weak_interaction_pairs() {
        assert!((eps2_wia(0.1).unwrap() - 25.0).abs() < 1e-12);
        assert!((eta2_wia(0.1).unwrap() - 0.04).abs() < 1e-15);
        assert!((eps2_wia(0.05).unwrap() - 100.0).abs() < 1e-12);
        assert!((eta2_wia(0.05).unwrap() - 0.01).abs() < 1e-15);
        assert!(wia_is_valid(0.1) && !wia_is_valid(0.3));
        // 4χ² departs from 2(1 − e^{−2χ²}) by more than 4% at the threshold
        let c = tolerances::WIA_VALIDITY_CHI;
        let gap = eta2_wia(c).unwrap() / eta2_psa(c).unwrap() - 1.0;
        assert!(gap > 0.04, "{gap}");
    }

    #[test]
    fn oracle_values() {
        let m = gaussian_oracle(&PsaConfig::new(0.0, 1.0, 1.0).unwrap()).unwrap();
        assert!((m.q2_mean - 1.0).abs() < 1e-12 && (m.cos_mean - 1.0).abs() < 1e-12);
        let m = gaussian_oracle(&PsaConfig::new(0.5, 1.0, 1.0).unwrap()).unwrap();
        assert!((m.q2_mean - 1.0).abs() < 1e-12);
        assert!((m.cos_mean - 0.606531).abs() < 1e-6);
        assert!((m.cos_mean - (-0.5f64).exp()).abs() < 1e-12);
        let m = gaussian_oracle(&PsaConfig::new(0.5, 1.0, 0.5).unwrap()).unwrap();
        assert!((m.q2_mean - 0.25).abs() < 1e-12);
        assert!((m.cos_mean - (-2.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn chi_tracks_inputs() {
        let cfg = PsaConfig::from_squeezing(0.1, 3.0, 0.5).unwrap();
        assert!((cfg.chi() - 0.3 * 0.5f64.exp()).abs() < 1e-15);
        assert!(PsaConfig::new(0.1, 1.0, 0.0).is_err());
    }

    proptest::proptest! {
        #[test]
        fn monotone_in_chi(a in 0.01f64..3.0, b in 0.01f64..3.0) {
            proptest::prop_assume!((a - b).abs() > 1e-6);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            proptest::prop_assert!(eps2_psa(lo).unwrap() > eps2_psa(hi).unwrap());
            proptest::prop_assert!(eta2_psa(lo).unwrap() < eta2_psa(hi).unwrap());
            proptest::prop_assert!(eta2_psa(hi).unwrap() <= 2.0);
        }

        #[test]
        fn disturbance_saturates(chi in 3.0f64..50.0) {
            let eta2 = eta2_psa(chi).unwrap();
            proptest::prop_assert!(eta2 <= 2.0 && eta2 > 2.0 - 1e-7);
        }
    }
}
