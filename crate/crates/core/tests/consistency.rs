//! Phase-space approximation against the exact coherent simulation in the
//! weak-coupling regime g ≤ 0.05, |α|² ≥ 6, σ = 1.

use faraday_edr::edr;
use faraday_edr::faraday::{MeasurementConfig, MeterSetup};
use faraday_edr::psa;

#[test]
fn psa_tracks_exact_for_small_g() {
    for alpha2 in [6.0f64, 12.0] {
        let cfg = MeasurementConfig::new(0.0, alpha2, 0.0, 1e-12).unwrap();
        let setup = MeterSetup::prepare(&cfg).unwrap();
        for g in [0.005, 0.01, 0.02, 0.05] {
            let p = edr::edr_point_at(&setup, g).unwrap();
            let chi = g * alpha2.sqrt();
            let eps2 = psa::eps2_psa(chi).unwrap();
            let eta2 = psa::eta2_psa(chi).unwrap();
            let de = (p.eps2.unwrap() - eps2).abs() / eps2;
            let dn = (p.eta2 - eta2).abs() / eta2;
            assert!(de < 0.01, "eps2 at g={g}, |α|²={alpha2}: rel {de}");
            assert!(dn < 0.01, "eta2 at g={g}, |α|²={alpha2}: rel {dn}");
        }
    }
}
