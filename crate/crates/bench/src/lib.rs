//! Shared fixtures for the benchmarks.

use biphoton::{CrystalSetup, PumpSpec, SellmeierModel, SpdcSource};

/// Single 5 mm crystal, 355 nm pump with a 507 um waist.
pub fn single_source(theta_deg: f64) -> SpdcSource {
    SpdcSource::new(
        &SellmeierModel::bbo(),
        PumpSpec {
            lambda_p: 355e-9,
            waist: 507e-6,
        },
        CrystalSetup::single(5e-3, theta_deg.to_radians()),
    )
    .expect("valid benchmark source")
}
