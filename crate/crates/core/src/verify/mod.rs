//! Checks of the sampler's guarantees: the score identity, measurement
//! agreement `ε_dc`, pairwise data consistency, the mean-iterate consistency
//! harness, the incremental reconstruction error bound, and the
//! perception-distortion and robustness sweeps.

mod bound;
mod consistency;
mod curves;
mod scheduler;
mod tamper;
mod training;
mod tweedie;

pub use bound::{verify_theorem_bound, verify_theorem_bound_multi, BoundReport, BoundRow};
pub use consistency::{
    check_pair_consistency, check_transitivity, verify_theorem_dc, verify_theorem_dc_with, ConsistencyVerdict,
    DcReport, TransitivityReport, FEASIBILITY_RIDGE,
};
pub use curves::{
    perception_distortion_sweep, robustness_noise_sweep, robustness_width_sweep, CurvePoint, CurveReport, CurveSignal,
    RobustnessReport, RobustnessRow, NOISE_GRID, WIDTH_GRID,
};
pub use scheduler::{audit_scheduler, brute_force_minmax, SchedulerAudit};
pub use tamper::TamperedProcess;
pub use training::{affine_mse, bin_optimal_affine, oracle_gap, GapRow};
pub use tweedie::{verify_tweedie, TweedieReport, TweedieRow};

use crate::degrade::DegradationProcess;
use crate::error::Result;
use crate::metrics::mse;
use crate::signal::Signal;

/// `mean((ỹ − A_1(x̂₀))²)`.
pub fn eps_dc<P: DegradationProcess + ?Sized>(proc: &P, measurement: &Signal, x_hat: &Signal) -> Result<f64> {
    mse(measurement, &proc.apply(1.0, x_hat)?)
}

/// Seed for job `id` of a run seeded with `base` (splitmix64 finalizer).
pub fn derive_seed(base: u64, id: u64) -> u64 {
    let mut z = base ^ id.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::degrade::GaussianMaskInpaintProcess;
    use crate::signal::Shape;

    #[test]
    fn eps_dc_of_noiseless_measurement_is_zero() {
        let p = GaussianMaskInpaintProcess::new(Shape::grid(6, 6), 2.0, 2).unwrap();
        let x = Signal::new(Shape::grid(6, 6), (0..36).map(|i| i as f64 / 36.0).collect()).unwrap();
        let y = p.apply(1.0, &x).unwrap();
        assert_eq!(eps_dc(&p, &y, &x).unwrap(), 0.0);
    }

    #[test]
    fn derived_seeds_differ() {
        let a: Vec<u64> = (0..64).map(|i| derive_seed(7, i)).collect();
        let mut b = a.clone();
        b.sort_unstable();
        b.dedup();
        assert_eq!(a.len(), b.len());
        assert_ne!(derive_seed(7, 0), derive_seed(8, 0));
    }
}
