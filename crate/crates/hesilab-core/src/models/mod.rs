//! Concrete control systems: spectral multiplier models on periodic grids,
//! the boundary-point heat family, and the delayed-actuation composite.

pub mod delay;
pub mod grid;
pub mod pointwise;
pub mod spectral;

pub use delay::{
    delay_discrete_resolvent, delay_dissipativity_sample, delay_heat_pair, delay_heat_system,
    delay_hesi_bound, delay_hesi_constants, delay_instability_scan, delay_margin_oracle,
    delay_pack, delay_resolvent_solve, delay_stabilize, delay_unpack, DelayFeedbackReport,
    DelayHesiBound, DelayMarginOracle, DelayParams, DelayResolvent, InstabilityPoint,
};
pub use grid::{
    indicator_full, indicator_left_half, indicator_multiplier, indicator_periodic_cells,
    spectral_inequality_constant, verify_thickness, PeriodicGrid, ThickSetSpec, ThicknessReport,
};
pub use pointwise::{
    pointwise_criterion, pointwise_heat_system, unstable_mode_count, ObservationPoint,
    RationalPoint,
};
pub use spectral::{
    fractional_heat_system, fractional_spectral_projection, ginzburg_landau_system,
    SpectralSystem,
};
