//! Quantities measured on walks: distributions, moments, TV distance, time
//! averages, mixing and hitting times, periodicity and top-hat fitting.

pub mod distribution;
pub mod fit;
pub mod hitting;
pub mod mixing;
pub mod periodicity;
pub mod tophat;

pub use distribution::{
    moments, moments_on_coordinates, position_distribution, running_average, time_average,
    time_average_trapezoid, tv_distance, uniform_reference, Moments, ObservableSeries,
    PositionDistribution, VertexMarginal,
};
pub use fit::{decay_exponent, linear_fit, LinearFit};
pub use hitting::{measured_walk_run, HittingMode, HittingResult};
pub use mixing::{ctqw_mixing, discrete_mixing, mixing_time, mixing_time_from_tv, MixingKind, MixingResult};
pub use periodicity::{find_period, periodicity_search};
pub use tophat::{ideal_top_hat, top_hat_fit, TopHatFit};
