//! Discrete-time coined walks: coins, the shift, unitary stepping and the
//! decoherence channels in density and trajectory form.

pub mod coin;
pub mod lag;
pub mod multicoin;
pub mod noise;
pub mod search;
pub mod trajectory;
pub mod walk;

pub use coin::{angle_coin, make_coin, CoinSpec};
pub use multicoin::multi_coin_line_walk;
pub use noise::{
    broken_links_density, coin_dephase_step, evolve_density, step_density_noisy, MultiCoinOrder,
    NoiseChannel, NoiseSpec, Schedule, DENSITY_BASIS_CAP,
};
pub use search::search_evolve;
pub use trajectory::{
    broken_links_step, ensemble_marginals, ensemble_position_distribution, ensemble_reduce,
    imperfect_coin_step, trajectory_sample,
    Outcome, Trajectory,
};
pub use walk::{shift_apply, CoinedWalk, ShiftRule, WalkStateDensity, WalkStatePure};
