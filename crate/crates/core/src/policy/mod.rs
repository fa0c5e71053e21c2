//! Query-selection policies.

mod boltzmann;
mod greedy;
mod schedule;
mod thompson;

pub use boltzmann::{
    boltzmann_sample, lattice_values, BoltzmannDraw, ChainInit, ChainStats, LatticeSampler, MhConfig,
    GREEDY_START_RESTARTS, LOW_ACCEPTANCE,
};
pub use greedy::greedy_argmax;
pub use schedule::{glie_beta, TemperatureSchedule, EPSILON_C};
pub use thompson::thompson_select;
