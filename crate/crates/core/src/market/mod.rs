//! Monte Carlo market drivers.

mod channel;
mod config;
mod engine;
mod population;
mod record;

pub use channel::{calibrate_control_sigma, degrade_signal, map_accuracy, simulated_map_accuracy, ArmChannels, ChannelPair};
pub use config::{Arm, MarketConfig, Structure, WageMode, MAX_CYCLES};
pub use engine::{apply_structure, check_accounting, run_cycles, run_single_period, Market};
pub use population::{draw_population, POPULATION_CYCLE};
pub use record::CycleRecord;
