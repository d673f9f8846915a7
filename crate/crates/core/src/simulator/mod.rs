//! Seeded path simulation, Monte-Carlo first-passage estimates and synthetic
//! raw feeds.

mod passage;
mod path;
mod rng;
mod synth;

pub use passage::{default_t_max, mc_first_passage, FirstPassageEstimate, Monitoring, PassageSpec};
pub use path::{sample_jump, sample_log_increment, simulate_path, JumpClock, Model, PathSpec, PricePath};
pub use rng::{stream_rng, RNG_ALGORITHM};
pub use synth::{synth_lob_day, BookSpec};
