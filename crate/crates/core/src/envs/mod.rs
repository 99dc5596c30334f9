//! Benchmark and test problems.

mod beacon;
pub mod toy;

pub use beacon::{
    action_vector, BeaconWorld, Disc, MapConfig, StepOutcome, Variant, COLLISION_PENALTY, GOAL_RADIUS,
    GOAL_REWARD, INITIAL_VARIANCE, LIGHT_DARK_BEACON_VARIANCE, NUM_ACTIONS, STAY, STEP_COST,
    TRANSITION_VARIANCE,
};
