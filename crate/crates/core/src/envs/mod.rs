//! Deterministic miniature environments that produce trajectories with
//! known ground truth. They stand in for external rollout sources: a
//! gridworld survival-style world and a rooms/items/keys text adventure.

mod gridworld;
mod textadv;

pub use gridworld::{simulate_gridworld, GridWorldConfig, CRAFT_RECIPES};
pub use textadv::{simulate_textadventure, TextAdvConfig};
