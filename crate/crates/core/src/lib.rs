//! Hybrid quantum-classical reinforcement learning.
//!
//! A statevector-simulated hardware-efficient ansatz sits between a linear
//! pre-encoder and a linear post-processor; the resulting networks serve as
//! actor and/or critic in a PPO trainer on classic-control environments.

pub mod quantum;
pub mod ansatz;
pub mod dense;
pub mod hybrid;
pub mod envs;
pub mod model;
pub mod ppo;
pub mod tables;
pub mod experiment;
