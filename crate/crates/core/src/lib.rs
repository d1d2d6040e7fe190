//! Bayesian concept learning of multipart 3-D objects.
//!
//! Hypotheses about an object are derivations of a probabilistic
//! context-free grammar whose terminals are object parts. A derivation is
//! realized as a voxel object, observed through two simulated senses (a
//! silhouette HoG descriptor and a 16-joint grasp), and scored against
//! sensory data. Metropolis-Hastings over derivations with subtree
//! regeneration samples the posterior.

pub mod grammar;
pub mod haptics;
pub mod harness;
pub mod inference;
pub mod object;
pub mod vision;
