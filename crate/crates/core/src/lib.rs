//! Online scheduling of noisy binary classifiers to arriving samples under
//! the one-coin Dawid-Skene model, with spectral-plus-EM competence learning
//! and an offline oracle for small instances.

pub mod bench;
pub mod cli;
pub mod data;
pub mod greedy;
pub mod learn;
pub mod model;
pub mod oracle;
pub mod scheduler;
pub mod utility;
