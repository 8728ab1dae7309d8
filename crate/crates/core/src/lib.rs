//! Variable-strength combinatorial test suite generation.
//!
//! A one-test-at-a-time generator: each test case is found by a particle
//! swarm whose inertia weight is tuned online by a Mamdani fuzzy
//! controller, and committed cases remove their tuples from a hash-keyed
//! store of uncovered interactions. Every finished suite is re-checked by
//! an independent brute-force coverage oracle.
//!
//! ```
//! use vscit::model::{parse_model, VscaConfig};
//! use vscit::pso::{generate_suite, SwarmParams};
//!
//! let model = parse_model("3^4").unwrap();
//! let run = generate_suite(&model, &VscaConfig::uniform(2), &SwarmParams::default()).unwrap();
//! assert!(run.suite.len() >= 9);
//! ```

pub mod cli;
pub mod error;
pub mod fis;
pub mod model;
pub mod pso;
pub mod tuples;
pub mod verify;

pub use error::{Error, Result};
