//! Network-coded over-the-air dissemination: finite fields, random linear
//! coding, a slot-based channel and event engine, and five dissemination
//! protocols with an experiment harness on top.
//!
//! ```
//! use oapsim_core::codec::{encode, DecoderState, DegreeDistribution, Page};
//! use oapsim_core::galois::Field;
//! use rand::SeedableRng;
//!
//! let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
//! let field = Field::gf256();
//! let page = Page::random(0, 8, 20, &mut rng);
//! let mut rx = DecoderState::new(field.clone(), 0, 8, 20);
//! while !rx.is_complete() {
//!     let cw = encode(&page, &mut rng, &DegreeDistribution::UniformRlc, &field).unwrap();
//!     rx.absorb(&cw).unwrap();
//! }
//! assert_eq!(rx.decode().unwrap(), page);
//! ```

pub mod codec;
pub mod engine;
pub mod experiment;
pub mod galois;
pub mod netmodel;
pub mod protocols;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Galois(#[from] galois::GaloisError),
    #[error(transparent)]
    Codec(#[from] codec::CodecError),
    #[error(transparent)]
    Topology(#[from] netmodel::TopologyError),
    #[error(transparent)]
    Engine(#[from] engine::EngineError),
    #[error(transparent)]
    Scenario(#[from] experiment::ScenarioError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
