//! Product knowledge graphs from images.
//!
//! The crate is organised around the enrollment cycle:
//!
//! * [`schema`] defines and induces typed property schemas.
//! * [`constraints`] compiles a schema into a generation pattern and validates model output.
//! * [`model_client`] talks to vision-language and language models (or replays fixtures).
//! * [`graph`] holds the inventory graph and the lexical node merge.
//! * [`pipeline`] runs extraction, formatting, hierarchy expansion and merging per product.
//! * [`eval`] scores predictions against annotations.
//! * [`persist`] saves, loads and exports inventories.

pub mod constraints;
pub mod eval;
pub mod graph;
pub mod model_client;
pub mod persist;
pub mod pipeline;
pub mod prompts;
pub mod schema;
