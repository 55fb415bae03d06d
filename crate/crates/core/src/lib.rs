//! Deterministic simulation of public EV charging in a city region.
//!
//! The pieces, roughly in data-flow order:
//!
//! - [`domain`]: geography, boroughs, vehicles, sockets, discrete distributions.
//! - [`demand`]: synthetic agents and the charge requests their trips produce.
//! - [`supply`]: stations, connectors and the connector state machine.
//! - [`matching`]: access and roaming, greedy and optimal allocation,
//!   reservations, queues and deporting offers.
//! - [`engine`]: the discrete-event run tying demand to supply over a horizon.
//! - [`scheduler`]: valley filling and V2G peak shaving of the charging load.
//! - [`estimator`]: borough-level need against public capacity.
//! - [`scenario`], [`io`], [`cli`]: configuration, CSV/JSON and the command line.
//!
//! A run is a pure function of the scenario and a seed; see [`engine::run`].

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod demand;
pub mod domain;
pub mod engine;
pub mod error;
pub mod estimator;
pub mod io;
pub mod matching;
pub mod reference;
pub mod scenario;
pub mod scheduler;
pub mod supply;

pub use error::{Error, Result};
