//! Information-state dialogue engine for task-oriented conversations.
//!
//! A session keeps user preferences as predefined slots plus a free-text
//! remainder, and an update strategy picks dialogue moves from a ledger of
//! tri-state flags: extract preferences, flag wrong values, query the
//! database, ask for more constraints, rank and present entities, suggest
//! nearby configurations when nothing matches.
//!
//! ```
//! use tod_core::{fixtures, strategy::{Engine, Session}};
//!
//! let mut session = Session::new("demo", fixtures::restaurant(), Engine::rule_based());
//! let turn = session.advance(Some("a french restaurant in the north")).unwrap();
//! assert!(turn.awaiting_input);
//! ```

pub mod eval;
pub mod fixtures;
pub mod ingest;
pub mod lexicon;
pub mod moves;
pub mod nlu;
pub mod normalize;
pub mod retrieval;
pub mod schema;
pub mod state;
pub mod strategy;

pub use schema::{
    ConfigError, DomainDictionary, DomainSchema, EntityDatabase, EntityRecord, SlotSpec,
};
pub use state::{InformationState, TriFlag};
pub use strategy::{Engine, Session, TurnResult};
