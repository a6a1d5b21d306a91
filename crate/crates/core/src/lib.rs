//! Polarization analysis over retweet logs: audience-similarity graphs among
//! influencers, correspondence-analysis ideology scores, Hartigan's dip test,
//! and year-over-year affiliation flows, plus a planted-bloc corpus generator
//! used to check all of them.

pub mod dipstat;
pub mod flows;
pub mod ideology;
pub mod ingest;
pub mod linalg;
pub mod model;
pub mod numfmt;
pub mod simnet;
pub mod synth;

pub use model::{
    Entry, InfluencerCatalog, InfluencerEntry, InteractionMatrix, ModelError, PartyLabel,
    RetweetRecord,
};
