pub mod analysis;
pub mod bioseq;
pub mod corpus;
pub mod evalharness;
pub mod promptgen;
