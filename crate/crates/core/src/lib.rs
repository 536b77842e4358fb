pub mod certificate;
pub mod error;
pub mod exec;
pub mod jet;
pub mod ode;
pub mod gap;
pub mod profile;
pub mod sme;
pub mod barrier;
pub mod solver;
pub mod assembler;
pub mod metric;
pub mod config;
pub mod ledger;
pub mod output;
pub mod pipeline;
pub mod plots;
