pub mod composite;
pub mod config;
pub mod direct;
pub mod error;
pub mod indirect;
pub mod ingest;
pub mod model;
pub mod oracle;
pub mod reputation;
pub mod simgen;
pub mod snapshot;
