pub mod geometry;
pub mod proxy;
pub mod mapping;
pub mod record;
pub mod scenarios;
pub mod sync;
pub mod gesture;
pub mod cli;
