pub mod config;
pub mod error;
pub mod files;
pub mod geometry;
pub mod lsystem;
pub mod render;
pub mod grammar;
pub mod exec;
pub mod seed;
pub mod harness;
pub mod inference;
