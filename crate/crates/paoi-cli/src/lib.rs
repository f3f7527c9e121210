//! Experiment harness around the core library: configuration files and
//! presets, the sweep recipes, and delimited result emission. The binary in
//! `main.rs` is a thin dispatcher over these modules; they are exposed as a
//! library so integration tests can drive the recipes in-process.

pub mod config;
pub mod experiments;
pub mod output;
