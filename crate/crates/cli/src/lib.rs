//! Scenario runner around the `qmpc` control library: configuration
//! loading, the scenario implementations, and file output.

pub mod config;
pub mod output;
pub mod scenarios;
