//! Study drivers, configuration and output writers of the `emicut` tool.

pub mod config;
pub mod report;
pub mod studies;
pub mod vtk;
