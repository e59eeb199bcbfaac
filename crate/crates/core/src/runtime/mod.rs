//! In-process execution: matrices, file formats, the worker-pool simulator
//! and the master-side recovery for both schemes.

pub mod io;
pub mod master;
pub mod matrix;
pub mod sim;
