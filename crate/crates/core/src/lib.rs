//! Solver toolkit for high-precision university course scheduling under
//! reduced room capacity: room-set enumeration, a greedy placement engine,
//! wave-based simulated annealing, an exact oracle for tiny instances and
//! calibrated synthetic campuses.

pub mod anneal;
pub mod doc;
pub mod engine;
pub mod evaluate;
pub mod gen;
pub mod model;
pub mod oracle;
pub mod pra;
pub mod config;
pub mod report;
pub mod solve;
pub mod sweep;
