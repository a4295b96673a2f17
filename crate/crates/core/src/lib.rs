//! Generation from noisy example streams: set algebra over a countable
//! universe, hypothesis classes, noisy closure dimensions, generators,
//! adversaries and the game harness.

pub mod adversaries;
pub mod classes;
pub mod closure;
pub mod game;
pub mod generators;
pub mod setalg;
pub mod suites;
