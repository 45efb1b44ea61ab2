//! Independent reference implementations and fixtures shared by the
//! integration tests and the acceptance runner.
#![allow(dead_code)]

pub mod federation;
pub mod fuzz;
pub mod gen;
pub mod oracles;
