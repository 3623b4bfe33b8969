pub mod hashcore;
pub mod backend;
pub mod ml;
pub mod measurers;
pub mod verifier;
pub mod fixtures;
