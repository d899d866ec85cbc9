pub mod error;
pub mod linalg;
pub mod search;
pub mod bounds;
pub mod barrier;
pub mod lmi;
pub mod counterexample;
pub mod pattern;
pub mod eckart_young;
pub mod experiments;
pub mod io;
pub mod cli;
