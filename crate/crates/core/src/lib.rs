pub mod cli;
pub mod clients;
pub mod corpus;
pub mod deps;
pub mod ir;
pub mod symexpr;
pub mod u256;
pub mod valueflow;
