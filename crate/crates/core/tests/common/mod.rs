#![allow(dead_code)]

pub mod bench;
pub mod golden;
pub mod penalty_oracle;
pub mod world;
