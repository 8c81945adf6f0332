#![allow(dead_code)]

pub mod gen;
pub mod iso;
pub mod nets;
