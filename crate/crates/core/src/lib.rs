pub mod braid;
pub mod freegroup;
pub mod geometry;
pub mod harness;
pub mod homotopy;
pub mod liegroup;
pub mod model;
pub mod stable;
pub mod stats;
pub mod suite;
