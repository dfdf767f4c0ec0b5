#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]
extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod bitalloc;
pub mod channel;
pub mod error;
pub mod gain;
pub mod linalg;
pub mod link;
pub mod modulation;
pub mod precoder;
pub mod quad;
pub mod random;
pub mod shape;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
