#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chain;
pub mod coverage;
pub mod error;
pub mod harness;
pub mod image;
pub mod link_models;
pub mod phy;
pub mod power_alloc;
pub mod qoe;
pub mod reconstruction;
pub mod remote;
pub mod source_codec;
pub mod synth;

pub use error::{Error, Result};
pub use image::Image;
