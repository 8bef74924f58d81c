//! The guide under `book/`, one module per chapter, so that
//! `cargo test -p somaphone-book --doc` runs every listing.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/breath.md")]
pub mod breath {}
#[doc = include_str!("../../../book/src/osc.md")]
pub mod osc {}
#[doc = include_str!("../../../book/src/mapping.md")]
pub mod mapping {}
#[doc = include_str!("../../../book/src/dsp.md")]
pub mod dsp {}
#[doc = include_str!("../../../book/src/sessions.md")]
pub mod sessions {}
#[doc = include_str!("../../../book/src/live.md")]
pub mod live {}
