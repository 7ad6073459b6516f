pub mod align;
pub mod channel;
pub mod clustering;
pub mod config;
pub mod decode;
pub mod ecc;
pub mod error;
pub mod io;
pub mod layout;
pub mod metrics;
pub mod motif;
pub mod pipeline;
pub mod primers;
pub mod prng;
pub mod seq;

pub use error::{Error, Result};

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/introduction.md")]
mod book_introduction {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/motifs.md")]
mod book_motifs {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/ecc.md")]
mod book_ecc {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/layout.md")]
mod book_layout {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/channel.md")]
mod book_channel {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/decoding.md")]
mod book_decoding {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/evaluation.md")]
mod book_evaluation {}

#[cfg(doctest)]
#[doc = include_str!("../../../docs/formats.md")]
mod formats {}
