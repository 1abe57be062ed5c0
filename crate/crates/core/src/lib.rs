//! Melody-lyric alignment for Mandarin.
//!
//! Scores how well a Mandarin lyric fits a melody (tone shape within a
//! note group, pitch contour between syllables of one word, rests on
//! word boundaries) and decodes new lyrics under those constraints with
//! a beam search over a pluggable candidate model.
//!
//! Start from [`melody`] for the data model, [`scoring`] for the
//! alignment scores, [`decode`] for generation and [`eval`] for corpus
//! reports and weight sweeps.

pub mod cli;
pub mod decode;
pub mod error;
pub mod eval;
pub mod melody;
pub mod model;
pub mod scoring;
pub mod segment;
pub mod shape;
pub mod tone;

pub use error::{Error, Result};
