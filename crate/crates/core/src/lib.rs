//! Computable phenotype for classifying COVID-19-positive admissions as
//! caused by COVID-19 or incidental, from structured EHR fields and
//! provider-note text.

// `!(x >= 0.0)` is used on purpose so NaN is rejected along with negatives.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assoc;
pub mod cli;
pub mod eval;
pub mod features;
pub mod ingest;
pub mod learn;
pub mod matrix;
pub mod pipeline;
pub mod seed;
pub mod synth;
pub mod text;
