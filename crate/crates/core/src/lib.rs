//! Weak-to-strong class-prototype learning over precomputed embeddings.
//!
//! A weak classifier supervises a stronger one: the strong model is a
//! set of learnable class prototypes scored by cosine similarity against
//! frozen feature embeddings, trained by aligning its tempered softmax
//! distribution to the weak model's logits under a KL objective. The
//! crate also ships the baseline objectives (cross-entropy on
//! pseudo-labels, logit distillation, two confidence-mixing variants),
//! an Adam optimizer with warm-up and best-model tracking, bit-exact
//! matrix/label file formats, deterministic dataset splitting, a
//! synthetic multi-domain benchmark, and the end-to-end pipeline that
//! measures weak, weak-to-strong, and ceiling accuracies.
//!
//! All numeric work is `f64`, every random choice flows from one seed
//! through named Philox sub-streams, and batch reductions run left to
//! right, so any run is reproducible bit-for-bit.

pub mod bench;
pub mod error;
pub mod io;
pub mod loss;
pub mod matrix;
pub mod model;
pub mod optim;
pub mod rng;
pub mod split;
pub mod types;
