//! Analysis of elliptical follow-up queries over single database tables.
//!
//! Given a self-contained precedent query ("Show the sum of sales by brand in
//! the year 2018") and a terse follow-up ("How about the average"), the
//! pipeline produces one fused, self-contained query ("Show the average of
//! sales by brand in the year 2018"). It runs in four stages:
//!
//! 1. [`anonymize`] — map table-grounded and lexicon words to typed symbols,
//! 2. [`segment`] — enumerate every rule-deducible segmentation as a tagged
//!    candidate (with a Refine/Append intent over the sentence pattern),
//! 3. [`rank`] — score candidates with a bidirectional recurrent encoder plus
//!    tag-transition matrix and pick the argmax,
//! 4. [`fuse`] — resolve conflicts between precedent and follow-up segments
//!    into the final query text.
//!
//! [`train`] fits the ranker with weakly supervised max-margin updates (no tag
//! annotations needed, only gold fused queries); [`eval`] implements symbol
//! accuracy and corpus BLEU; [`corpus`] holds table/triple loading; [`synth`]
//! generates a small scenario-based corpus for end-to-end runs.

pub mod anonymize;
pub mod corpus;
pub mod eval;
pub mod fuse;
pub mod pipeline;
pub mod rank;
pub mod segment;
pub mod synth;
pub mod train;
