//! Checks shared between test targets. Included by path, so not every
//! includer uses every item.
#![allow(dead_code)]

pub mod oracle;
pub mod probit;
pub mod rubric;
