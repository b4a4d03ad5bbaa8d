//! Co-design of hexacopter bodies and learned flight controllers.

// `!(x > 0.0)` is used on purpose so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod evolution;
pub mod experiment;
pub mod hover;
pub mod learner;
pub mod metrics;
pub mod morphology;
pub mod sim;
pub mod tasks;
