//! Multitask continuous-control benchmark: parameterized environment families,
//! a trust-region policy-gradient agent and a sequential transfer protocol.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agent;
pub mod cli;
pub mod env;
pub mod locomotion;
pub mod nav2d;
pub mod protocol;
