//! Seeded Monte Carlo simulator for wirelessly powered backscatter networks.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod cli;
pub mod dyadic;
pub mod energy;
pub mod experiments;
pub mod mac;
pub mod netsim;
pub mod phylink;
pub mod report;
pub mod scenario;
