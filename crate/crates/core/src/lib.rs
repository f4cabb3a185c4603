//! Fairness-constrained Bayes-optimal classification on a quantized feature
//! space.
//!
//! The pipeline is: load a [`dataset::SampleTable`], train a
//! [`quantizer::Codebook`], tabulate the [`quantizer::DiscreteJoint`], then
//! either solve the linear trade-off program in [`fairlp`] or learn a
//! decorrelating transfer matrix in [`decorrelate`].

pub mod dataset;
pub mod quantizer;
pub mod fairlp;
pub mod decorrelate;
pub mod synthetic;
pub mod cli;
