//! Experiment configuration files.
