//! Variant wiring, loss assembly, and the epoch loop.
