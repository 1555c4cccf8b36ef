//! Manifests, toy corpus generation, and noisy-view construction.
