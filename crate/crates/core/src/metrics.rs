//! Equal-error-rate scoring and breakdown reports.
