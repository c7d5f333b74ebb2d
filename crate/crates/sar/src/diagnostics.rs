//! Error metrics and bands. Implementation pending.
