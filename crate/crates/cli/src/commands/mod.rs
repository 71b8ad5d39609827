pub mod classify;
pub mod eval;
pub mod extract;
pub mod hr;
pub mod sweep;
pub mod synthesize;
pub mod train;
