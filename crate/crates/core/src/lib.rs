pub mod emit;
pub mod engine;
pub mod gate;
pub mod learn;
pub mod lp;
pub mod oracle;
pub mod propagate;
pub mod search;

pub use relucert_kernel as kernel;
