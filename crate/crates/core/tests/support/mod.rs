pub mod equivalence;
pub mod naive;
