pub mod certificates;
pub mod families;
pub mod protocols;
pub mod script;
pub mod statespace;
pub mod subsets;
pub mod verification;
