pub mod stage;
pub mod law;
