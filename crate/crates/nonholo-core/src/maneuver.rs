pub mod trajectory;
pub mod lie;
pub mod transform;
pub mod reference;
