pub mod conv;
pub mod loss;
pub mod norm;
pub mod pointwise;
pub mod spatial;
