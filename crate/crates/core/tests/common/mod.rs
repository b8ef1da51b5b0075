pub mod ks;
pub mod quadrature;
