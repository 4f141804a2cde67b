pub mod basis;
pub mod error;
pub mod field;
pub mod idp;
pub mod limiter;
pub mod mesh;
pub mod problems;
pub mod quadrature;
pub mod weno;
