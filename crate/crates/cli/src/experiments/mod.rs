pub mod boundary;
pub mod common;
pub mod delta_eps;
pub mod frac_kernels;
pub mod frac_she;
pub mod green_checks;
pub mod qv;
pub mod she_cov;
pub mod stationarity;
