//! Small numeric kernels shared by the analytic modules.

pub mod aberth;
pub mod cauchy;
pub mod dd;
pub mod poly;
pub mod quad;
