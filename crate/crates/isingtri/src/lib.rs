pub mod coefficients;
pub mod constants;
pub mod enumerator;
pub mod error;
pub mod explore;
pub mod hemap;
pub mod peeling;
pub mod poly;
pub mod scalar;
pub mod scaling;
pub mod series;

pub use error::{Error, Result};
pub use poly::NuPolynomial;
pub use scalar::{Hp, Real};

/// Working float for tables and simulation.
pub type Float = f64;
/// Exact series table, entries polynomial in ν.
pub type ExactTable = series::PartitionTable<NuPolynomial>;
/// Series table specialised to one numeric ν.
pub type NumericTable = series::PartitionTable<Float>;
pub type CriticalParam = constants::Parametrization<Float>;
/// High-precision parametrization for the constants.
pub type HpParam = constants::Parametrization<Hp>;
