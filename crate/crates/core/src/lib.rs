//! Numerical geometry of collapsing elliptic K3 surfaces.
//!
//! The crate follows one pipeline. A Weierstrass fibration over the
//! projective line ([`fibration`]) gives period lattices and monodromy
//! ([`periods`]). Those give the fiberwise volume density ([`volume`]), which
//! defines a conformal metric on the punctured base ([`metric`]). The same
//! period data define a special Kähler structure ([`special_kahler`]) and the
//! semi-flat hyperkähler tensors over it ([`semiflat`]).

pub mod error;
pub mod fibration;
pub mod io;
pub mod metric;
pub mod periods;
pub mod poly;
pub mod quadrature;
pub mod semiflat;
pub mod special_kahler;
pub mod volume;

pub use error::{Error, Result};
pub use fibration::{Kodaira, SingularFiberRecord, WeierstrassFibration};
pub use periods::{MonodromyMatrix, PeriodPoint, QuasiUnipotenceData};
