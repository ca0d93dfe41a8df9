//! Numerical laboratory for deformations of nonsingular Legendrian foliations
//! and coisotropic submanifolds in contact manifolds: spectral field calculus
//! on periodic charts, tangential/twisted de Rham operators, contact master
//! equation residuals with independent oracles, the torus cohomology worked
//! example, and contact Hamiltonian flows with isotopy certificates.

pub mod error;
pub mod field;
pub mod foliation;
pub mod forms;
pub mod grid;
pub mod io;
pub mod cohomology;
pub mod coiso;
pub mod master;
pub mod sampling;
pub mod spectral;

pub use error::{FolError, Result};
pub use field::{Elementary, ScalarField};
pub use foliation::{FoliationChart, LegendrianChart, TorusFoliationChart};
pub use forms::{FullForm, TangentialForm};
pub use grid::{GridRef, PeriodicGrid};
