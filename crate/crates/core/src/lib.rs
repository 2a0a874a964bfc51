//! Porous-medium simulation of a city: traffic, emissions, wind and pollutant
//! transport on one unstructured triangular mesh.
//!
//! The pipeline runs in a fixed order: mesh, coefficient fields, traffic with
//! eikonal routing, emissions, steady wind, pollutant transport, diagnostics.
//! Each stage lives in its own module and can be driven independently.

pub mod airflow;
pub mod diagnostics;
pub mod eikonal;
pub mod emissions;
pub mod fem;
pub mod mesh;
pub mod pipeline;
pub mod scenario;
pub mod ssp;
pub mod traffic;
pub mod transport;
