//! Error type shared by all chart and field operations.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FolError {
    #[error("unknown axis `{0}`")]
    UnknownAxis(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("division by near-zero denominator (min |d| = {min_abs:.3e}, scale {scale:.3e})")]
    DivisionByNearZero { min_abs: f64, scale: f64 },
    #[error("defining form not positive (min f = {0:.3e})")]
    DefiningFormNotPositive(f64),
    #[error("section outside contact neighborhood (sup |s| = {sup:.3e}, bound {bound:.3e})")]
    OutsideNeighborhood { sup: f64, bound: f64 },
    #[error("unsupported form degree {degree} for {op}")]
    UnsupportedDegree { op: &'static str, degree: usize },
    #[error("foliation not transverse to L (min |m(L)| = {0:.3e})")]
    NotTransverse(f64),
    #[error("not an infinitesimal deformation (|d^λ ζ| = {0:.3e})")]
    NotACocycle(f64),
    #[error("chart degenerate at point (condition number {0:.3e})")]
    ChartDegenerate(f64),
    #[error("rank degeneracy: ω matrix singular at some grid point (min |det| = {0:.3e})")]
    RankDegeneracy(f64),
    #[error("no closed leaf: u does not vanish on the row y = {row} (max |u| = {max_abs:.3e})")]
    NoClosedLeaf { row: &'static str, max_abs: f64 },
    #[error("not Schwartz at this truncation (|h| = {0:.3e} at the radius)")]
    NotSchwartz(f64),
    #[error("foliation not integrable (Frobenius residual {0:.3e})")]
    NotIntegrable(f64),
    #[error("non-integrable path node {node} (Frobenius residual {residual:.3e})")]
    NonIntegrableNode { node: usize, residual: f64 },
    #[error("residual blow-up during evolution at t = {t:.4} (master residual {residual:.3e})")]
    ResidualBlowUp { t: f64, residual: f64 },
    #[error("{0}")]
    Invalid(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, FolError>;
