//! Pointwise equivalence checking of two penalty functions.

use serde::{Deserialize, Serialize};

use super::{Occupancy, OccupancyKind, PenaltyError, PenaltyFunction, TOLERANCE};

/// The occupancy grid on which two blocks are compared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub points: Vec<Occupancy>,
}

impl Domain {
    /// Counts `0..=max`.
    pub fn counts(max: u64) -> Self {
        Self { points: (0..=max).map(Occupancy::Count).collect() }
    }

    /// Fractions `k/steps` for `k = 0..=steps`.
    pub fn fractions(steps: u32) -> Self {
        Self { points: (0..=steps).map(|k| Occupancy::Fraction(k as f64 / steps as f64)).collect() }
    }

    /// Counts 0..64 or fractions 0..1 in steps of 0.01.
    pub fn default_for(kind: OccupancyKind) -> Self {
        match kind {
            OccupancyKind::Count => Self::counts(64),
            OccupancyKind::Fraction => Self::fractions(100),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Divergence {
    pub occupancy: Occupancy,
    pub expected: f64,
    pub got: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub equivalent: bool,
    pub points_checked: usize,
    pub first_divergence: Option<Divergence>,
}

/// Compares `expected` against `got` at every domain point, reporting the
/// smallest occupancy where they differ by more than [`TOLERANCE`].
pub fn verify_equivalence<A, B>(expected: &A, got: &B, domain: &Domain) -> Result<EquivalenceReport, PenaltyError>
where
    A: PenaltyFunction + ?Sized,
    B: PenaltyFunction + ?Sized,
{
    if expected.occupancy_kind() != got.occupancy_kind() {
        return Err(PenaltyError::KindMismatch { expected: expected.occupancy_kind(), got: got.occupancy_kind() });
    }
    let mut points = domain.points.clone();
    points.sort_by(|a, b| a.value().total_cmp(&b.value()));
    for &x in &points {
        let e = expected.energy(x)?;
        let g = got.energy(x)?;
        if (e - g).abs() > TOLERANCE || !g.is_finite() {
            return Ok(EquivalenceReport {
                equivalent: false,
                points_checked: points.len(),
                first_divergence: Some(Divergence { occupancy: x, expected: e, got: g }),
            });
        }
    }
    Ok(EquivalenceReport { equivalent: true, points_checked: points.len(), first_divergence: None })
}
